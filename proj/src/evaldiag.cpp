#include "xtts/evaldiag.hpp"

#include <algorithm>
#include <cmath>

#include "xtts/error.hpp"
#include "xtts/parallel.hpp"

namespace xtts::eval::inline XTTS_PRECISION {

nlohmann::json AlignmentDiagnostics::to_json() const {
  return {{"focus_rate", focus_rate},
          {"coverage", coverage},
          {"monotonicity_violations", monotonicity_violations},
          {"terminated", terminated},
          {"steps", steps}};
}

AlignmentDiagnostics diagnose_alignment(const audio::Matrix& a, bool terminated) {
  if (a.cols == 0) throw Error(ErrorKind::Shape, "diagnose_alignment: alignment has no encoder positions");
  std::size_t rows = a.rows;
  while (rows > 0) {
    bool zero = true;
    for (std::size_t j = 0; j < a.cols && zero; ++j) zero = a(rows - 1, j) == 0.0;
    if (!zero) break;
    --rows;
  }
  if (rows == 0) throw Error(ErrorKind::Shape, "diagnose_alignment: alignment has no decoder steps");

  AlignmentDiagnostics d;
  d.terminated = terminated;
  d.steps = rows;
  std::vector<double> cumulative(a.cols, 0.0);
  std::size_t prev_arg = 0;
  double focus = 0.0;
  for (std::size_t t = 0; t < rows; ++t) {
    double sum = 0.0, best = -1.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double v = a(t, j);
      sum += v;
      cumulative[j] += v;
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    if (std::abs(sum - 1.0) > 1e-5)
      throw Error(ErrorKind::Shape, "diagnose_alignment: row " + std::to_string(t) + " sums to " + std::to_string(sum));
    focus += best;
    if (t > 0 && arg + 2 < prev_arg) ++d.monotonicity_violations;
    prev_arg = arg;
  }
  d.focus_rate = focus / static_cast<double>(rows);
  d.coverage = static_cast<double>(std::count_if(cumulative.begin(), cumulative.end(),
                                                 [](double c) { return c >= 0.5; })) /
               static_cast<double>(a.cols);
  return d;
}

double speaker_signature_distance(const audio::Matrix& a, const audio::Matrix& b) {
  if (a.cols != b.cols)
    throw Error(ErrorKind::Shape, "speaker_signature_distance: mel bins differ (" + std::to_string(a.cols) + " vs " +
                                      std::to_string(b.cols) + ")");
  if (a.rows == 0 || b.rows == 0) throw Error(ErrorKind::Shape, "speaker_signature_distance: empty spectrogram");
  auto signature = [](const audio::Matrix& m) {
    std::vector<double> s(2 * m.cols, 0.0);
    for (std::size_t c = 0; c < m.cols; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < m.rows; ++r) mean += m(r, c);
      mean /= static_cast<double>(m.rows);
      double var = 0.0;
      for (std::size_t r = 0; r < m.rows; ++r) var += (m(r, c) - mean) * (m(r, c) - mean);
      s[c] = mean;
      s[m.cols + c] = std::sqrt(var / static_cast<double>(m.rows));
    }
    return s;
  };
  const auto sa = signature(a), sb = signature(b);
  double sq = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) sq += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return std::sqrt(sq);
}

TeacherForcedReport teacher_forced_eval(const train::Checkpoint& ckpt, const datasel::Manifest& m) {
  const auto examples = train::load_examples(m, ckpt.inventory, ckpt.speakers, ckpt.stft);
  if (examples.empty()) throw Error(ErrorKind::Data, "teacher_forced_eval: manifest has no records");
  const double pad = std::log(ckpt.stft.log_floor);
  TeacherForcedReport rep;
  rep.records.resize(examples.size());
  parallel_for(examples.size(), [&](std::size_t i) {
    rep.records[i] = {examples[i].id, train::example_loss(ckpt.params, ckpt.model, examples[i], pad)};
  });
  for (const auto& r : rep.records) rep.mean_loss += r.loss;
  rep.mean_loss /= static_cast<double>(rep.records.size());
  return rep;
}

}  // namespace xtts::eval::inline XTTS_PRECISION
