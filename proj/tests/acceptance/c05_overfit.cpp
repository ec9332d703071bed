// One utterance, 500 steps: the teacher-forced loss collapses and free-running
// synthesis reproduces the target mel.

#include <cmath>
#include <sstream>

#include "acceptance/acceptance.hpp"
#include "acceptance/toy_setup.hpp"
#include "support.hpp"

namespace xtts::acceptance {

Outcome overfit_smoke() {
  xtts::testing::TempDir dir("accept_overfit");
  const auto& cn = toy::chinese_symbols();
  const std::string text = cn[0] + cn[1] + " abc";
  toy::Voice voice;
  voice.name = "solo";
  audio::wav_write(dir / "solo.wav", toy::render(text, voice, 5));

  datasel::Manifest m;
  m.root = dir.path();
  datasel::Record r;
  r.id = "solo_01";
  r.audio = "solo.wav";
  r.text = text;
  r.speaker = "solo";
  m.records.push_back(r);

  auto in = toy_inputs(m, 500);
  in.train.batch_size = 1;
  in.train.validation_fraction = 0.0;
  const auto res = train::pretrain(in);
  const auto& ck = res.checkpoint;
  const double pad_value = std::log(ck.stft.log_floor);

  const auto examples = train::load_examples(m, ck.inventory, ck.speakers, ck.stft);
  const auto& ex = examples.at(0);
  // One example per batch, so the first logged batch loss is the step-0 teacher-forced loss.
  const double loss0 = res.losses.front();
  const double loss_end = train::example_loss(ck.params, ck.model, ex, pad_value);

  const auto syn = model::synthesize(ck.params, ck.model, ex.seq, ex.mask, ex.speaker);
  // Mean absolute error over the target's frames; missing synthesized frames
  // count as the log floor.
  double l1 = 0.0;
  for (std::size_t t = 0; t < ex.mel.rows; ++t)
    for (std::size_t b = 0; b < ex.mel.cols; ++b) {
      const double y = t < syn.mel.rows ? syn.mel(t, b) : pad_value;
      l1 += std::abs(y - ex.mel(t, b));
    }
  l1 /= static_cast<double>(ex.mel.rows * ex.mel.cols);

  std::ostringstream os;
  os << "T_in " << ex.seq.length() << ", T_out " << ex.mel.rows << "; teacher-forced loss " << loss0 << " -> "
     << loss_end << " (ratio " << loss_end / loss0 << "); synth frames " << syn.mel.rows
     << (syn.truncated ? " (truncated)" : "") << ", mean L1 " << l1;
  const bool ok = ex.seq.length() <= 20 && ex.mel.rows <= 60 && loss_end < 0.1 * loss0 && !syn.truncated &&
                  l1 < 0.15;
  return {ok, os.str()};
}

}  // namespace xtts::acceptance
