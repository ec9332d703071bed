#pragma once

// Objective probes standing in for listening tests: alignment quality,
// teacher-forced fit and a coarse speaker-signature distance.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtts/training.hpp"

namespace xtts::eval::inline XTTS_PRECISION {

struct AlignmentDiagnostics {
  double focus_rate = 0.0;  // mean over steps of max_j alpha_j
  double coverage = 0.0;    // fraction of positions with cumulative attention >= 0.5
  std::size_t monotonicity_violations = 0;  // argmax drops by more than 2 positions
  bool terminated = false;
  std::size_t steps = 0;

  nlohmann::json to_json() const;
};

// Trailing all-zero rows are ignored. Every remaining row must sum to 1 +- 1e-5.
AlignmentDiagnostics diagnose_alignment(const audio::Matrix& a, bool terminated);

// Euclidean distance between the per-bin [mean, std] vectors of two log-mel spectrograms.
double speaker_signature_distance(const audio::Matrix& a, const audio::Matrix& b);

struct RecordLoss {
  std::string id;
  double loss = 0.0;
};

struct TeacherForcedReport {
  std::vector<RecordLoss> records;
  double mean_loss = 0.0;
};

TeacherForcedReport teacher_forced_eval(const train::Checkpoint& ckpt, const datasel::Manifest& m);

}  // namespace xtts::eval::inline XTTS_PRECISION
