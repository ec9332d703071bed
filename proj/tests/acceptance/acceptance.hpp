#pragma once

#include <string>

namespace xtts::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome splice_equivalence();
Outcome gradient_oracle();
Outcome attention_invariants();
Outcome freeze_contract();
Outcome overfit_smoke();
Outcome filtering_procedure();
Outcome snr_tolerance();
Outcome griffin_lim_convergence();
Outcome pipeline_determinism();
Outcome speaker_steering();

}  // namespace xtts::acceptance
