#pragma once

// Loss, Adam, plateau learning-rate schedule, the pretrain/finetune protocol
// and the checkpoint container.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtts/datasel.hpp"
#include "xtts/model.hpp"

namespace xtts::train::inline XTTS_PRECISION {

using model::ModelConfig;
using model::ParamStore;
using num::Tensor;

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr_initial = 1e-3;
  double lr_floor = 4e-4;
  std::size_t lr_halve_patience = 3;      // validations without improvement
  std::size_t pretrain_steps = 100000;
  std::size_t finetune_max_steps = 200000;
  std::size_t early_stop_patience = 5;    // validations without improvement
  std::size_t validate_every = 1000;      // optimizer steps
  double validation_fraction = 0.05;
  double clip_norm = 1.0;
  std::uint64_t seed = 42;
  std::vector<std::string> freeze_patterns = {"encoder"};

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j, const std::string& where = "train");
};

// mse(m, y) + mse(x_hat, y) + bce(gates, gate_targets).
Tensor tts_loss(const Tensor& mel, const Tensor& mel_post, const Tensor& gates, const Tensor& target,
                const Tensor& gate_targets);
Tensor tts_loss(const model::ForwardResult& f);

struct Moments {
  std::vector<Real> m;
  std::vector<Real> v;
};

struct OptimizerState {
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, Moments> moments;  // created on a parameter's first update
};

// Dense gradient; `rows`, when set, restricts the update to those rows of an
// embedding table (other rows and their moments stay untouched).
struct Gradient {
  std::vector<Real> values;
  std::optional<std::vector<std::size_t>> rows;
};
using GradientMap = std::map<std::string, Gradient>;

// One bias-corrected Adam update of every parameter named in `grads`.
void adam_step(ParamStore& params, const GradientMap& grads, OptimizerState& state, double lr);

// Scales every gradient so the global L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_global_norm(GradientMap& grads, double max_norm);

// Replays the plateau rule over the validation losses seen so far: after
// `lr_halve_patience` consecutive non-improving validations the rate halves,
// never below lr_floor, and the plateau counter restarts.
double lr_at(const TrainConfig& cfg, const std::vector<double>& validation_history);

struct ScheduleState {
  double lr = 0.0;
  std::vector<double> validation_history;
};

struct Checkpoint {
  ModelConfig model;
  audio::StftConfig stft;
  text::SymbolInventory inventory;
  std::map<std::string, std::size_t> speakers;  // name -> speaker table row
  ParamStore params;
  std::optional<OptimizerState> optimizer;
  std::uint64_t step = 0;
  ScheduleState schedule;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws Config when the stored config differs from `expected` (e.g. Shared vs SPE).
void check_compatible(const Checkpoint& ckpt, const ModelConfig& expected);

// One tokenized, analysed utterance ready for the model.
struct Example {
  std::string id;
  text::SymbolSequence seq;
  text::LanguageMask mask;
  std::size_t speaker = 0;
  audio::Matrix mel;  // [T_out x mel_bins]
};

// Kept records only. Unknown speakers are a Data error naming the known ones.
std::vector<Example> load_examples(const datasel::Manifest& m, const text::SymbolInventory& inv,
                                   const std::map<std::string, std::size_t>& speakers,
                                   const audio::StftConfig& stft);

// Deterministic hold-out: ceil(fraction * n) records with the smallest id
// hashes (at least one when n >= 2, none otherwise). Returns indices (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(const std::vector<Example>& ex,
                                                                               double fraction);

struct StepInfo {
  std::size_t step = 0;  // optimizer steps completed
  double loss = 0.0;     // batch loss before the update
  double lr = 0.0;
  double grad_norm = 0.0;
  std::optional<double> validation_loss;
};
using StepCallback = std::function<void(const StepInfo&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // batch loss per step
  std::vector<double> validation_losses;
  std::size_t best_step = 0;   // step of the returned parameters
  bool stopped_early = false;
};

// Loss of one example under `params`, no gradients.
double example_loss(const ParamStore& params, const ModelConfig& cfg, const Example& ex, double pad_value);

// Batch loss and mean gradient over `batch`, reduced in batch order.
double batch_gradient(const ParamStore& params, const ModelConfig& cfg, const std::vector<const Example*>& batch,
                      double pad_value, const std::vector<std::string>& frozen, GradientMap& grads);

struct PretrainInputs {
  datasel::Manifest manifest;
  text::SymbolInventory inventory;
  ModelConfig model;
  audio::StftConfig stft;
  TrainConfig train;
  // When set, the speaker table rows in this order; manifest speakers outside it are an error.
  std::optional<std::vector<std::string>> speakers;
};

TrainResult pretrain(const PretrainInputs& in, const StepCallback& on_step = {});

// Encoder parameters matching train.freeze_patterns stay bit-identical. Fresh
// optimizer state; early stopping on a held-out split returns the best
// validation parameters.
TrainResult finetune(const Checkpoint& base, const datasel::Manifest& target, const TrainConfig& train,
                     const StepCallback& on_step = {});

}  // namespace xtts::train::inline XTTS_PRECISION
