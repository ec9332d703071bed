#include "xtts/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <set>

#include "xtts/error.hpp"
#include "xtts/kernels.hpp"
#include "xtts/parallel.hpp"

namespace xtts::train::inline XTTS_PRECISION {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool is_table(const std::string& name) {
  static constexpr std::string_view suffix = ".embedding";
  return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void reject_unknown(const nlohmann::json& j, const nlohmann::json& defaults, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!defaults.contains(it.key()))
      throw Error(ErrorKind::Config, "unknown config key '" + where + "." + it.key() + "'");
}

void accumulate(GradientMap& into, GradientMap&& from) {
  for (auto& [name, g] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, std::move(g));
      continue;
    }
    auto& acc = it->second;
    for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += g.values[i];
    if (acc.rows && g.rows) {
      std::vector<std::size_t> merged;
      std::set_union(acc.rows->begin(), acc.rows->end(), g.rows->begin(), g.rows->end(),
                     std::back_inserter(merged));
      acc.rows = std::move(merged);
    } else {
      acc.rows.reset();
    }
  }
}

struct RunState {
  Checkpoint ckpt;
  std::vector<Example> examples;
  std::vector<std::string> frozen;
  std::size_t max_steps = 0;
  bool early_stop = false;
};

TrainResult run(RunState rs, const TrainConfig& tc, const StepCallback& on_step) {
  TrainResult res;
  Checkpoint& ckpt = rs.ckpt;
  const ModelConfig& cfg = ckpt.model;
  const double pad_value = std::log(ckpt.stft.log_floor);
  auto [train_idx, val_idx] = split_validation(rs.examples, tc.validation_fraction);
  if (train_idx.empty()) throw Error(ErrorKind::Data, "no training records left after the validation split");

  OptimizerState opt;
  ckpt.schedule = ScheduleState{tc.lr_initial, {}};
  std::mt19937_64 gen(tc.seed ^ 0x5348554646ULL);
  std::vector<std::size_t> order = train_idx;
  std::size_t cursor = order.size();
  const std::size_t batch_size = std::min(tc.batch_size, order.size());

  double best = std::numeric_limits<double>::infinity();
  std::optional<ParamStore> best_params;
  std::optional<OptimizerState> best_opt;
  std::size_t bad = 0;

  for (std::size_t step = 0; step < rs.max_steps; ++step) {
    std::vector<const Example*> batch;
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[gen() % (i + 1)]);
        cursor = 0;
      }
      batch.push_back(&rs.examples[order[cursor++]]);
    }
    GradientMap grads;
    StepInfo info;
    info.loss = batch_gradient(ckpt.params, cfg, batch, pad_value, rs.frozen, grads);
    info.grad_norm = clip_global_norm(grads, tc.clip_norm);
    info.lr = ckpt.schedule.lr;
    adam_step(ckpt.params, grads, opt, ckpt.schedule.lr);
    res.losses.push_back(info.loss);
    info.step = step + 1;

    if (!val_idx.empty() && info.step % tc.validate_every == 0) {
      std::vector<double> losses(val_idx.size());
      parallel_for(val_idx.size(), [&](std::size_t i) {
        losses[i] = example_loss(ckpt.params, cfg, rs.examples[val_idx[i]], pad_value);
      });
      double v = 0.0;
      for (double l : losses) v += l;
      v /= static_cast<double>(losses.size());
      info.validation_loss = v;
      res.validation_losses.push_back(v);
      ckpt.schedule.validation_history.push_back(v);
      ckpt.schedule.lr = lr_at(tc, ckpt.schedule.validation_history);
      if (v < best) {
        best = v;
        bad = 0;
        res.best_step = info.step;
        if (rs.early_stop) {
          best_params = ckpt.params;
          best_opt = opt;
        }
      } else {
        ++bad;
      }
    }
    ckpt.step = info.step;
    if (on_step) on_step(info);
    if (rs.early_stop && bad >= tc.early_stop_patience) {
      res.stopped_early = true;
      break;
    }
  }

  if (rs.early_stop && best_params) {
    ckpt.params = std::move(*best_params);
    opt = std::move(*best_opt);
  } else {
    res.best_step = ckpt.step;
  }
  ckpt.optimizer = std::move(opt);
  res.checkpoint = std::move(ckpt);
  return res;
}

// Starts the frame projection at the per-bin mean of the targets, so early
// steps fit shape rather than the large constant offset of log-mel values.
void init_output_bias(ParamStore& params, const ModelConfig& cfg, const std::vector<Example>& examples) {
  std::vector<double> mean(cfg.mel_bins, 0.0);
  std::size_t rows = 0;
  for (const auto& ex : examples) {
    for (std::size_t t = 0; t < ex.mel.rows; ++t)
      for (std::size_t b = 0; b < cfg.mel_bins; ++b) mean[b] += ex.mel(t, b);
    rows += ex.mel.rows;
  }
  if (rows == 0) return;
  auto& bias = params.at("decoder.proj.bias").value;
  for (std::size_t i = 0; i < bias.size(); ++i)
    bias[i] = static_cast<Real>(mean[i % cfg.mel_bins] / static_cast<double>(rows));
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error(ErrorKind::Config, std::string("train.") + name + " must be > 0");
  };
  positive(batch_size, "batch_size");
  positive(lr_halve_patience, "lr_halve_patience");
  positive(pretrain_steps, "pretrain_steps");
  positive(finetune_max_steps, "finetune_max_steps");
  positive(early_stop_patience, "early_stop_patience");
  positive(validate_every, "validate_every");
  if (!(lr_initial > 0)) throw Error(ErrorKind::Config, "train.lr_initial must be > 0");
  if (!(lr_floor > 0 && lr_floor <= lr_initial))
    throw Error(ErrorKind::Config, "train.lr_floor must be in (0, lr_initial]");
  if (!(validation_fraction >= 0 && validation_fraction < 1))
    throw Error(ErrorKind::Config, "train.validation_fraction must be in [0, 1)");
  if (!(clip_norm > 0)) throw Error(ErrorKind::Config, "train.clip_norm must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"lr_initial", lr_initial},
          {"lr_floor", lr_floor},
          {"lr_halve_patience", lr_halve_patience},
          {"pretrain_steps", pretrain_steps},
          {"finetune_max_steps", finetune_max_steps},
          {"early_stop_patience", early_stop_patience},
          {"validate_every", validate_every},
          {"validation_fraction", validation_fraction},
          {"clip_norm", clip_norm},
          {"seed", seed},
          {"freeze_patterns", freeze_patterns}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  TrainConfig c;
  reject_unknown(j, c.to_json(), where);
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_initial = j.value("lr_initial", c.lr_initial);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.lr_halve_patience = j.value("lr_halve_patience", c.lr_halve_patience);
    c.pretrain_steps = j.value("pretrain_steps", c.pretrain_steps);
    c.finetune_max_steps = j.value("finetune_max_steps", c.finetune_max_steps);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.validate_every = j.value("validate_every", c.validate_every);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    c.freeze_patterns = j.value("freeze_patterns", c.freeze_patterns);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, where + ": " + e.what());
  }
  return c;
}

Tensor tts_loss(const Tensor& mel, const Tensor& mel_post, const Tensor& gates, const Tensor& target,
                const Tensor& gate_targets) {
  return num::add(num::add(num::mse(mel, target), num::mse(mel_post, target)),
                  num::bce_with_logits(gates, gate_targets));
}

Tensor tts_loss(const model::ForwardResult& f) {
  return tts_loss(f.mel, f.mel_post, f.gates, f.target, f.gate_targets);
}

void adam_step(ParamStore& params, const GradientMap& grads, OptimizerState& state, double lr) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) throw Error(ErrorKind::State, "adam_step: gradient for unknown parameter '" + name + "'");
    auto& value = pit->second.value;
    if (g.values.size() != value.size())
      throw Error(ErrorKind::Shape, "adam_step: gradient for '" + name + "' has " + std::to_string(g.values.size()) +
                                        " values, parameter has " + std::to_string(value.size()));
    auto& mom = state.moments[name];
    if (mom.m.empty()) {
      mom.m.assign(value.size(), Real(0));
      mom.v.assign(value.size(), Real(0));
    }
    auto update = [&](std::size_t i) {
      const double gi = g.values[i];
      const double m = state.beta1 * mom.m[i] + (1.0 - state.beta1) * gi;
      const double v = state.beta2 * mom.v[i] + (1.0 - state.beta2) * gi * gi;
      mom.m[i] = static_cast<Real>(m);
      mom.v[i] = static_cast<Real>(v);
      value[i] = static_cast<Real>(value[i] - lr * (m / c1) / (std::sqrt(v / c2) + state.eps));
    };
    if (g.rows) {
      const auto& shape = pit->second.shape;
      const std::size_t width = shape.size() == 2 ? shape[1] : 1;
      for (std::size_t r : *g.rows)
        for (std::size_t i = r * width; i < (r + 1) * width; ++i) update(i);
    } else {
      for (std::size_t i = 0; i < value.size(); ++i) update(i);
    }
  }
}

double clip_global_norm(GradientMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (Real v : g.values) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads)
      for (Real& v : g.values) v = static_cast<Real>(v * s);
  }
  return norm;
}

double lr_at(const TrainConfig& cfg, const std::vector<double>& history) {
  double lr = cfg.lr_initial;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (double v : history) {
    if (v < best) {
      best = v;
      stale = 0;
      continue;
    }
    if (++stale >= cfg.lr_halve_patience) {
      lr = std::max(lr / 2.0, cfg.lr_floor);
      stale = 0;
    }
  }
  return lr;
}

std::vector<Example> load_examples(const datasel::Manifest& m, const text::SymbolInventory& inv,
                                   const std::map<std::string, std::size_t>& speakers,
                                   const audio::StftConfig& stft) {
  std::vector<const datasel::Record*> recs;
  for (const auto& r : m.records) {
    if (r.kept == false) continue;
    if (!speakers.count(r.speaker)) {
      std::string known;
      for (const auto& [name, row] : speakers) known += (known.empty() ? "" : ", ") + name;
      throw Error(ErrorKind::Data, "record '" + r.id + "': unknown speaker '" + r.speaker + "' (known: " + known + ")");
    }
    recs.push_back(&r);
  }
  std::vector<Example> out(recs.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    const auto& r = *recs[i];
    try {
      Example ex;
      ex.id = r.id;
      ex.seq = text::tokenize(r.text, inv);
      ex.mask = text::derive_language_mask(r.text, ex.seq, r.lang_spans);
      ex.speaker = speakers.at(r.speaker);
      ex.mel = audio::wav_to_mel(audio::wav_read(datasel::resolve_audio(m, r), stft.sample_rate), stft).frames;
      out[i] = std::move(ex);
    } catch (const Error& e) {
      throw Error(e.kind(), "record '" + r.id + "': " + e.what());
    }
  });
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(const std::vector<Example>& ex,
                                                                               double fraction) {
  const std::size_t n = ex.size();
  std::size_t n_val = 0;
  if (n >= 2 && fraction > 0)
    n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)), 1, n - 1);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ha = fnv1a(ex[a].id), hb = fnv1a(ex[b].id);
    return ha != hb ? ha < hb : ex[a].id < ex[b].id;
  });
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

double example_loss(const ParamStore& params, const ModelConfig& cfg, const Example& ex, double pad_value) {
  model::Binder p(params, nullptr);
  const auto f = model::forward_teacher_forced(p, cfg, ex.seq, ex.mask, ex.speaker, ex.mel, pad_value);
  return static_cast<double>(tts_loss(f).item());
}

double batch_gradient(const ParamStore& params, const ModelConfig& cfg, const std::vector<const Example*>& batch,
                      double pad_value, const std::vector<std::string>& frozen, GradientMap& grads) {
  grads.clear();
  if (batch.empty()) throw Error(ErrorKind::Data, "empty batch");
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, kernels::max_threads()));
  double total = 0.0;
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    const std::size_t count = std::min(chunk, batch.size() - start);
    std::vector<GradientMap> local(count);
    std::vector<double> losses(count);
    parallel_for(count, [&](std::size_t i) {
      const Example& ex = *batch[start + i];
      num::Tape tape;
      model::Binder p(params, &tape, frozen);
      const auto f = model::forward_teacher_forced(p, cfg, ex.seq, ex.mask, ex.speaker, ex.mel, pad_value);
      const Tensor loss = tts_loss(f);
      losses[i] = static_cast<double>(loss.item());
      tape.backward(loss);
      for (const auto& [name, t] : p.bound()) {
        if (!t.requires_grad() || t.grad().empty()) continue;
        Gradient g{t.grad(), std::nullopt};
        if (is_table(name)) g.rows = t.node()->touched_rows;
        local[i].emplace(name, std::move(g));
      }
    });
    for (std::size_t i = 0; i < count; ++i) {
      total += losses[i];
      accumulate(grads, std::move(local[i]));
    }
  }
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  for (auto& [name, g] : grads)
    for (Real& v : g.values) v *= inv;
  return total / static_cast<double>(batch.size());
}

TrainResult pretrain(const PretrainInputs& in, const StepCallback& on_step) {
  in.train.validate();
  in.stft.validate();
  const datasel::Manifest kept = datasel::kept_only(in.manifest);
  if (kept.records.empty()) throw Error(ErrorKind::Data, "pretrain: manifest has no records");

  std::vector<std::string> names = in.speakers ? *in.speakers : kept.speakers();
  std::map<std::string, std::size_t> speakers;
  for (const auto& name : names)
    if (!speakers.emplace(name, speakers.size()).second)
      throw Error(ErrorKind::Config, "speaker '" + name + "' listed twice");
  for (const auto& r : kept.records)
    if (!speakers.count(r.speaker))
      throw Error(ErrorKind::Data, "record '" + r.id + "': unknown speaker '" + r.speaker + "'");

  ModelConfig cfg = in.model;
  if (cfg.num_speakers != 0 && cfg.num_speakers != speakers.size())
    throw Error(ErrorKind::Config, "speaker count mismatch: config says " + std::to_string(cfg.num_speakers) +
                                       ", manifest has " + std::to_string(speakers.size()));
  if (cfg.num_symbols != 0 && cfg.num_symbols != in.inventory.size())
    throw Error(ErrorKind::Config, "symbol count mismatch: config says " + std::to_string(cfg.num_symbols) +
                                       ", inventory has " + std::to_string(in.inventory.size()));
  if (cfg.mel_bins != in.stft.mel_bins)
    throw Error(ErrorKind::Config, "model.mel_bins (" + std::to_string(cfg.mel_bins) + ") != audio.mel_bins (" +
                                       std::to_string(in.stft.mel_bins) + ")");
  cfg.num_speakers = speakers.size();
  cfg.num_symbols = in.inventory.size();
  cfg.validate();

  RunState rs;
  rs.examples = load_examples(kept, in.inventory, speakers, in.stft);
  rs.ckpt.model = cfg;
  rs.ckpt.stft = in.stft;
  rs.ckpt.inventory = in.inventory;
  rs.ckpt.speakers = speakers;
  rs.ckpt.params = model::init_params(cfg, in.train.seed);
  init_output_bias(rs.ckpt.params, cfg, rs.examples);
  rs.max_steps = in.train.pretrain_steps;
  rs.early_stop = false;
  return run(std::move(rs), in.train, on_step);
}

TrainResult finetune(const Checkpoint& base, const datasel::Manifest& target, const TrainConfig& train,
                     const StepCallback& on_step) {
  train.validate();
  model::check_params(base.model, base.params);
  for (const auto& pattern : train.freeze_patterns) {
    const bool hit = std::any_of(base.params.begin(), base.params.end(),
                                 [&](const auto& kv) { return kv.first.rfind(pattern, 0) == 0; });
    if (!hit) throw Error(ErrorKind::Config, "freeze pattern '" + pattern + "' matches no parameter");
  }
  const datasel::Manifest kept = datasel::kept_only(target);
  if (kept.records.empty()) throw Error(ErrorKind::Data, "finetune: manifest has no records");

  RunState rs;
  rs.examples = load_examples(kept, base.inventory, base.speakers, base.stft);
  rs.ckpt = base;
  rs.ckpt.optimizer.reset();
  rs.ckpt.step = 0;
  rs.frozen = train.freeze_patterns;
  rs.max_steps = train.finetune_max_steps;
  rs.early_stop = true;
  return run(std::move(rs), train, on_step);
}

}  // namespace xtts::train::inline XTTS_PRECISION
