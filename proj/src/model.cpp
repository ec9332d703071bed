#include "xtts/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xtts/error.hpp"

namespace xtts::model::inline XTTS_PRECISION {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Uniform in [-limit, limit] from raw 64-bit draws; independent of the
// standard library's distribution implementations.
std::vector<Real> uniform(std::size_t n, double limit, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Real> v(n);
  for (auto& x : v) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    x = static_cast<Real>((2.0 * u - 1.0) * limit);
  }
  return v;
}

void add_gru(std::map<std::string, Shape>& s, const std::string& prefix, std::size_t in, std::size_t hidden) {
  s[prefix + ".wx"] = {in, 3 * hidden};
  s[prefix + ".wh"] = {hidden, 3 * hidden};
  s[prefix + ".bx"] = {3 * hidden};
  s[prefix + ".bh"] = {3 * hidden};
}

void add_encoder(std::map<std::string, Shape>& s, const ModelConfig& cfg, const std::string& prefix) {
  const std::size_t e = cfg.symbol_embed_dim;
  s[prefix + ".embedding"] = {cfg.num_symbols, e};
  for (std::size_t i = 0; i < cfg.encoder_conv_layers; ++i) {
    s[prefix + ".conv" + std::to_string(i) + ".weight"] = {cfg.encoder_kernel, e, e};
    s[prefix + ".conv" + std::to_string(i) + ".bias"] = {e};
  }
  add_gru(s, prefix + ".gru_fwd", e, cfg.encoder_hidden);
  add_gru(s, prefix + ".gru_bwd", e, cfg.encoder_hidden);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw Error(ErrorKind::Config, "unknown config key '" + where + "." + it.key() + "'");
}

audio::Matrix to_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  audio::Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(t[i]);
  return m;
}

Tensor frames_tensor(const audio::Matrix& m) {
  std::vector<Real> v(m.data.begin(), m.data.end());
  return Tensor::constant({m.rows, m.cols}, std::move(v));
}

}  // namespace

const char* to_string(EncoderKind kind) { return kind == EncoderKind::Shared ? "shared" : "spe"; }

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "shared") return EncoderKind::Shared;
  if (name == "spe") return EncoderKind::SPE;
  throw Error(ErrorKind::Config, "unknown encoder_kind '" + std::string(name) + "' (expected shared or spe)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error(ErrorKind::Config, std::string("model.") + name + " must be > 0");
  };
  positive(num_symbols, "num_symbols");
  positive(symbol_embed_dim, "symbol_embed_dim");
  positive(encoder_hidden, "encoder_hidden");
  positive(encoder_kernel, "encoder_kernel");
  positive(speaker_embed_dim, "speaker_embed_dim");
  positive(num_speakers, "num_speakers");
  positive(attention_mixtures, "attention_mixtures");
  positive(attention_rnn_dim, "attention_rnn_dim");
  positive(decoder_rnn_dim, "decoder_rnn_dim");
  positive(mel_bins, "mel_bins");
  positive(reduction_factor, "reduction_factor");
  positive(postnet_layers, "postnet_layers");
  positive(postnet_kernel, "postnet_kernel");
  positive(postnet_channels, "postnet_channels");
  positive(max_decoder_steps, "max_decoder_steps");
  if (encoder_kernel % 2 == 0 || postnet_kernel % 2 == 0)
    throw Error(ErrorKind::Config, "model: convolution kernels must be odd");
  if (!(sigma_min > 0)) throw Error(ErrorKind::Config, "model.sigma_min must be > 0");
  if (!(gate_threshold > 0 && gate_threshold < 1)) throw Error(ErrorKind::Config, "model.gate_threshold must be in (0,1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder_kind", to_string(encoder_kind)},
          {"num_symbols", num_symbols},
          {"symbol_embed_dim", symbol_embed_dim},
          {"encoder_hidden", encoder_hidden},
          {"encoder_conv_layers", encoder_conv_layers},
          {"encoder_kernel", encoder_kernel},
          {"speaker_embed_dim", speaker_embed_dim},
          {"num_speakers", num_speakers},
          {"attention_mixtures", attention_mixtures},
          {"attention_rnn_dim", attention_rnn_dim},
          {"decoder_rnn_dim", decoder_rnn_dim},
          {"mel_bins", mel_bins},
          {"reduction_factor", reduction_factor},
          {"postnet_layers", postnet_layers},
          {"postnet_kernel", postnet_kernel},
          {"postnet_channels", postnet_channels},
          {"max_decoder_steps", max_decoder_steps},
          {"sigma_min", sigma_min},
          {"gate_threshold", gate_threshold}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  ModelConfig c;
  std::vector<std::string> known;
  const nlohmann::json defaults = c.to_json();
  for (auto it = defaults.begin(); it != defaults.end(); ++it) known.push_back(it.key());
  reject_unknown(j, known, where);
  try {
    if (j.contains("encoder_kind")) c.encoder_kind = parse_encoder_kind(j.at("encoder_kind").get<std::string>());
    c.num_symbols = j.value("num_symbols", c.num_symbols);
    c.symbol_embed_dim = j.value("symbol_embed_dim", c.symbol_embed_dim);
    c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
    c.encoder_conv_layers = j.value("encoder_conv_layers", c.encoder_conv_layers);
    c.encoder_kernel = j.value("encoder_kernel", c.encoder_kernel);
    c.speaker_embed_dim = j.value("speaker_embed_dim", c.speaker_embed_dim);
    c.num_speakers = j.value("num_speakers", c.num_speakers);
    c.attention_mixtures = j.value("attention_mixtures", c.attention_mixtures);
    c.attention_rnn_dim = j.value("attention_rnn_dim", c.attention_rnn_dim);
    c.decoder_rnn_dim = j.value("decoder_rnn_dim", c.decoder_rnn_dim);
    c.mel_bins = j.value("mel_bins", c.mel_bins);
    c.reduction_factor = j.value("reduction_factor", c.reduction_factor);
    c.postnet_layers = j.value("postnet_layers", c.postnet_layers);
    c.postnet_kernel = j.value("postnet_kernel", c.postnet_kernel);
    c.postnet_channels = j.value("postnet_channels", c.postnet_channels);
    c.max_decoder_steps = j.value("max_decoder_steps", c.max_decoder_steps);
    c.sigma_min = j.value("sigma_min", c.sigma_min);
    c.gate_threshold = j.value("gate_threshold", c.gate_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, where + ": " + e.what());
  }
  return c;
}

std::vector<std::string> encoder_prefixes(const ModelConfig& cfg) {
  if (cfg.encoder_kind == EncoderKind::Shared) return {"encoder"};
  return {"encoder_cn", "encoder_en"};
}

std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::map<std::string, Shape> s;
  for (const auto& prefix : encoder_prefixes(cfg)) add_encoder(s, cfg, prefix);
  s["speaker.embedding"] = {cfg.num_speakers, cfg.speaker_embed_dim};
  const std::size_t ctx = cfg.context_dim();
  add_gru(s, "attention.rnn", cfg.frame_dim() + ctx, cfg.attention_rnn_dim);
  s["attention.head.weight"] = {cfg.attention_rnn_dim, 3 * cfg.attention_mixtures};
  s["attention.head.bias"] = {3 * cfg.attention_mixtures};
  add_gru(s, "decoder.rnn", ctx + cfg.attention_rnn_dim, cfg.decoder_rnn_dim);
  const std::size_t proj_in = cfg.decoder_rnn_dim + ctx;
  s["decoder.proj.weight"] = {proj_in, cfg.frame_dim()};
  s["decoder.proj.bias"] = {cfg.frame_dim()};
  s["decoder.gate.weight"] = {proj_in, 1};
  s["decoder.gate.bias"] = {1};
  for (std::size_t i = 0; i < cfg.postnet_layers; ++i) {
    const std::size_t in = i == 0 ? cfg.mel_bins : cfg.postnet_channels;
    const std::size_t out = i + 1 == cfg.postnet_layers ? cfg.mel_bins : cfg.postnet_channels;
    s["postnet.conv" + std::to_string(i) + ".weight"] = {cfg.postnet_kernel, in, out};
    s["postnet.conv" + std::to_string(i) + ".bias"] = {out};
  }
  return s;
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore store;
  const std::string last_postnet = "postnet.conv" + std::to_string(cfg.postnet_layers - 1) + ".weight";
  for (const auto& [name, shape] : parameter_shapes(cfg)) {
    const std::size_t n = num::numel(shape);
    const std::uint64_t stream = seed ^ fnv1a(name);
    Param p{shape, std::vector<Real>(n, Real(0))};
    if (ends_with(name, ".embedding")) {
      p.value = uniform(n, 0.5, stream);
    } else if (shape.size() >= 2) {
      // Xavier-uniform; conv kernels count every tap toward fan-in and fan-out.
      const std::size_t fan_out = shape.back();
      const std::size_t fan_in = n / fan_out;
      const std::size_t taps = shape.size() == 3 ? shape[0] : 1;
      double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out * taps));
      if (name == last_postnet || name == "decoder.gate.weight") limit *= 0.1;
      p.value = uniform(n, limit, stream);
    } else if (name == "attention.head.bias") {
      // sigma starts near 1.4 positions; weights and increments start neutral.
      const std::size_t k = cfg.attention_mixtures;
      for (std::size_t i = 0; i < k; ++i) p.value[2 * k + i] = Real(1);
    } else if (name == "decoder.gate.bias") {
      p.value[0] = Real(-5);
    }
    store.emplace(name, std::move(p));
  }
  return store;
}

void check_params(const ModelConfig& cfg, const ParamStore& params) {
  const auto shapes = parameter_shapes(cfg);
  for (const auto& [name, p] : params) {
    auto it = shapes.find(name);
    if (it == shapes.end()) throw Error(ErrorKind::Config, "unknown parameter name '" + name + "'");
    if (it->second != p.shape)
      throw Error(ErrorKind::Config, "parameter '" + name + "' has shape " + num::shape_str(p.shape) +
                                         ", config implies " + num::shape_str(it->second));
    if (p.value.size() != num::numel(p.shape))
      throw Error(ErrorKind::Config, "parameter '" + name + "' value count does not match its shape");
  }
  for (const auto& [name, shape] : shapes)
    if (!params.count(name)) throw Error(ErrorKind::Config, "missing parameter '" + name + "'");
}

Binder::Binder(const ParamStore& params, Tape* tape, std::vector<std::string> frozen_prefixes)
    : params_(params), tape_(tape), frozen_(std::move(frozen_prefixes)) {}

const Tensor& Binder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto pit = params_.find(name);
  if (pit == params_.end()) throw Error(ErrorKind::Config, "model has no parameter '" + name + "'");
  const bool frozen = std::any_of(frozen_.begin(), frozen_.end(),
                                  [&](const std::string& prefix) { return name.rfind(prefix, 0) == 0; });
  Tensor t = (tape_ && !frozen) ? tape_->variable(pit->second.shape, pit->second.value)
                                : Tensor::constant(pit->second.shape, pit->second.value);
  return bound_.emplace(name, std::move(t)).first->second;
}

num::GruWeights Binder::gru(const std::string& prefix) {
  return {(*this)(prefix + ".wx"), (*this)(prefix + ".wh"), (*this)(prefix + ".bx"), (*this)(prefix + ".bh")};
}

Tensor encode_with(Binder& p, const ModelConfig& cfg, const std::string& prefix, const text::SymbolSequence& seq) {
  if (seq.ids.empty()) throw Error(ErrorKind::Data, "encode: empty symbol sequence");
  for (std::size_t id : seq.ids)
    if (id >= cfg.num_symbols)
      throw Error(ErrorKind::Data, "encode: symbol id " + std::to_string(id) + " out of range for " +
                                       std::to_string(cfg.num_symbols) + " symbols");
  Tensor x = num::embedding_lookup(p(prefix + ".embedding"), seq.ids);
  for (std::size_t i = 0; i < cfg.encoder_conv_layers; ++i) {
    const std::string layer = prefix + ".conv" + std::to_string(i);
    x = num::tanh(num::conv1d(x, p(layer + ".weight"), p(layer + ".bias")));
  }
  const std::size_t steps = x.dim(0);
  const auto fwd = p.gru(prefix + ".gru_fwd");
  const auto bwd = p.gru(prefix + ".gru_bwd");
  std::vector<Tensor> forward_states(steps), backward_states(steps);
  Tensor h = Tensor::zeros({cfg.encoder_hidden});
  for (std::size_t t = 0; t < steps; ++t) forward_states[t] = h = num::gru_cell(num::row(x, t), h, fwd);
  h = Tensor::zeros({cfg.encoder_hidden});
  for (std::size_t t = steps; t-- > 0;) backward_states[t] = h = num::gru_cell(num::row(x, t), h, bwd);
  std::vector<Tensor> rows(steps);
  for (std::size_t t = 0; t < steps; ++t) rows[t] = num::concat({forward_states[t], backward_states[t]}, 0);
  return num::stack(rows);
}

Tensor encode_shared(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq) {
  return encode_with(p, cfg, "encoder", seq);
}

Tensor encode_spe(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq, const text::LanguageMask& mask) {
  if (mask.size() != seq.length())
    throw Error(ErrorKind::Shape, "encode_spe: mask length " + std::to_string(mask.size()) +
                                      " != sequence length " + std::to_string(seq.length()));
  const Tensor cn = encode_with(p, cfg, "encoder_cn", seq);
  const Tensor en = encode_with(p, cfg, "encoder_en", seq);
  const std::size_t steps = seq.length(), width = cfg.encoder_dim();
  std::vector<Real> mask_cn(steps * width), mask_en(steps * width);
  for (std::size_t t = 0; t < steps; ++t) {
    const bool is_cn = mask.langs[t] == text::Lang::CN;
    std::fill_n(mask_cn.begin() + static_cast<std::ptrdiff_t>(t * width), width, is_cn ? Real(1) : Real(0));
    std::fill_n(mask_en.begin() + static_cast<std::ptrdiff_t>(t * width), width, is_cn ? Real(0) : Real(1));
  }
  return num::add(num::mul(cn, Tensor::constant({steps, width}, std::move(mask_cn))),
                  num::mul(en, Tensor::constant({steps, width}, std::move(mask_en))));
}

Tensor encode(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq, const text::LanguageMask& mask) {
  return cfg.encoder_kind == EncoderKind::Shared ? encode_shared(p, cfg, seq) : encode_spe(p, cfg, seq, mask);
}

EncoderOutput attach_speaker(Binder& p, const ModelConfig& cfg, const Tensor& h, std::size_t speaker_id) {
  if (speaker_id >= cfg.num_speakers)
    throw Error(ErrorKind::Data, "speaker id " + std::to_string(speaker_id) + " out of range for " +
                                     std::to_string(cfg.num_speakers) + " speakers");
  const std::size_t ids[] = {speaker_id};
  const Tensor s = num::row(num::embedding_lookup(p("speaker.embedding"), ids), 0);
  return {h, num::concat({h, num::repeat_rows(s, h.dim(0))}, 1)};
}

AttentionState initial_attention_state(const ModelConfig& cfg) {
  return {Tensor::zeros({cfg.attention_mixtures}), Tensor::zeros({cfg.attention_rnn_dim}),
          Tensor::zeros({cfg.context_dim()}), Tensor::zeros({cfg.attention_rnn_dim})};
}

DecoderState initial_decoder_state(const ModelConfig& cfg) {
  return {Tensor::zeros({cfg.decoder_rnn_dim}), Tensor::zeros({cfg.frame_dim()})};
}

AttentionStep gmm_attention_from_head(const ModelConfig& cfg, const AttentionState& state, const Tensor& h_s,
                                      const Tensor& head, const Tensor& attention_hidden) {
  const std::size_t k = cfg.attention_mixtures;
  const Tensor w_hat = num::slice(head, 0, 0, k);
  const Tensor delta = num::softplus(num::slice(head, 0, k, k));
  const Tensor sigma = num::add_scalar(num::softplus(num::slice(head, 0, 2 * k, k)), static_cast<Real>(cfg.sigma_min));
  const Tensor mu = num::add(state.mu, delta);
  const Tensor alpha = num::gmm_attention_weights(w_hat, mu, sigma, h_s.dim(0));
  const Tensor context = num::matmul(alpha, h_s);
  return {alpha, num::softmax(w_hat), delta, sigma, {mu, attention_hidden, context, attention_hidden}};
}

AttentionStep gmm_attention_step(Binder& p, const ModelConfig& cfg, const AttentionState& state, const Tensor& h_s,
                                 const Tensor& m_prev) {
  const Tensor input = num::concat({m_prev, state.context}, 0);
  const Tensor hidden = num::gru_cell(input, state.hidden, p.gru("attention.rnn"));
  const Tensor head = num::add(num::matmul(hidden, p("attention.head.weight")), p("attention.head.bias"));
  return gmm_attention_from_head(cfg, state, h_s, head, hidden);
}

DecoderStep decoder_step(Binder& p, const ModelConfig& cfg, const DecoderState& state, const Tensor& context,
                         const Tensor& attention_out) {
  (void)cfg;
  const Tensor input = num::concat({context, attention_out}, 0);
  const Tensor hidden = num::gru_cell(input, state.hidden, p.gru("decoder.rnn"));
  const Tensor proj_in = num::concat({hidden, context}, 0);
  const Tensor frames = num::add(num::matmul(proj_in, p("decoder.proj.weight")), p("decoder.proj.bias"));
  const Tensor gate = num::add(num::matmul(proj_in, p("decoder.gate.weight")), p("decoder.gate.bias"));
  return {frames, gate, {hidden, frames}};
}

Tensor postnet(Binder& p, const ModelConfig& cfg, const Tensor& mel) {
  if (mel.rank() != 2 || mel.dim(1) != cfg.mel_bins)
    throw Error(ErrorKind::Shape, "postnet: expected [T," + std::to_string(cfg.mel_bins) + "], got " +
                                      num::shape_str(mel.shape()));
  Tensor x = mel;
  for (std::size_t i = 0; i < cfg.postnet_layers; ++i) {
    const std::string layer = "postnet.conv" + std::to_string(i);
    x = num::conv1d(x, p(layer + ".weight"), p(layer + ".bias"));
    if (i + 1 < cfg.postnet_layers) x = num::tanh(x);
  }
  return num::add(mel, x);
}

audio::Matrix pad_frames(const audio::Matrix& mel, std::size_t r, double pad_value) {
  const std::size_t rows = (mel.rows + r - 1) / r * r;
  audio::Matrix out(rows, mel.cols, pad_value);
  std::copy(mel.data.begin(), mel.data.end(), out.data.begin());
  return out;
}

ForwardResult forward_teacher_forced(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq,
                                     const text::LanguageMask& mask, std::size_t speaker_id,
                                     const audio::Matrix& target, double pad_value) {
  if (target.cols != cfg.mel_bins)
    throw Error(ErrorKind::Shape, "target has " + std::to_string(target.cols) + " mel bins, model expects " +
                                      std::to_string(cfg.mel_bins));
  if (target.rows == 0) throw Error(ErrorKind::Shape, "target has no frames");
  const std::size_t r = cfg.reduction_factor;
  const audio::Matrix padded = pad_frames(target, r, pad_value);
  const std::size_t steps = padded.rows / r;
  const Tensor target_t = frames_tensor(padded);

  const EncoderOutput enc = attach_speaker(p, cfg, encode(p, cfg, seq, mask), speaker_id);
  AttentionState att = initial_attention_state(cfg);
  DecoderState dec = initial_decoder_state(cfg);

  ForwardResult res;
  res.alignment = audio::Matrix(steps, seq.length());
  std::vector<Tensor> frames(steps), gates(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    // Teacher forcing: the previous ground-truth group replaces the model's own output.
    const Tensor m_prev = t == 0 ? Tensor::zeros({cfg.frame_dim()})
                                 : num::reshape(num::slice(target_t, 0, (t - 1) * r, r), {cfg.frame_dim()});
    AttentionStep a = gmm_attention_step(p, cfg, att, enc.h_s, m_prev);
    DecoderStep d = decoder_step(p, cfg, dec, a.state.context, a.state.output);
    for (std::size_t j = 0; j < seq.length(); ++j) res.alignment(t, j) = static_cast<double>(a.weights[j]);
    res.mu.emplace_back(a.state.mu.values().begin(), a.state.mu.values().end());
    frames[t] = d.frames;
    gates[t] = d.gate;
    att = std::move(a.state);
    dec = std::move(d.state);
  }
  res.mel = num::reshape(num::stack(frames), {padded.rows, cfg.mel_bins});
  res.mel_post = postnet(p, cfg, res.mel);
  res.gates = num::reshape(num::concat(std::span<const Tensor>(gates), 0), {steps});
  res.target = target_t;
  std::vector<Real> gt(steps, Real(0));
  gt.back() = Real(1);
  res.gate_targets = Tensor::constant({steps}, std::move(gt));
  return res;
}

SynthesisResult synthesize(const ParamStore& params, const ModelConfig& cfg, const text::SymbolSequence& seq,
                           const text::LanguageMask& mask, std::size_t speaker_id) {
  Binder p(params, nullptr);
  const EncoderOutput enc = attach_speaker(p, cfg, encode(p, cfg, seq, mask), speaker_id);
  AttentionState att = initial_attention_state(cfg);
  DecoderState dec = initial_decoder_state(cfg);
  std::vector<Tensor> frames;
  std::vector<std::vector<double>> rows;
  SynthesisResult res;
  res.truncated = true;
  Tensor m_prev = Tensor::zeros({cfg.frame_dim()});
  while (frames.size() < cfg.max_decoder_steps) {
    AttentionStep a = gmm_attention_step(p, cfg, att, enc.h_s, m_prev);
    DecoderStep d = decoder_step(p, cfg, dec, a.state.context, a.state.output);
    rows.emplace_back(a.weights.values().begin(), a.weights.values().end());
    frames.push_back(d.frames);
    m_prev = d.frames;
    att = std::move(a.state);
    dec = std::move(d.state);
    const double gate = 1.0 / (1.0 + std::exp(-static_cast<double>(d.gate[0])));
    if (gate > cfg.gate_threshold) {
      res.truncated = false;
      break;
    }
  }
  res.stopped_at = frames.size();
  const std::size_t out_frames = frames.size() * cfg.reduction_factor;
  const Tensor mel = num::reshape(num::stack(frames), {out_frames, cfg.mel_bins});
  const Tensor post = postnet(p, cfg, mel);
  res.mel_pre = to_matrix(mel, out_frames, cfg.mel_bins);
  res.mel = to_matrix(post, out_frames, cfg.mel_bins);
  res.alignment = audio::Matrix(rows.size(), seq.length());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < seq.length(); ++j) res.alignment(t, j) = rows[t][j];
  return res;
}

}  // namespace xtts::model::inline XTTS_PRECISION
