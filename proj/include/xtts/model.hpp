#pragma once

// Tacotron-style acoustic model: encoder (shared, or two language encoders
// merged by a language mask), speaker concatenation, GMM attention, GRU
// decoder emitting r frames per step plus a stop gate, residual postnet.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtts/audio.hpp"
#include "xtts/ops.hpp"
#include "xtts/text.hpp"

namespace xtts::model::inline XTTS_PRECISION {

using num::Shape;
using num::Tape;
using num::Tensor;

enum class EncoderKind { Shared, SPE };

const char* to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

struct ModelConfig {
  EncoderKind encoder_kind = EncoderKind::Shared;
  std::size_t num_symbols = 0;  // taken from the inventory
  std::size_t symbol_embed_dim = 128;
  std::size_t encoder_hidden = 128;  // per direction; encoder output is 2x
  std::size_t encoder_conv_layers = 2;
  std::size_t encoder_kernel = 5;
  std::size_t speaker_embed_dim = 32;
  std::size_t num_speakers = 0;  // taken from the speaker map
  std::size_t attention_mixtures = 5;
  std::size_t attention_rnn_dim = 256;
  std::size_t decoder_rnn_dim = 256;
  std::size_t mel_bins = 80;
  std::size_t reduction_factor = 2;
  std::size_t postnet_layers = 3;
  std::size_t postnet_kernel = 5;
  std::size_t postnet_channels = 128;
  std::size_t max_decoder_steps = 2000;
  double sigma_min = 0.1;
  double gate_threshold = 0.5;

  std::size_t encoder_dim() const { return 2 * encoder_hidden; }
  std::size_t context_dim() const { return encoder_dim() + speaker_embed_dim; }
  std::size_t frame_dim() const { return mel_bins * reduction_factor; }

  void validate() const;  // throws Error(Config)
  nlohmann::json to_json() const;
  // Missing keys keep defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j, const std::string& where = "model");

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Param {
  Shape shape;
  std::vector<Real> value;

  friend bool operator==(const Param&, const Param&) = default;
};

// Name-sorted.
using ParamStore = std::map<std::string, Param>;

// Every learnable tensor the config implies, by name.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg);

// Seeded, and each tensor draws from its own stream keyed by name.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Names of the encoder parameter prefixes for the configured front end.
std::vector<std::string> encoder_prefixes(const ModelConfig& cfg);

// Exposes stored parameters as tensors. With a tape, trainable parameters
// become gradient leaves; frozen ones (prefix match) and everything without a
// tape become constants. Binding is lazy, so unused parameters never enter a tape.
class Binder {
 public:
  Binder(const ParamStore& params, Tape* tape, std::vector<std::string> frozen_prefixes = {});

  const Tensor& operator()(const std::string& name);
  num::GruWeights gru(const std::string& prefix);
  const std::map<std::string, Tensor>& bound() const { return bound_; }

 private:
  const ParamStore& params_;
  Tape* tape_;
  std::vector<std::string> frozen_;
  std::map<std::string, Tensor> bound_;
};

struct EncoderOutput {
  Tensor h;    // [T_in, encoder_dim]
  Tensor h_s;  // [T_in, encoder_dim + speaker_embed_dim]
};

struct AttentionState {
  Tensor mu;       // [K] mixture means, in encoder positions
  Tensor hidden;   // attention RNN state [attention_rnn_dim]
  Tensor context;  // c_{t-1} [context_dim]
  Tensor output;   // o_{t-1} [attention_rnn_dim]
};

struct AttentionStep {
  Tensor weights;  // alpha over encoder positions [T_in]
  Tensor mixture;  // softmax-normalized component weights [K]
  Tensor delta;    // mean increments [K]
  Tensor sigma;    // widths [K]
  AttentionState state;
};

struct DecoderState {
  Tensor hidden;      // [decoder_rnn_dim]
  Tensor prev_frame;  // m_{t-1} [mel_bins * r]; zeros is the <GO> frame
};

struct DecoderStep {
  Tensor frames;  // [mel_bins * r]
  Tensor gate;    // [1] stop logit
  DecoderState state;
};

// Embedding -> conv stack (tanh) -> bidirectional GRU, under `prefix`.
Tensor encode_with(Binder& p, const ModelConfig& cfg, const std::string& prefix, const text::SymbolSequence& seq);
Tensor encode_shared(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq);
// Both language encoders read the full sequence; rows are then selected by the mask.
Tensor encode_spe(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq, const text::LanguageMask& mask);
Tensor encode(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq, const text::LanguageMask& mask);

EncoderOutput attach_speaker(Binder& p, const ModelConfig& cfg, const Tensor& h, std::size_t speaker_id);

AttentionState initial_attention_state(const ModelConfig& cfg);
DecoderState initial_decoder_state(const ModelConfig& cfg);

// Attention RNN over [m_prev; c_{t-1}], then a linear head yielding
// (w_hat, delta_hat, sigma_hat); mu_t = mu_{t-1} + softplus(delta_hat).
AttentionStep gmm_attention_step(Binder& p, const ModelConfig& cfg, const AttentionState& state,
                                 const Tensor& h_s, const Tensor& m_prev);
// Same step with the head output supplied directly ([3K]), bypassing the RNN.
AttentionStep gmm_attention_from_head(const ModelConfig& cfg, const AttentionState& state, const Tensor& h_s,
                                      const Tensor& head, const Tensor& attention_hidden);

DecoderStep decoder_step(Binder& p, const ModelConfig& cfg, const DecoderState& state, const Tensor& context,
                         const Tensor& attention_out);

// x_hat = m + conv stack(m).
Tensor postnet(Binder& p, const ModelConfig& cfg, const Tensor& mel);

// Pads the frame count up to a multiple of r with `pad_value`.
audio::Matrix pad_frames(const audio::Matrix& mel, std::size_t r, double pad_value);

struct ForwardResult {
  Tensor mel;           // [T_pad, mel_bins] before postnet
  Tensor mel_post;      // [T_pad, mel_bins]
  Tensor gates;         // [T_dec] logits
  Tensor target;        // [T_pad, mel_bins] padded target
  Tensor gate_targets;  // [T_dec], 1 at the final step only
  audio::Matrix alignment;             // [T_dec, T_in]
  std::vector<std::vector<double>> mu;  // per decoder step, [K]
};

ForwardResult forward_teacher_forced(Binder& p, const ModelConfig& cfg, const text::SymbolSequence& seq,
                                     const text::LanguageMask& mask, std::size_t speaker_id,
                                     const audio::Matrix& target, double pad_value);

struct SynthesisResult {
  audio::Matrix mel;       // after postnet, [stopped_at * r, mel_bins]
  audio::Matrix mel_pre;   // before postnet
  audio::Matrix alignment; // [stopped_at, T_in]
  std::size_t stopped_at = 0;  // decoder steps run
  bool truncated = false;      // hit max_decoder_steps without the gate firing
};

SynthesisResult synthesize(const ParamStore& params, const ModelConfig& cfg, const text::SymbolSequence& seq,
                           const text::LanguageMask& mask, std::size_t speaker_id);

// Shape check of a store against the config's registry; names must match exactly.
void check_params(const ModelConfig& cfg, const ParamStore& params);

}  // namespace xtts::model::inline XTTS_PRECISION
