// encode_spe row j must be bit-identical to row j of the mono encoder the mask selects.

#include <random>
#include <sstream>

#include "acceptance/acceptance.hpp"
#include "xtts/model.hpp"

namespace xtts::acceptance {

Outcome splice_equivalence() {
  using namespace xtts::model;
  std::mt19937_64 gen(20240101);
  std::size_t mismatches = 0, rows = 0, mixed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig cfg;
    cfg.encoder_kind = EncoderKind::SPE;
    cfg.num_symbols = 24;
    cfg.num_speakers = 2;
    cfg.symbol_embed_dim = 16;
    cfg.encoder_hidden = 16;
    cfg.speaker_embed_dim = 4;
    cfg.attention_rnn_dim = 8;
    cfg.decoder_rnn_dim = 8;
    cfg.mel_bins = 8;
    cfg.postnet_channels = 8;
    // A fresh parameter draw every ten pairs.
    static ParamStore params;
    if (trial % 10 == 0) params = init_params(cfg, gen());
    Binder p(params, nullptr);

    const std::size_t len = 1 + gen() % 30;
    text::SymbolSequence seq;
    text::LanguageMask mask;
    for (std::size_t i = 0; i < len; ++i) {
      seq.ids.push_back(2 + gen() % (cfg.num_symbols - 2));
      seq.offsets.push_back(i);
    }
    seq.ids.push_back(text::SymbolInventory::kEos);
    // Runs of random length so masks switch language mid-sequence.
    text::Lang lang = gen() % 2 ? text::Lang::CN : text::Lang::EN;
    while (mask.langs.size() < seq.ids.size()) {
      const std::size_t run = 1 + gen() % 5;
      for (std::size_t k = 0; k < run && mask.langs.size() < seq.ids.size(); ++k) mask.langs.push_back(lang);
      lang = lang == text::Lang::CN ? text::Lang::EN : text::Lang::CN;
    }
    bool has_cn = false, has_en = false;
    for (auto l : mask.langs) (l == text::Lang::CN ? has_cn : has_en) = true;
    mixed += has_cn && has_en;

    const auto cn = encode_with(p, cfg, "encoder_cn", seq);
    const auto en = encode_with(p, cfg, "encoder_en", seq);
    const auto h = encode_spe(p, cfg, seq, mask);
    const std::size_t d = cfg.encoder_dim();
    for (std::size_t j = 0; j < seq.ids.size(); ++j) {
      const auto& src = mask.langs[j] == text::Lang::CN ? cn : en;
      ++rows;
      for (std::size_t c = 0; c < d; ++c)
        if (h[j * d + c] != src[j * d + c]) {
          ++mismatches;
          break;
        }
    }
  }
  std::ostringstream os;
  os << "100 pairs (" << mixed << " mixed-language), " << rows << " rows, " << mismatches << " mismatched rows";
  return {mismatches == 0 && mixed > 50, os.str()};
}

}  // namespace xtts::acceptance
