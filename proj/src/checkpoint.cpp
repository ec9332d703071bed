#include <cmath>
#include <fstream>
#include <sstream>

#include "xtts/binio.hpp"
#include "xtts/error.hpp"
#include "xtts/training.hpp"

namespace xtts::train::inline XTTS_PRECISION {
namespace {

constexpr std::string_view kMagic = "XTTS";

void put_name(std::string& out, const std::string& name) {
  binio::put_u32(out, static_cast<std::uint32_t>(name.size()));
  binio::put_bytes(out, name);
}

void put_values(std::string& out, const std::vector<Real>& v) {
  for (Real x : v) binio::put_f32(out, static_cast<float>(x));
}

std::vector<Real> get_values(binio::Reader& in, std::size_t n) {
  if (in.remaining() / 4 < n) in.bytes(in.remaining() + 1);  // reports truncation
  std::vector<Real> v(n);
  for (auto& x : v) x = static_cast<Real>(in.f32());
  return v;
}

nlohmann::json header_json(const Checkpoint& c) {
  nlohmann::json history = nlohmann::json::array();
  for (double v : c.schedule.validation_history) history.push_back(v);
  return {{"model", c.model.to_json()},
          {"audio", c.stft.to_json()},
          {"inventory", c.inventory.to_json()},
          {"speakers", c.speakers},
          {"step", c.step},
          {"schedule", {{"lr", c.schedule.lr}, {"validation_history", history}}}};
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic);
  binio::put_u32(out, kCheckpointVersion);
  const std::string header = header_json(ckpt).dump();
  binio::put_u32(out, static_cast<std::uint32_t>(header.size()));
  binio::put_bytes(out, header);
  binio::put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, p] : ckpt.params) {
    put_name(out, name);
    binio::put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) binio::put_u32(out, static_cast<std::uint32_t>(d));
    put_values(out, p.value);
  }
  out.push_back(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    binio::put_u64(out, o.step);
    binio::put_u32(out, static_cast<std::uint32_t>(o.moments.size()));
    for (const auto& [name, m] : o.moments) {
      put_name(out, name);
      binio::put_u32(out, static_cast<std::uint32_t>(m.m.size()));
      put_values(out, m.m);
      put_values(out, m.v);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  binio::Reader in(bytes, "checkpoint");
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw Error(ErrorKind::Format, "checkpoint: bad magic (not an XTTS checkpoint)");
  in.bytes(kMagic.size());
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::Format, "checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                                       std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  const std::uint32_t header_len = in.u32();
  const std::string_view header = in.bytes(header_len);
  try {
    const auto j = nlohmann::json::parse(header);
    c.model = model::ModelConfig::from_json(j.at("model"), "model");
    c.stft = audio::StftConfig::from_json(j.at("audio"), "audio");
    c.inventory = text::SymbolInventory::from_json(j.at("inventory"));
    c.speakers = j.at("speakers").get<std::map<std::string, std::size_t>>();
    c.step = j.at("step").get<std::uint64_t>();
    c.schedule.lr = j.at("schedule").at("lr").get<double>();
    c.schedule.validation_history = j.at("schedule").at("validation_history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("checkpoint: bad header: ") + e.what());
  }

  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(in.bytes(in.u32()));
    model::Param p;
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw Error(ErrorKind::Format, "checkpoint: parameter '" + name + "' has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) p.shape.push_back(in.u32());
    p.value = get_values(in, num::numel(p.shape));
    if (!c.params.emplace(std::move(name), std::move(p)).second)
      throw Error(ErrorKind::Format, "checkpoint: duplicate parameter block");
  }
  const std::uint8_t has_opt = in.u8();
  if (has_opt > 1) throw Error(ErrorKind::Format, "checkpoint: bad optimizer flag");
  if (has_opt) {
    OptimizerState o;
    o.step = in.u64();
    const std::uint32_t n = in.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name(in.bytes(in.u32()));
      const std::uint32_t len = in.u32();
      Moments m;
      m.m = get_values(in, len);
      m.v = get_values(in, len);
      if (!c.params.count(name)) throw Error(ErrorKind::Format, "checkpoint: moments for unknown parameter '" + name + "'");
      o.moments.emplace(std::move(name), std::move(m));
    }
    c.optimizer = std::move(o);
  }
  if (!in.done()) throw Error(ErrorKind::Format, "checkpoint: trailing bytes");
  model::check_params(c.model, c.params);
  if (c.model.num_symbols != c.inventory.size())
    throw Error(ErrorKind::Format, "checkpoint: inventory size does not match model.num_symbols");
  if (c.model.num_speakers != c.speakers.size())
    throw Error(ErrorKind::Format, "checkpoint: speaker map size does not match model.num_speakers");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string data = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

void check_compatible(const Checkpoint& ckpt, const ModelConfig& expected) {
  nlohmann::json have = ckpt.model.to_json();
  nlohmann::json want = expected.to_json();
  // Table sizes come from the checkpoint's own inventory and speaker map.
  for (const char* derived : {"num_symbols", "num_speakers"})
    if (want.at(derived).get<std::size_t>() == 0) want[derived] = have.at(derived);
  std::string diff;
  for (auto it = want.begin(); it != want.end(); ++it)
    if (have.at(it.key()) != it.value())
      diff += (diff.empty() ? "" : ", ") + it.key() + " " + have.at(it.key()).dump() + " vs " + it.value().dump();
  if (!diff.empty()) throw Error(ErrorKind::Config, "checkpoint config mismatch: " + diff);
}

}  // namespace xtts::train::inline XTTS_PRECISION
