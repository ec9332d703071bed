#pragma once

// Toy corpus plumbing shared by the training-based criteria.

#include <string>
#include <vector>

#include "xtts/datasel.hpp"
#include "xtts/toycorpus.hpp"
#include "xtts/training.hpp"

namespace xtts::acceptance {

inline text::SymbolInventory char_inventory(const datasel::Manifest& m) {
  std::vector<std::string> texts;
  for (const auto& r : m.records) texts.push_back(r.text);
  return text::SymbolInventory::build(texts, text::Mode::Character);
}

inline train::PretrainInputs toy_inputs(const datasel::Manifest& m, std::size_t steps) {
  const auto j = toy::toy_run_config();
  train::PretrainInputs in;
  in.manifest = m;
  in.inventory = char_inventory(m);
  in.model = model::ModelConfig::from_json(j.at("model"));
  in.stft = toy::toy_stft();
  in.train = train::TrainConfig::from_json(j.at("train"));
  in.train.pretrain_steps = steps;
  return in;
}

}  // namespace xtts::acceptance
