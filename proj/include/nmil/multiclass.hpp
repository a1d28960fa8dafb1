#pragma once

// Two-stage multi-class forecasting: a binary event model gates a set of
// one-vs-rest class models trained on positive super-bags only.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmil/corpus.hpp"
#include "nmil/model.hpp"
#include "nmil/trainer.hpp"

namespace nmil {

inline constexpr int kNoClass = 0;

struct MultiModel {
  ModelParams binary;
  std::vector<ModelParams> per_class;  // index c - 1 holds class c
  std::vector<std::string> class_names;

  int num_classes() const noexcept { return static_cast<int>(per_class.size()); }
  bool operator==(const MultiModel&) const = default;
};

/// Seed for training run `stream` (0 = binary model, c = class c).
std::uint64_t derive_seed(std::uint64_t seed, int stream);

MultiModel train_multiclass(const Dataset& ds, const TrainConfig& tcfg, int num_classes);

/// Index of the largest score, 1-based; ties go to the smallest class.
int argmax_class(std::span<const double> scores);

/// kNoClass when the binary model forecasts no event, else a class in 1..K.
int classify(const MultiModel& mm, const SuperBag& sb);

nlohmann::json multimodel_to_json(const MultiModel& mm, const nlohmann::json& config = {});
MultiModel multimodel_from_json(const nlohmann::json& j);
void save_multimodel(const MultiModel& mm, const std::filesystem::path& path,
                     const nlohmann::json& config = {});
MultiModel load_multimodel(const std::filesystem::path& path);

}  // namespace nmil
