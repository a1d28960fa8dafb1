#pragma once

// Builders for hand-made super-bags and small random datasets.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nmil/corpus.hpp"

namespace nmil::testing {

inline Instance inst(std::string id, FeatureVector x) { return Instance{std::move(id), std::move(x), {}}; }

/// days[d][j] is the feature vector of instance j on day d + 1.
inline SuperBag superbag(std::string event_id, Label y,
                         const std::vector<std::vector<FeatureVector>>& days) {
  SuperBag sb;
  sb.event_id = std::move(event_id);
  sb.label = y;
  for (std::size_t d = 0; d < days.size(); ++d) {
    Bag bag;
    bag.day_index = static_cast<int>(d + 1);
    for (std::size_t j = 0; j < days[d].size(); ++j)
      bag.instances.push_back(
          inst(sb.event_id + "/d" + std::to_string(d + 1) + "/" + std::to_string(j + 1), days[d][j]));
    sb.bags.push_back(std::move(bag));
  }
  return sb;
}

inline Dataset dataset_of(std::vector<SuperBag> sbs, std::size_t dim, int history) {
  Dataset ds;
  ds.super_bags = std::move(sbs);
  ds.feature_dim = dim;
  ds.history_days = history;
  return ds;
}

/// Small random dataset with gaussian features and alternating labels.
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t dim, int history,
                              int per_day_min, int per_day_max) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> count(per_day_min, per_day_max);
  std::vector<SuperBag> sbs;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::vector<FeatureVector>> days(history);
    for (auto& day : days) {
      day.resize(count(rng));
      for (auto& x : day) {
        x.resize(dim);
        for (double& v : x) v = gauss(rng);
      }
    }
    sbs.push_back(superbag("e" + std::to_string(s), s % 2 == 0 ? Label::positive : Label::negative, days));
  }
  return dataset_of(std::move(sbs), dim, history);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nmil-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nmil::testing
