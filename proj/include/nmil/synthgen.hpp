#pragma once

// Synthetic datasets with planted precursor instances.
//
// Background instances are N(0, sigma^2 I). In a positive super-bag each
// instance on day i is independently a signal instance with probability
// r_i, drawn from N(shift * u_c, sigma^2 I) where u_c is the unit signal
// direction of the super-bag's class. The day rates r_i ramp up linearly
// towards the event while averaging to precursor_rate. Negative super-bags
// hold background only.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nmil/corpus.hpp"

namespace nmil {

enum class DirectionLayout {
  orthogonal,  // u_c = e_c
  antipodal,   // two classes, u_1 = e_1, u_2 = -e_1
};

struct GenConfig {
  int n_pos = 100;
  int n_neg = 100;
  int history_days = 5;
  int feature_dim = 20;
  int per_day_min = 10;
  int per_day_max = 10;
  double precursor_rate = 0.2;
  double signal_shift = 2.0;
  double noise_std = 1.0;
  // 0 gives equal day rates, 1 makes the rate proportional to the day index.
  double ramp = 1.0;
  int num_classes = 1;
  DirectionLayout directions = DirectionLayout::orthogonal;
  // Last feature fixed at 1.0 so a linear model without intercept can learn one.
  bool intercept_feature = true;
  int lead_time = 1;
  // Signal rate multiplier per extra day of lead time beyond 1.
  double lead_decay = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct PlantedEvent {
  std::string event_id;
  std::vector<std::string> signal_ids;
  std::optional<int> class_label;

  bool operator==(const PlantedEvent&) const = default;
};

struct PlantedTruth {
  std::vector<PlantedEvent> events;

  bool operator==(const PlantedTruth&) const = default;
};

/// Signal rate for each day (index 0 is day 1), including the lead decay.
std::vector<double> day_signal_rates(const GenConfig& cfg);

/// Unit signal direction for class c in 1..num_classes.
std::vector<double> signal_direction(const GenConfig& cfg, int cls);

std::pair<Dataset, PlantedTruth> generate(const GenConfig& cfg);

// Truth file: one {"event_id":..,"signal_ids":[..],"class_label":int|null} per line.
void write_truth(const PlantedTruth& truth, std::ostream& out);
PlantedTruth read_truth(std::istream& in);
void save_truth(const PlantedTruth& truth, const std::filesystem::path& path);
PlantedTruth load_truth(const std::filesystem::path& path);

}  // namespace nmil
