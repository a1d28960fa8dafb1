#pragma once

// Instance, bag and super-bag probabilities for every model variant.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nmil/corpus.hpp"

namespace nmil {

/// nmil:       one shared weight vector, mean aggregation at both levels.
/// nmil_delta: as nmil, consecutive-day cost weighted by document similarity.
/// nmil_omega: one weight vector per history day.
/// rmil_nor:   all days collapsed into one bag, noisy-OR aggregation.
/// rmil_avg:   all days collapsed into one bag, mean aggregation.
enum class Variant { nmil, nmil_delta, nmil_omega, rmil_nor, rmil_avg };

std::string_view to_string(Variant v) noexcept;
Variant parse_variant(std::string_view name);

constexpr bool is_collapsed(Variant v) noexcept {
  return v == Variant::rmil_nor || v == Variant::rmil_avg;
}
constexpr bool has_day_weights(Variant v) noexcept { return v == Variant::nmil_omega; }

/// Linear scoring weights. There is no intercept; a constant feature in the
/// data plays that role when needed.
///
/// Coefficients are stored flat, one block of feature_dim values per weight
/// vector: a single block for shared-weight variants, history_days blocks for
/// nmil_omega (block i scores day i + 1).
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(Variant variant, std::size_t feature_dim, int history_days);

  static ModelParams from_blocks(Variant variant, int history_days,
                                 const std::vector<std::vector<double>>& blocks);

  Variant variant() const noexcept { return variant_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  int history_days() const noexcept { return history_days_; }
  std::size_t num_blocks() const noexcept {
    return has_day_weights(variant_) ? static_cast<std::size_t>(history_days_) : 1;
  }

  /// Block used to score instances on the given 1-based day.
  std::size_t block_for_day(int day) const noexcept {
    return has_day_weights(variant_) ? static_cast<std::size_t>(day - 1) : 0;
  }

  std::span<const double> block(std::size_t b) const noexcept {
    return {coefficients_.data() + b * feature_dim_, feature_dim_};
  }
  std::span<double> block(std::size_t b) noexcept {
    return {coefficients_.data() + b * feature_dim_, feature_dim_};
  }
  std::span<const double> weights_for_day(int day) const noexcept {
    return block(block_for_day(day));
  }

  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  std::vector<double>& coefficients() noexcept { return coefficients_; }

  /// Throws ValidationError if the parameters cannot score this dataset.
  void check_compatible(const Dataset& ds) const;

  bool operator==(const ModelParams&) const = default;

 private:
  Variant variant_ = Variant::nmil;
  std::size_t feature_dim_ = 0;
  int history_days_ = 1;
  std::vector<double> coefficients_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Logistic function; never exponentiates a positive argument.
double sigmoid(double z) noexcept;

double noisy_or(std::span<const double> probs) noexcept;
double mean(std::span<const double> values) noexcept;

/// w_day . x
double instance_score(const ModelParams& params, const Instance& x, int day);
double instance_prob(const ModelParams& params, const Instance& x, int day);

/// Mean of instance probabilities, or noisy-OR for rmil_nor. Throws on an empty bag.
double bag_prob(const ModelParams& params, const Bag& bag);

/// Mean of bag probabilities for nested variants. The rmil variants pool all
/// instances of all days into one bag instead.
double superbag_prob(const ModelParams& params, const SuperBag& sb);

/// +1 only when P is strictly above one half.
constexpr Label decide(double superbag_probability) noexcept {
  return superbag_probability > 0.5 ? Label::positive : Label::negative;
}
Label predict(const ModelParams& params, const SuperBag& sb);

// Model file: {"schema":"nmil-model","version":1,"variant":..,"feature_dim":..,
// "history_days":..,"weights":[[..],..],"config":{..}}
nlohmann::json model_to_json(const ModelParams& params, const nlohmann::json& config = {});
ModelParams model_from_json(const nlohmann::json& j);
void save_model(const ModelParams& params, const std::filesystem::path& path,
                const nlohmann::json& config = {});
ModelParams load_model(const std::filesystem::path& path);

}  // namespace nmil
