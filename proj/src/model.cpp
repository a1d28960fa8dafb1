#include "nmil/model.hpp"

#include <cmath>
#include <fstream>

using nlohmann::json;

namespace nmil {

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::nmil: return "nmil";
    case Variant::nmil_delta: return "nmil-delta";
    case Variant::nmil_omega: return "nmil-omega";
    case Variant::rmil_nor: return "rmil-nor";
    case Variant::rmil_avg: return "rmil-avg";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::nmil, Variant::nmil_delta, Variant::nmil_omega, Variant::rmil_nor,
                    Variant::rmil_avg}) {
    if (to_string(v) == name) return v;
  }
  throw ValidationError("unknown variant '" + std::string(name) + "'");
}

ModelParams::ModelParams(Variant variant, std::size_t feature_dim, int history_days)
    : variant_(variant), feature_dim_(feature_dim), history_days_(history_days) {
  if (feature_dim == 0) throw ValidationError("feature_dim must be positive");
  if (history_days < 1) throw ValidationError("history_days must be >= 1");
  coefficients_.assign(num_blocks() * feature_dim_, 0.0);
}

ModelParams ModelParams::from_blocks(Variant variant, int history_days,
                                     const std::vector<std::vector<double>>& blocks) {
  if (blocks.empty()) throw ValidationError("model has no weight vectors");
  ModelParams p(variant, blocks.front().size(), history_days);
  if (blocks.size() != p.num_blocks()) {
    throw ValidationError("variant " + std::string(to_string(variant)) + " needs " +
                          std::to_string(p.num_blocks()) + " weight vectors, got " +
                          std::to_string(blocks.size()));
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].size() != p.feature_dim_)
      throw ValidationError("weight vectors have inconsistent dimensions");
    for (std::size_t k = 0; k < blocks[b].size(); ++k) {
      if (!std::isfinite(blocks[b][k])) throw ValidationError("non-finite model weight");
      p.block(b)[k] = blocks[b][k];
    }
  }
  return p;
}

void ModelParams::check_compatible(const Dataset& ds) const {
  if (coefficients_.empty()) throw ValidationError("model has no weights");
  if (ds.feature_dim != feature_dim_) {
    throw ValidationError("model feature_dim " + std::to_string(feature_dim_) +
                          " does not match dataset feature_dim " +
                          std::to_string(ds.feature_dim));
  }
  if (has_day_weights(variant_) && ds.history_days != history_days_) {
    throw ValidationError("model has " + std::to_string(history_days_) +
                          " day weight vectors but dataset has " +
                          std::to_string(ds.history_days) + " history days");
  }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double noisy_or(std::span<const double> probs) noexcept {
  double none = 1.0;
  for (double p : probs) none *= (1.0 - p);
  return 1.0 - none;
}

double mean(std::span<const double> values) noexcept {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double instance_score(const ModelParams& params, const Instance& x, int day) {
  if (x.features.size() != params.feature_dim()) {
    throw ValidationError("instance '" + x.id + "' has dimension " +
                          std::to_string(x.features.size()) + ", model expects " +
                          std::to_string(params.feature_dim()));
  }
  if (day < 1 || (has_day_weights(params.variant()) && day > params.history_days()))
    throw ValidationError("day index " + std::to_string(day) + " out of range");
  return dot(params.weights_for_day(day), x.features);
}

double instance_prob(const ModelParams& params, const Instance& x, int day) {
  return sigmoid(instance_score(params, x, day));
}

double bag_prob(const ModelParams& params, const Bag& bag) {
  if (bag.instances.empty()) throw ValidationError("cannot aggregate an empty bag");
  std::vector<double> probs;
  probs.reserve(bag.instances.size());
  for (const auto& x : bag.instances) probs.push_back(instance_prob(params, x, bag.day_index));
  return params.variant() == Variant::rmil_nor ? noisy_or(probs) : mean(probs);
}

double superbag_prob(const ModelParams& params, const SuperBag& sb) {
  if (sb.bags.empty()) throw ValidationError("super-bag '" + sb.event_id + "' has no days");
  if (is_collapsed(params.variant())) {
    std::vector<double> probs;
    probs.reserve(sb.num_instances());
    for (const auto& bag : sb.bags)
      for (const auto& x : bag.instances) probs.push_back(instance_prob(params, x, bag.day_index));
    if (probs.empty()) throw ValidationError("super-bag '" + sb.event_id + "' has no instances");
    return params.variant() == Variant::rmil_nor ? noisy_or(probs) : mean(probs);
  }
  double total = 0.0;
  for (const auto& bag : sb.bags) total += bag_prob(params, bag);
  return total / static_cast<double>(sb.bags.size());
}

Label predict(const ModelParams& params, const SuperBag& sb) {
  return decide(superbag_prob(params, sb));
}

json model_to_json(const ModelParams& params, const json& config) {
  json j;
  j["schema"] = "nmil-model";
  j["version"] = 1;
  j["variant"] = std::string(to_string(params.variant()));
  j["feature_dim"] = params.feature_dim();
  j["history_days"] = params.history_days();
  json weights = json::array();
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    auto blk = params.block(b);
    weights.push_back(std::vector<double>(blk.begin(), blk.end()));
  }
  j["weights"] = std::move(weights);
  j["config"] = config.is_null() ? json::object() : config;
  return j;
}

ModelParams model_from_json(const json& j) {
  try {
    if (j.value("schema", "") != "nmil-model") throw ValidationError("not an nmil-model record");
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported model version");
    const Variant v = parse_variant(j.at("variant").get<std::string>());
    const auto dim = j.at("feature_dim").get<std::size_t>();
    const int h = j.at("history_days").get<int>();
    auto blocks = j.at("weights").get<std::vector<std::vector<double>>>();
    ModelParams p = ModelParams::from_blocks(v, h, blocks);
    if (p.feature_dim() != dim) throw ValidationError("model feature_dim disagrees with weights");
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const ModelParams& params, const std::filesystem::path& path, const json& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path.string() + "'");
  out << model_to_json(params, config).dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("model '" + path.string() + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace nmil
