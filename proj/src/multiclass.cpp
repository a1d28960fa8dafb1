#include "nmil/multiclass.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <random>

using nlohmann::json;

namespace nmil {

std::uint64_t derive_seed(std::uint64_t seed, int stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

MultiModel train_multiclass(const Dataset& ds, const TrainConfig& tcfg, int num_classes) {
  if (num_classes < 2) throw ValidationError("one-vs-rest needs at least 2 classes");

  Dataset positives = ds;
  positives.super_bags.clear();
  for (const auto& sb : ds.super_bags) {
    if (sb.label != Label::positive) continue;
    if (!sb.class_label)
      throw ValidationError("positive event '" + sb.event_id + "' has no class label");
    if (*sb.class_label < 1 || *sb.class_label > num_classes)
      throw ValidationError("event '" + sb.event_id + "' has class label out of range");
    positives.super_bags.push_back(sb);
  }
  if (positives.super_bags.empty()) throw ValidationError("no positive super-bags to classify");

  // Relabeled copies per class: +1 for the class, -1 for every other class.
  std::vector<Dataset> relabeled(num_classes, positives);
  for (int c = 1; c <= num_classes; ++c) {
    for (auto& sb : relabeled[c - 1].super_bags) {
      sb.label = *sb.class_label == c ? Label::positive : Label::negative;
      sb.class_label.reset();
    }
  }

  std::vector<ModelParams> models(num_classes + 1);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int stream = 0; stream <= num_classes; ++stream) {
    try {
      TrainConfig cfg = tcfg;
      cfg.seed = derive_seed(tcfg.seed, stream);
      const Dataset& data = stream == 0 ? ds : relabeled[stream - 1];
      models[stream] = train(data, cfg).final_params;
    } catch (...) {
#pragma omp critical(nmil_multiclass_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  MultiModel mm;
  mm.binary = std::move(models[0]);
  mm.per_class.assign(std::make_move_iterator(models.begin() + 1),
                      std::make_move_iterator(models.end()));
  if (ds.class_names && static_cast<int>(ds.class_names->size()) == num_classes) {
    mm.class_names = *ds.class_names;
  } else {
    for (int c = 1; c <= num_classes; ++c) mm.class_names.push_back("class-" + std::to_string(c));
  }
  return mm;
}

int argmax_class(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("no class scores");
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return static_cast<int>(best) + 1;
}

int classify(const MultiModel& mm, const SuperBag& sb) {
  if (predict(mm.binary, sb) == Label::negative) return kNoClass;
  std::vector<double> scores;
  scores.reserve(mm.per_class.size());
  for (const auto& params : mm.per_class) scores.push_back(superbag_prob(params, sb));
  return argmax_class(scores);
}

json multimodel_to_json(const MultiModel& mm, const json& config) {
  json per_class = json::array();
  for (const auto& p : mm.per_class) per_class.push_back(model_to_json(p, config));
  return json{{"schema", "nmil-multimodel"},
              {"version", 1},
              {"class_names", mm.class_names},
              {"binary", model_to_json(mm.binary, config)},
              {"per_class", std::move(per_class)}};
}

MultiModel multimodel_from_json(const json& j) {
  try {
    if (j.value("schema", "") != "nmil-multimodel")
      throw ValidationError("not an nmil-multimodel bundle");
    MultiModel mm;
    mm.class_names = j.at("class_names").get<std::vector<std::string>>();
    mm.binary = model_from_json(j.at("binary"));
    for (const auto& jp : j.at("per_class")) mm.per_class.push_back(model_from_json(jp));
    if (mm.per_class.size() < 2 || mm.per_class.size() != mm.class_names.size())
      throw ValidationError("multi-model needs K >= 2 class models with matching names");
    for (const auto& p : mm.per_class) {
      if (p.feature_dim() != mm.binary.feature_dim() || p.variant() != mm.binary.variant() ||
          p.history_days() != mm.binary.history_days())
        throw ValidationError("class models disagree with the binary model");
    }
    return mm;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed multi-model: ") + e.what());
  }
}

void save_multimodel(const MultiModel& mm, const std::filesystem::path& path, const json& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write multi-model '" + path.string() + "'");
  out << multimodel_to_json(mm, config).dump(2) << '\n';
}

MultiModel load_multimodel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open multi-model '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("multi-model '" + path.string() + "': " + e.what());
  }
  return multimodel_from_json(j);
}

}  // namespace nmil
