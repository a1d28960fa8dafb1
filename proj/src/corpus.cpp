#include "nmil/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace nmil {

namespace {

constexpr const char* kSchema = "nmil-dataset";
constexpr int kVersion = 1;

json instance_to_json(const Instance& inst) {
  json j;
  j["id"] = inst.id;
  j["features"] = inst.features;
  j["title"] = inst.title ? json(*inst.title) : json(nullptr);
  return j;
}

Instance instance_from_json(const json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.features = j.at("features").get<FeatureVector>();
  if (auto it = j.find("title"); it != j.end() && !it->is_null())
    inst.title = it->get<std::string>();
  return inst;
}

void check_instance(const Instance& inst, std::size_t dim, const std::string& event_id) {
  if (inst.features.size() != dim) {
    throw ValidationError("instance '" + inst.id + "' in event '" + event_id + "' has " +
                          std::to_string(inst.features.size()) + " features, expected " +
                          std::to_string(dim));
  }
  for (double v : inst.features) {
    if (!std::isfinite(v))
      throw ValidationError("instance '" + inst.id + "' has a non-finite feature");
  }
}

}  // namespace

Label label_from_int(int value) {
  if (value == 1) return Label::positive;
  if (value == -1) return Label::negative;
  throw ValidationError("label must be 1 or -1, got " + std::to_string(value));
}

std::size_t SuperBag::num_instances() const noexcept {
  std::size_t n = 0;
  for (const auto& bag : bags) n += bag.instances.size();
  return n;
}

void validate(const Dataset& ds) {
  if (ds.feature_dim == 0) throw ValidationError("feature_dim must be positive");
  if (ds.history_days < 1) throw ValidationError("history_days must be >= 1");
  if (ds.lead_time < 0) throw ValidationError("lead_time must be >= 0");
  const std::size_t num_classes = ds.class_names ? ds.class_names->size() : 0;

  for (const auto& sb : ds.super_bags) {
    if (sb.bags.size() != static_cast<std::size_t>(ds.history_days)) {
      throw ValidationError("event '" + sb.event_id + "' has " + std::to_string(sb.bags.size()) +
                            " days, expected " + std::to_string(ds.history_days));
    }
    if (sb.class_label) {
      if (sb.label != Label::positive)
        throw ValidationError("event '" + sb.event_id + "' is negative but has a class label");
      if (*sb.class_label < 1 || (num_classes > 0 && *sb.class_label > static_cast<int>(num_classes)))
        throw ValidationError("event '" + sb.event_id + "' has class label out of range");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < sb.bags.size(); ++i) {
      const Bag& bag = sb.bags[i];
      if (bag.day_index != static_cast<int>(i) + 1)
        throw ValidationError("event '" + sb.event_id + "' has non-consecutive day indices");
      if (bag.instances.empty())
        throw ValidationError("event '" + sb.event_id + "' has an empty day");
      for (const auto& inst : bag.instances) {
        check_instance(inst, ds.feature_dim, sb.event_id);
        ids.insert(inst.id);
      }
    }
    if (sb.target_doc) {
      check_instance(*sb.target_doc, ds.feature_dim, sb.event_id);
      if (ids.count(sb.target_doc->id))
        throw ValidationError("event '" + sb.event_id + "' uses its target document inside a bag");
    }
  }
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.feature_dim = ds.feature_dim;
  out.history_days = ds.history_days;
  out.lead_time = ds.lead_time;
  out.class_names = ds.class_names;
  out.super_bags.reserve(indices.size());
  for (std::size_t i : indices) out.super_bags.push_back(ds.super_bags.at(i));
  return out;
}

Dataset read_dataset(std::istream& in, LoadStats* stats) {
  Dataset ds;
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("schema", "") != kSchema)
          throw ParseError(line_no, "missing nmil-dataset header");
        if (j.at("version").get<int>() != kVersion)
          throw ParseError(line_no, "unsupported dataset version");
        ds.feature_dim = j.at("feature_dim").get<std::size_t>();
        ds.history_days = j.at("history_days").get<int>();
        ds.lead_time = j.at("lead_time").get<int>();
        if (auto it = j.find("class_names"); it != j.end() && !it->is_null())
          ds.class_names = it->get<std::vector<std::string>>();
        have_header = true;
        continue;
      }

      SuperBag sb;
      sb.event_id = j.at("event_id").get<std::string>();
      sb.label = label_from_int(j.at("label").get<int>());
      if (auto it = j.find("class_label"); it != j.end() && !it->is_null())
        sb.class_label = it->get<int>();
      if (auto it = j.find("target_doc"); it != j.end() && !it->is_null())
        sb.target_doc = instance_from_json(*it);
      int day = 0;
      for (const auto& jday : j.at("days")) {
        if (jday.empty()) {
          ++local.dropped_empty_days;
          std::clog << "nmil: dropping empty day in event '" << sb.event_id << "' (line "
                    << line_no << ")\n";
          continue;
        }
        Bag bag;
        bag.day_index = ++day;
        for (const auto& jinst : jday) bag.instances.push_back(instance_from_json(jinst));
        sb.bags.push_back(std::move(bag));
      }
      ds.super_bags.push_back(std::move(sb));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_header) throw ParseError(line_no, "empty dataset file");
  validate(ds);
  if (stats) *stats = local;
  return ds;
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  json header;
  header["schema"] = kSchema;
  header["version"] = kVersion;
  header["feature_dim"] = ds.feature_dim;
  header["history_days"] = ds.history_days;
  header["lead_time"] = ds.lead_time;
  header["class_names"] = ds.class_names ? json(*ds.class_names) : json(nullptr);
  out << header.dump() << '\n';

  for (const auto& sb : ds.super_bags) {
    json j;
    j["event_id"] = sb.event_id;
    j["label"] = to_int(sb.label);
    j["class_label"] = sb.class_label ? json(*sb.class_label) : json(nullptr);
    json days = json::array();
    for (const auto& bag : sb.bags) {
      json jday = json::array();
      for (const auto& inst : bag.instances) jday.push_back(instance_to_json(inst));
      days.push_back(std::move(jday));
    }
    j["days"] = std::move(days);
    j["target_doc"] = sb.target_doc ? instance_to_json(*sb.target_doc) : json(nullptr);
    out << j.dump() << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& path, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in, stats);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  write_dataset(ds, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace nmil
