#include "nmil/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

using nlohmann::json;

namespace nmil {

void GenConfig::validate() const {
  if (n_pos < 0 || n_neg < 0 || n_pos + n_neg < 1)
    throw ValidationError("need at least one super-bag and non-negative counts");
  if (history_days < 1) throw ValidationError("history_days must be >= 1");
  if (per_day_min < 1 || per_day_max < per_day_min)
    throw ValidationError("instances per day must satisfy 1 <= min <= max");
  if (!(precursor_rate >= 0.0 && precursor_rate <= 1.0))
    throw ValidationError("precursor_rate must lie in [0, 1]");
  if (precursor_rate == 0.0 && n_pos > 0)
    throw ValidationError("precursor_rate = 0 leaves positive super-bags without signal");
  if (!(signal_shift > 0.0)) throw ValidationError("signal_shift must be > 0");
  if (!(noise_std > 0.0)) throw ValidationError("noise_std must be > 0");
  if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
  if (lead_time < 1) throw ValidationError("lead_time must be >= 1");
  if (!(ramp >= 0.0 && ramp <= 1.0)) throw ValidationError("ramp must lie in [0, 1]");
  if (!(lead_decay > 0.0 && lead_decay <= 1.0)) throw ValidationError("lead_decay must lie in (0, 1]");
  for (double r : day_signal_rates(*this))
    if (r > 1.0) throw ValidationError("precursor_rate too high for this ramp: a day rate exceeds 1");
  const int signal_dims = feature_dim - (intercept_feature ? 1 : 0);
  if (signal_dims < 1) throw ValidationError("feature_dim leaves no signal dimensions");
  if (directions == DirectionLayout::antipodal) {
    if (num_classes != 2) throw ValidationError("antipodal directions need exactly 2 classes");
  } else if (num_classes > signal_dims) {
    throw ValidationError("orthogonal directions need feature_dim >= num_classes");
  }
}

std::vector<double> day_signal_rates(const GenConfig& cfg) {
  const int h = cfg.history_days;
  const double base = cfg.precursor_rate * std::pow(cfg.lead_decay, cfg.lead_time - 1);
  std::vector<double> rates(h, base);
  // Blend of a flat profile and one proportional to the day index; both
  // average to base over the h days.
  for (int i = 1; i <= h; ++i)
    rates[i - 1] = base * ((1.0 - cfg.ramp) + cfg.ramp * 2.0 * i / (h + 1));
  return rates;
}

std::vector<double> signal_direction(const GenConfig& cfg, int cls) {
  if (cls < 1 || cls > cfg.num_classes) throw ValidationError("class out of range");
  std::vector<double> u(cfg.feature_dim, 0.0);
  if (cfg.directions == DirectionLayout::antipodal)
    u[0] = cls == 1 ? 1.0 : -1.0;
  else
    u[cls - 1] = 1.0;
  return u;
}

std::pair<Dataset, PlantedTruth> generate(const GenConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> per_day(cfg.per_day_min, cfg.per_day_max);

  const auto rates = day_signal_rates(cfg);
  const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim);

  auto draw = [&](std::string id, const std::vector<double>* direction) {
    Instance x;
    x.id = std::move(id);
    x.features.resize(dim);
    for (double& v : x.features) v = noise(rng);
    if (direction) {
      for (std::size_t k = 0; k < dim; ++k) x.features[k] += cfg.signal_shift * (*direction)[k];
    }
    if (cfg.intercept_feature) x.features[dim - 1] = 1.0;
    return x;
  };

  Dataset ds;
  ds.feature_dim = dim;
  ds.history_days = cfg.history_days;
  ds.lead_time = cfg.lead_time;
  if (cfg.num_classes > 1) {
    std::vector<std::string> names;
    for (int c = 1; c <= cfg.num_classes; ++c) names.push_back("class-" + std::to_string(c));
    ds.class_names = std::move(names);
  }
  PlantedTruth truth;

  char buf[64];
  for (int e = 0; e < cfg.n_pos + cfg.n_neg; ++e) {
    const bool positive = e < cfg.n_pos;
    std::snprintf(buf, sizeof buf, "%s-%04d", positive ? "pos" : "neg",
                  positive ? e + 1 : e - cfg.n_pos + 1);
    SuperBag sb;
    sb.event_id = buf;
    sb.label = positive ? Label::positive : Label::negative;
    std::vector<double> direction;
    if (positive) {
      const int cls = cfg.num_classes > 1 ? 1 + (e % cfg.num_classes) : 1;
      if (cfg.num_classes > 1) sb.class_label = cls;
      direction = signal_direction(cfg, cls);
    }
    PlantedEvent planted{sb.event_id, {}, sb.class_label};

    for (int day = 1; day <= cfg.history_days; ++day) {
      Bag bag;
      bag.day_index = day;
      const int count = per_day(rng);
      for (int j = 0; j < count; ++j) {
        std::snprintf(buf, sizeof buf, "/d%d/%d", day, j + 1);
        std::string id = sb.event_id + buf;
        const bool signal = positive && unit(rng) < rates[day - 1];
        if (signal) planted.signal_ids.push_back(id);
        bag.instances.push_back(draw(std::move(id), signal ? &direction : nullptr));
      }
      sb.bags.push_back(std::move(bag));
    }
    if (positive) sb.target_doc = draw(sb.event_id + "/target", &direction);

    ds.super_bags.push_back(std::move(sb));
    truth.events.push_back(std::move(planted));
  }
  return {std::move(ds), std::move(truth)};
}

void write_truth(const PlantedTruth& truth, std::ostream& out) {
  for (const auto& ev : truth.events) {
    json j;
    j["event_id"] = ev.event_id;
    j["signal_ids"] = ev.signal_ids;
    j["class_label"] = ev.class_label ? json(*ev.class_label) : json(nullptr);
    out << j.dump() << '\n';
  }
}

PlantedTruth read_truth(std::istream& in) {
  PlantedTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PlantedEvent ev;
      ev.event_id = j.at("event_id").get<std::string>();
      ev.signal_ids = j.at("signal_ids").get<std::vector<std::string>>();
      if (auto it = j.find("class_label"); it != j.end() && !it->is_null())
        ev.class_label = it->get<int>();
      truth.events.push_back(std::move(ev));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return truth;
}

void save_truth(const PlantedTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write truth file '" + path.string() + "'");
  write_truth(truth, out);
}

PlantedTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open truth file '" + path.string() + "'");
  return read_truth(in);
}

}  // namespace nmil
