#include "nmil/precursor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nmil/kernels.hpp"
#include "nmil/objective.hpp"

using nlohmann::json;

namespace nmil {

std::vector<PrecursorEntry> rank_day(const Bag& bag, std::span<const double> probs, double tau,
                                     std::size_t top_k) {
  std::vector<PrecursorEntry> kept;
  for (std::size_t j = 0; j < bag.instances.size(); ++j) {
    if (probs[j] > tau)
      kept.push_back({bag.day_index, bag.instances[j].id, probs[j], bag.instances[j].title});
  }
  std::sort(kept.begin(), kept.end(), [](const PrecursorEntry& a, const PrecursorEntry& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.instance_id < b.instance_id;
  });
  if (top_k > 0 && kept.size() > top_k) kept.resize(top_k);
  return kept;
}

std::vector<PrecursorReport> discover(const Dataset& ds, const ModelParams& params,
                                      const DiscoverOptions& opts) {
  if (!(opts.tau >= 0.0 && opts.tau < 1.0)) throw ValidationError("tau must lie in [0, 1)");
  params.check_compatible(ds);

  const auto probs = kernels::omp::instance_probs(params, ds.super_bags);
  std::vector<PrecursorReport> reports;
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const SuperBag& sb = ds.super_bags[s];
    if (!opts.include_negatives && sb.label != Label::positive) continue;
    PrecursorReport report;
    report.event_id = sb.event_id;
    report.label = sb.label;
    report.tau = opts.tau;
    report.top_k = opts.top_k;
    for (std::size_t d = 0; d < sb.bags.size(); ++d) {
      auto day = rank_day(sb.bags[d], probs[s][d], opts.tau, opts.top_k);
      report.entries.insert(report.entries.end(), day.begin(), day.end());
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

SimilarityDiagnostics similarity_diagnostics(std::span<const PrecursorReport> reports,
                                             const Dataset& ds) {
  std::map<std::string, const PrecursorReport*> by_event;
  for (const auto& r : reports) by_event[r.event_id] = &r;

  std::vector<std::string> missing;
  for (const auto& sb : ds.super_bags)
    if (by_event.count(sb.event_id) && !sb.target_doc) missing.push_back(sb.event_id);
  if (!missing.empty()) {
    std::string msg = "events without a target document:";
    for (const auto& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }

  SimilarityDiagnostics diag;
  const std::size_t h = static_cast<std::size_t>(ds.history_days);
  std::vector<double> day_sum(h, 0.0);
  std::vector<std::size_t> day_events(h, 0);

  for (const auto& sb : ds.super_bags) {
    auto it = by_event.find(sb.event_id);
    if (it == by_event.end()) continue;
    std::set<std::string> flagged;
    for (const auto& e : it->second->entries) flagged.insert(e.instance_id);

    std::vector<std::vector<double>> cos(sb.bags.size());
    double scale = 0.0;
    for (std::size_t d = 0; d < sb.bags.size(); ++d) {
      for (const auto& x : sb.bags[d].instances) {
        cos[d].push_back(cosine_similarity(x.features, sb.target_doc->features));
        scale = std::max(scale, std::abs(cos[d].back()));
      }
    }
    for (std::size_t d = 0; d < sb.bags.size(); ++d) {
      double day_total = 0.0;
      for (std::size_t j = 0; j < cos[d].size(); ++j) {
        const double rel = scale > 0.0 ? cos[d][j] / scale : 0.0;
        day_total += rel;
        diag.all.push_back(rel);
        if (flagged.count(sb.bags[d].instances[j].id)) diag.precursors.push_back(rel);
      }
      day_sum[d] += day_total / static_cast<double>(cos[d].size());
      ++day_events[d];
    }
  }
  diag.day_mean.resize(h, 0.0);
  for (std::size_t d = 0; d < h; ++d)
    if (day_events[d] > 0) diag.day_mean[d] = day_sum[d] / static_cast<double>(day_events[d]);
  return diag;
}

void write_reports(std::span<const PrecursorReport> reports, std::ostream& out) {
  for (const auto& r : reports) {
    json entries = json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"day", e.day},
                         {"id", e.instance_id},
                         {"probability", e.probability},
                         {"title", e.title ? json(*e.title) : json(nullptr)}});
    }
    json j{{"event_id", r.event_id},
           {"label", to_int(r.label)},
           {"tau", r.tau},
           {"top_k", r.top_k},
           {"entries", std::move(entries)}};
    out << j.dump() << '\n';
  }
}

std::vector<PrecursorReport> read_reports(std::istream& in) {
  std::vector<PrecursorReport> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PrecursorReport r;
      r.event_id = j.at("event_id").get<std::string>();
      r.label = label_from_int(j.at("label").get<int>());
      r.tau = j.at("tau").get<double>();
      r.top_k = j.at("top_k").get<std::size_t>();
      for (const auto& je : j.at("entries")) {
        PrecursorEntry e;
        e.day = je.at("day").get<int>();
        e.instance_id = je.at("id").get<std::string>();
        e.probability = je.at("probability").get<double>();
        if (!je.at("title").is_null()) e.title = je.at("title").get<std::string>();
        r.entries.push_back(std::move(e));
      }
      reports.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return reports;
}

void write_day_table(const SimilarityDiagnostics& diag, std::ostream& out) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "day,mean_relative_cosine\n";
  for (std::size_t d = 0; d < diag.day_mean.size(); ++d) buf << (d + 1) << ',' << diag.day_mean[d] << '\n';
  out << buf.str();
}

void write_samples(const SimilarityDiagnostics& diag, std::ostream& out) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "population,value\n";
  for (double v : diag.all) buf << "all," << v << '\n';
  for (double v : diag.precursors) buf << "precursor," << v << '\n';
  out << buf.str();
}

}  // namespace nmil
