#pragma once

// Precursor discovery: score every document of a super-bag with the
// day-appropriate weights, keep those above tau, rank them per day.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmil/corpus.hpp"
#include "nmil/model.hpp"

namespace nmil {

inline constexpr double kDefaultTau = 0.7;

struct PrecursorEntry {
  int day = 1;
  std::string instance_id;
  double probability = 0.0;
  std::optional<std::string> title;

  bool operator==(const PrecursorEntry&) const = default;
};

/// Entries are grouped by day in chronological order and sorted within a day
/// by probability descending, ties by instance id ascending.
struct PrecursorReport {
  std::string event_id;
  Label label = Label::positive;
  double tau = kDefaultTau;
  std::size_t top_k = 0;  // 0 = no per-day cap
  std::vector<PrecursorEntry> entries;

  bool operator==(const PrecursorReport&) const = default;
};

struct DiscoverOptions {
  double tau = kDefaultTau;
  std::size_t top_k = 0;
  bool include_negatives = false;
};

/// Threshold and rank one day's (instance, probability) pairs.
std::vector<PrecursorEntry> rank_day(const Bag& bag, std::span<const double> probs, double tau,
                                     std::size_t top_k);

std::vector<PrecursorReport> discover(const Dataset& ds, const ModelParams& params,
                                      const DiscoverOptions& opts = {});

/// Relative cosine of every instance to its event's target document, scaled
/// by the event's largest absolute cosine.
struct SimilarityDiagnostics {
  std::vector<double> day_mean;     // index 0 is day 1, averaged over events
  std::vector<double> all;          // every instance
  std::vector<double> precursors;   // instances listed in the reports
};

SimilarityDiagnostics similarity_diagnostics(std::span<const PrecursorReport> reports,
                                             const Dataset& ds);

void write_reports(std::span<const PrecursorReport> reports, std::ostream& out);
std::vector<PrecursorReport> read_reports(std::istream& in);

/// `day,mean_relative_cosine`
void write_day_table(const SimilarityDiagnostics& diag, std::ostream& out);
/// `population,value` with population in {all, precursor}
void write_samples(const SimilarityDiagnostics& diag, std::ostream& out);

}  // namespace nmil
