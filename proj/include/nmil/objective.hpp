#pragma once

// Loss terms and the total training objective
//
//   J = (beta/n) sum_S f(S) + (1/n) sum_S (1/t) sum_{i=2..t} g_i
//     + (1/n) sum_S (1/t) sum_i (1/n_i) sum_j h_ij + lambda R
//
// with f the super-bag negative log-likelihood, g the consecutive-day cost,
// h the instance hinge and R = 1/2 ||w||^2 summed over weight blocks. The
// collapsed rmil variants have no g term and take h over one pooled bag.

#include <span>
#include <vector>

#include "nmil/corpus.hpp"
#include "nmil/model.hpp"

namespace nmil {

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before logs.
inline constexpr double kProbEpsilon = 1e-12;

struct LossConfig {
  double beta = 3.0;
  double lambda = 0.05;
  double m0 = 0.5;
  double p0 = 0.5;
  // Term switches; only tests and audits turn these off.
  bool crossbag_term = true;
  bool hinge_term = true;

  void validate() const;
};

double clamp_prob(double p) noexcept;

/// -log P for Y = +1, -log(1 - P) for Y = -1, after clamping.
double superbag_loss(double P, Label y) noexcept;
/// df/dP; zero inside the clamped region.
double superbag_loss_derivative(double P, Label y) noexcept;

/// Zero when either vector is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b) noexcept;

/// Mean cosine over all cross pairs of the two days, floored at 0.
double bag_similarity(const Bag& prev, const Bag& cur) noexcept;

/// Similarity weights for consecutive days of one super-bag: entry i (i >= 1)
/// pairs day i with day i + 1; entry 0 is unused and zero.
std::vector<double> day_similarities(const SuperBag& sb);

double crossbag_cost(double prev_prob, double cur_prob, double weight = 1.0) noexcept;
double crossbag_cost(const Bag& prev, const Bag& cur, const ModelParams& params, bool weighted);

/// sgn(p - p0) with sgn(0) = +1.
constexpr double hinge_sign(double p, double p0) noexcept { return p >= p0 ? 1.0 : -1.0; }
double hinge_from_score(double score, const LossConfig& cfg) noexcept;
double instance_hinge(const Instance& x, const ModelParams& params, int day,
                      const LossConfig& cfg);

double regularizer(const ModelParams& params) noexcept;

/// A super-bag plus its day similarities (empty unless the variant weights
/// the consecutive-day cost).
struct BatchItem {
  const SuperBag* super_bag = nullptr;
  std::span<const double> similarity;
};

using SimilarityTable = std::vector<std::vector<double>>;

/// Items referencing super_bags; similarity rows are attached when the
/// variant needs them and a table is supplied.
std::vector<BatchItem> make_batch(std::span<const SuperBag> super_bags, Variant variant,
                                  const SimilarityTable* similarities);

/// Unnormalized f, g, h of one super-bag: g already carries its 1/t factor
/// and h its 1/t and 1/n_i factors, matching one summand of J.
struct ObjectiveTerms {
  double f = 0.0;
  double g = 0.0;
  double h = 0.0;
};

ObjectiveTerms superbag_terms(const BatchItem& item, const ModelParams& params,
                              const LossConfig& cfg);

/// Combines per-super-bag terms in order into J.
double combine_objective(std::span<const ObjectiveTerms> terms, const ModelParams& params,
                         const LossConfig& cfg);

double total_objective(std::span<const BatchItem> batch, const ModelParams& params,
                       const LossConfig& cfg);
/// Computes similarity weights on the fly for nmil_delta.
double total_objective(std::span<const SuperBag> batch, const ModelParams& params,
                       const LossConfig& cfg);

}  // namespace nmil
