#include "nmil/objective.hpp"

#include <algorithm>
#include <cmath>

#include "nmil/kernels.hpp"

namespace nmil {

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(m0 > 0.0)) throw ValidationError("m0 must be > 0");
  if (!(p0 > 0.0 && p0 < 1.0)) throw ValidationError("p0 must lie in (0, 1)");
}

double clamp_prob(double p) noexcept { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

double superbag_loss(double P, Label y) noexcept {
  const double c = clamp_prob(P);
  return y == Label::positive ? -std::log(c) : -std::log(1.0 - c);
}

double superbag_loss_derivative(double P, Label y) noexcept {
  if (P < kProbEpsilon || P > 1.0 - kProbEpsilon) return 0.0;
  return y == Label::positive ? -1.0 / P : 1.0 / (1.0 - P);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) noexcept {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double bag_similarity(const Bag& prev, const Bag& cur) noexcept {
  double total = 0.0;
  for (const auto& a : prev.instances)
    for (const auto& b : cur.instances) total += cosine_similarity(a.features, b.features);
  const double pairs = static_cast<double>(prev.instances.size() * cur.instances.size());
  return pairs > 0.0 ? std::max(0.0, total / pairs) : 0.0;
}

std::vector<double> day_similarities(const SuperBag& sb) {
  std::vector<double> out(sb.bags.size(), 0.0);
  for (std::size_t i = 1; i < sb.bags.size(); ++i) out[i] = bag_similarity(sb.bags[i - 1], sb.bags[i]);
  return out;
}

double crossbag_cost(double prev_prob, double cur_prob, double weight) noexcept {
  const double gap = cur_prob - prev_prob;
  return weight * gap * gap;
}

double crossbag_cost(const Bag& prev, const Bag& cur, const ModelParams& params, bool weighted) {
  const double weight = weighted ? bag_similarity(prev, cur) : 1.0;
  return crossbag_cost(bag_prob(params, prev), bag_prob(params, cur), weight);
}

double hinge_from_score(double score, const LossConfig& cfg) noexcept {
  return std::max(0.0, cfg.m0 - hinge_sign(sigmoid(score), cfg.p0) * score);
}

double instance_hinge(const Instance& x, const ModelParams& params, int day,
                      const LossConfig& cfg) {
  return hinge_from_score(instance_score(params, x, day), cfg);
}

double regularizer(const ModelParams& params) noexcept {
  double s = 0.0;
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    auto w = params.block(b);
    s += 0.5 * dot(w, w);
  }
  return s;
}

std::vector<BatchItem> make_batch(std::span<const SuperBag> super_bags, Variant variant,
                                  const SimilarityTable* similarities) {
  std::vector<BatchItem> items;
  items.reserve(super_bags.size());
  const bool weighted = variant == Variant::nmil_delta && similarities != nullptr;
  for (std::size_t i = 0; i < super_bags.size(); ++i) {
    BatchItem item{&super_bags[i], {}};
    if (weighted) item.similarity = (*similarities)[i];
    items.push_back(item);
  }
  return items;
}

ObjectiveTerms superbag_terms(const BatchItem& item, const ModelParams& params,
                              const LossConfig& cfg) {
  const SuperBag& sb = *item.super_bag;
  ObjectiveTerms terms;

  if (is_collapsed(params.variant())) {
    std::vector<double> probs;
    probs.reserve(sb.num_instances());
    double hinge = 0.0;
    for (const auto& bag : sb.bags) {
      for (const auto& x : bag.instances) {
        const double z = dot(params.weights_for_day(bag.day_index), x.features);
        probs.push_back(sigmoid(z));
        if (cfg.hinge_term) hinge += hinge_from_score(z, cfg);
      }
    }
    const double P = params.variant() == Variant::rmil_nor ? noisy_or(probs) : mean(probs);
    terms.f = superbag_loss(P, sb.label);
    terms.h = hinge / static_cast<double>(probs.size());
    return terms;
  }

  const double t = static_cast<double>(sb.bags.size());
  std::vector<double> day_probs(sb.bags.size());
  double hinge = 0.0;
  for (std::size_t i = 0; i < sb.bags.size(); ++i) {
    const Bag& bag = sb.bags[i];
    const auto w = params.weights_for_day(bag.day_index);
    double prob_sum = 0.0;
    double day_hinge = 0.0;
    for (const auto& x : bag.instances) {
      const double z = dot(w, x.features);
      prob_sum += sigmoid(z);
      if (cfg.hinge_term) day_hinge += hinge_from_score(z, cfg);
    }
    const double n_i = static_cast<double>(bag.instances.size());
    day_probs[i] = prob_sum / n_i;
    hinge += day_hinge / n_i;
  }
  double P = 0.0;
  for (double p : day_probs) P += p;
  P /= t;

  terms.f = superbag_loss(P, sb.label);
  if (cfg.crossbag_term) {
    double g = 0.0;
    for (std::size_t i = 1; i < day_probs.size(); ++i) {
      const double weight = item.similarity.empty() ? 1.0 : item.similarity[i];
      g += crossbag_cost(day_probs[i - 1], day_probs[i], weight);
    }
    terms.g = g / t;
  }
  terms.h = hinge / t;
  return terms;
}

double combine_objective(std::span<const ObjectiveTerms> terms, const ModelParams& params,
                         const LossConfig& cfg) {
  double f = 0.0, g = 0.0, h = 0.0;
  for (const auto& term : terms) {
    f += term.f;
    g += term.g;
    h += term.h;
  }
  const double n = static_cast<double>(terms.size());
  return cfg.beta * f / n + g / n + h / n + cfg.lambda * regularizer(params);
}

double total_objective(std::span<const BatchItem> batch, const ModelParams& params,
                       const LossConfig& cfg) {
  if (batch.empty()) throw ValidationError("objective needs a non-empty batch");
  const auto terms = kernels::omp::objective_terms(batch, params, cfg);
  return combine_objective(terms, params, cfg);
}

double total_objective(std::span<const SuperBag> batch, const ModelParams& params,
                       const LossConfig& cfg) {
  SimilarityTable sims;
  if (params.variant() == Variant::nmil_delta) sims = kernels::omp::similarity_table(batch);
  const auto items = make_batch(batch, params.variant(), &sims);
  return total_objective(items, params, cfg);
}

}  // namespace nmil
