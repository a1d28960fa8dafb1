// Analytic gradient of the training objective. See docs/gradient.md for the
// derivation.

#include <cmath>

#include "nmil/kernels.hpp"
#include "nmil/trainer.hpp"

namespace nmil {

namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += a * x[k];
}

void collapsed_gradient(const SuperBag& sb, const ModelParams& params, const LossConfig& cfg,
                        std::span<double> out) {
  const std::size_t dim = params.feature_dim();
  const bool noisy = params.variant() == Variant::rmil_nor;
  const double n = static_cast<double>(sb.num_instances());

  // dP/dw: mean -> (1/N) sum p(1-p) x ; noisy-OR -> prod(1-p) * sum p x
  std::vector<double> dP(dim, 0.0);
  std::vector<double> dh(dim, 0.0);
  double none = 1.0;
  double prob_sum = 0.0;
  for (const auto& bag : sb.bags) {
    for (const auto& x : bag.instances) {
      const double z = dot(params.weights_for_day(bag.day_index), x.features);
      const double p = sigmoid(z);
      prob_sum += p;
      none *= (1.0 - p);
      axpy(noisy ? p : p * (1.0 - p), x.features, dP);
      if (cfg.hinge_term) {
        const double s = hinge_sign(p, cfg.p0);
        if (cfg.m0 - s * z > 0.0) axpy(-s, x.features, dh);
      }
    }
  }
  const double P = noisy ? 1.0 - none : prob_sum / n;
  const double dP_scale = noisy ? none : 1.0 / n;

  auto w_out = out.subspan(0, dim);
  if (cfg.beta != 0.0) {
    const double df = superbag_loss_derivative(P, sb.label);
    if (df != 0.0) axpy(cfg.beta * df * dP_scale, dP, w_out);
  }
  if (cfg.hinge_term) axpy(1.0 / n, dh, w_out);
}

}  // namespace

void accumulate_superbag_gradient(const BatchItem& item, const ModelParams& params,
                                  const LossConfig& cfg, std::span<double> out) {
  const SuperBag& sb = *item.super_bag;
  if (is_collapsed(params.variant())) {
    collapsed_gradient(sb, params, cfg, out);
    return;
  }

  const std::size_t dim = params.feature_dim();
  const std::size_t t = sb.bags.size();
  const double inv_t = 1.0 / static_cast<double>(t);

  // Per day: bag probability and its gradient with respect to that day's block.
  std::vector<double> day_prob(t, 0.0);
  std::vector<double> day_grad(t * dim, 0.0);
  std::vector<double> hinge_grad(t * dim, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    const Bag& bag = sb.bags[i];
    const auto w = params.weights_for_day(bag.day_index);
    std::span<double> gi(day_grad.data() + i * dim, dim);
    std::span<double> hi(hinge_grad.data() + i * dim, dim);
    double prob_sum = 0.0;
    for (const auto& x : bag.instances) {
      const double z = dot(w, x.features);
      const double p = sigmoid(z);
      prob_sum += p;
      axpy(p * (1.0 - p), x.features, gi);
      if (cfg.hinge_term) {
        const double s = hinge_sign(p, cfg.p0);
        if (cfg.m0 - s * z > 0.0) axpy(-s, x.features, hi);
      }
    }
    const double inv_n = 1.0 / static_cast<double>(bag.instances.size());
    day_prob[i] = prob_sum * inv_n;
    for (double& v : gi) v *= inv_n;
    for (double& v : hi) v *= inv_n;
  }
  double P = 0.0;
  for (double p : day_prob) P += p;
  P /= static_cast<double>(t);

  auto block_of = [&](std::size_t i) {
    return out.subspan(params.block_for_day(sb.bags[i].day_index) * dim, dim);
  };
  auto day_span = [&](std::size_t i) {
    return std::span<const double>(day_grad.data() + i * dim, dim);
  };

  if (cfg.beta != 0.0) {
    const double df = superbag_loss_derivative(P, sb.label);
    if (df != 0.0) {
      for (std::size_t i = 0; i < t; ++i) axpy(cfg.beta * df * inv_t, day_span(i), block_of(i));
    }
  }
  if (cfg.crossbag_term) {
    for (std::size_t i = 1; i < t; ++i) {
      const double weight = item.similarity.empty() ? 1.0 : item.similarity[i];
      const double c = 2.0 * weight * (day_prob[i] - day_prob[i - 1]) * inv_t;
      if (c == 0.0) continue;
      axpy(c, day_span(i), block_of(i));
      axpy(-c, day_span(i - 1), block_of(i - 1));
    }
  }
  if (cfg.hinge_term) {
    for (std::size_t i = 0; i < t; ++i)
      axpy(inv_t, std::span<const double>(hinge_grad.data() + i * dim, dim), block_of(i));
  }
}

std::vector<double> gradient(std::span<const BatchItem> batch, const ModelParams& params,
                             const LossConfig& cfg) {
  if (batch.empty()) throw ValidationError("gradient needs a non-empty batch");
  std::vector<double> grad = kernels::omp::gradient_sum(batch, params, cfg);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const auto& w = params.coefficients();
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = grad[k] * inv_n + cfg.lambda * w[k];
  return grad;
}

std::vector<double> gradient(std::span<const SuperBag> batch, const ModelParams& params,
                             const LossConfig& cfg) {
  SimilarityTable sims;
  if (params.variant() == Variant::nmil_delta) sims = kernels::omp::similarity_table(batch);
  const auto items = make_batch(batch, params.variant(), &sims);
  return gradient(items, params, cfg);
}

FdCheckResult fd_check(std::span<const SuperBag> batch, const ModelParams& params,
                       const LossConfig& cfg, double step) {
  if (!(step > 0.0)) throw ValidationError("finite-difference step must be > 0");
  SimilarityTable sims;
  if (params.variant() == Variant::nmil_delta) sims = kernels::omp::similarity_table(batch);
  const auto items = make_batch(batch, params.variant(), &sims);
  const std::vector<double> analytic = gradient(items, params, cfg);

  // Points where the hinge is non-differentiable: the margin crossings
  // z = +-m0 and the sign switch at sigmoid(z) = p0.
  const double switch_point = std::log(cfg.p0 / (1.0 - cfg.p0));
  const double kinks[] = {cfg.m0, -cfg.m0, switch_point};
  constexpr double kKinkGuard = 1e-6;

  const std::size_t dim = params.feature_dim();
  FdCheckResult result;
  ModelParams probe = params;
  for (std::size_t idx = 0; idx < analytic.size(); ++idx) {
    const std::size_t b = idx / dim;
    const std::size_t k = idx % dim;

    bool near_kink = false;
    if (cfg.hinge_term) {
      for (const auto& sb : batch) {
        for (const auto& bag : sb.bags) {
          if (params.block_for_day(bag.day_index) != b) continue;
          for (const auto& x : bag.instances) {
            const double z = dot(params.block(b), x.features);
            const double reach = step * std::abs(x.features[k]) + kKinkGuard;
            for (double kink : kinks) near_kink = near_kink || std::abs(z - kink) <= reach;
          }
        }
      }
    }
    if (near_kink) {
      ++result.skipped_near_kink;
      continue;
    }

    const double original = probe.coefficients()[idx];
    probe.coefficients()[idx] = original + step;
    const double up = total_objective(items, probe, cfg);
    probe.coefficients()[idx] = original - step;
    const double down = total_objective(items, probe, cfg);
    probe.coefficients()[idx] = original;

    const double fd = (up - down) / (2.0 * step);
    const double err =
        std::abs(analytic[idx] - fd) / std::max(1e-8, std::abs(analytic[idx]) + std::abs(fd));
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.checked;
  }
  return result;
}

}  // namespace nmil
