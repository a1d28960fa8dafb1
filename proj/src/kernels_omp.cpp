#include <omp.h>

#include <cstdint>

#include "nmil/kernels.hpp"
#include "nmil/trainer.hpp"

namespace nmil::kernels::omp {

namespace {
// Below this many super-bags the fork/join overhead outweighs the work.
constexpr std::int64_t kParallelMin = 16;

// Exceptions must not escape an OpenMP region; capture the first and rethrow.
class ErrorSlot {
 public:
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
#pragma omp critical(nmil_error_slot)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};
}  // namespace

std::vector<double> superbag_probs(const ModelParams& params,
                                   std::span<const SuperBag> super_bags) {
  const auto n = static_cast<std::int64_t>(super_bags.size());
  std::vector<double> out(super_bags.size());
  ErrorSlot err;
#pragma omp parallel for schedule(static) if (n >= kParallelMin)
  for (std::int64_t s = 0; s < n; ++s) err.run([&] { out[s] = superbag_prob(params, super_bags[s]); });
  err.rethrow();
  return out;
}

InstanceProbTable instance_probs(const ModelParams& params, std::span<const SuperBag> super_bags) {
  const auto n = static_cast<std::int64_t>(super_bags.size());
  InstanceProbTable out(super_bags.size());
  ErrorSlot err;
#pragma omp parallel for schedule(dynamic, 4) if (n >= kParallelMin)
  for (std::int64_t s = 0; s < n; ++s) {
    err.run([&] {
      for (const auto& bag : super_bags[s].bags) {
        std::vector<double> day;
        day.reserve(bag.instances.size());
        for (const auto& x : bag.instances) day.push_back(instance_prob(params, x, bag.day_index));
        out[s].push_back(std::move(day));
      }
    });
  }
  err.rethrow();
  return out;
}

SimilarityTable similarity_table(std::span<const SuperBag> super_bags) {
  const auto n = static_cast<std::int64_t>(super_bags.size());
  SimilarityTable out(super_bags.size());
#pragma omp parallel for schedule(dynamic, 4) if (n >= kParallelMin)
  for (std::int64_t s = 0; s < n; ++s) out[s] = day_similarities(super_bags[s]);
  return out;
}

std::vector<ObjectiveTerms> objective_terms(std::span<const BatchItem> batch,
                                            const ModelParams& params, const LossConfig& cfg) {
  const auto n = static_cast<std::int64_t>(batch.size());
  std::vector<ObjectiveTerms> out(batch.size());
  ErrorSlot err;
#pragma omp parallel for schedule(static) if (n >= kParallelMin)
  for (std::int64_t s = 0; s < n; ++s) err.run([&] { out[s] = superbag_terms(batch[s], params, cfg); });
  err.rethrow();
  return out;
}

std::vector<double> gradient_sum(std::span<const BatchItem> batch, const ModelParams& params,
                                 const LossConfig& cfg) {
  const auto n = static_cast<std::int64_t>(batch.size());
  const std::size_t size = params.coefficients().size();
  // One row per super-bag, summed afterwards in batch order.
  std::vector<double> rows(batch.size() * size, 0.0);
  ErrorSlot err;
#pragma omp parallel for schedule(static) if (n >= kParallelMin)
  for (std::int64_t s = 0; s < n; ++s) {
    err.run([&] {
      accumulate_superbag_gradient(batch[s], params, cfg,
                                   std::span<double>(rows.data() + s * size, size));
    });
  }
  err.rethrow();

  std::vector<double> total(size, 0.0);
  for (std::int64_t s = 0; s < n; ++s)
    for (std::size_t k = 0; k < size; ++k) total[k] += rows[s * size + k];
  return total;
}

}  // namespace nmil::kernels::omp
