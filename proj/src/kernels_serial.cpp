#include "nmil/kernels.hpp"
#include "nmil/trainer.hpp"

namespace nmil::kernels::serial {

std::vector<double> superbag_probs(const ModelParams& params,
                                   std::span<const SuperBag> super_bags) {
  std::vector<double> out(super_bags.size());
  for (std::size_t s = 0; s < super_bags.size(); ++s) out[s] = superbag_prob(params, super_bags[s]);
  return out;
}

InstanceProbTable instance_probs(const ModelParams& params, std::span<const SuperBag> super_bags) {
  InstanceProbTable out(super_bags.size());
  for (std::size_t s = 0; s < super_bags.size(); ++s) {
    for (const auto& bag : super_bags[s].bags) {
      std::vector<double> day;
      day.reserve(bag.instances.size());
      for (const auto& x : bag.instances) day.push_back(instance_prob(params, x, bag.day_index));
      out[s].push_back(std::move(day));
    }
  }
  return out;
}

SimilarityTable similarity_table(std::span<const SuperBag> super_bags) {
  SimilarityTable out(super_bags.size());
  for (std::size_t s = 0; s < super_bags.size(); ++s) out[s] = day_similarities(super_bags[s]);
  return out;
}

std::vector<ObjectiveTerms> objective_terms(std::span<const BatchItem> batch,
                                            const ModelParams& params, const LossConfig& cfg) {
  std::vector<ObjectiveTerms> out(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) out[s] = superbag_terms(batch[s], params, cfg);
  return out;
}

std::vector<double> gradient_sum(std::span<const BatchItem> batch, const ModelParams& params,
                                 const LossConfig& cfg) {
  const std::size_t size = params.coefficients().size();
  std::vector<double> total(size, 0.0);
  std::vector<double> one(size);
  for (const auto& item : batch) {
    std::fill(one.begin(), one.end(), 0.0);
    accumulate_superbag_gradient(item, params, cfg, one);
    for (std::size_t k = 0; k < size; ++k) total[k] += one[k];
  }
  return total;
}

}  // namespace nmil::kernels::serial
