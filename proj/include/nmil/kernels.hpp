#pragma once

// Data-parallel loops over super-bags.
//
// Every kernel exists twice with the same signature: kernels::serial is the
// plain reference loop, kernels::omp distributes super-bags across OpenMP
// threads. Per-super-bag results land in fixed slots and any reduction runs
// afterwards in index order, so both produce bit-identical output regardless
// of thread count. Library code calls the omp versions; tests hold them to
// the serial ones.

#include <span>
#include <vector>

#include "nmil/corpus.hpp"
#include "nmil/model.hpp"
#include "nmil/objective.hpp"

namespace nmil::kernels {

/// [super-bag][day][instance] probabilities.
using InstanceProbTable = std::vector<std::vector<std::vector<double>>>;

namespace serial {
std::vector<double> superbag_probs(const ModelParams& params,
                                   std::span<const SuperBag> super_bags);
InstanceProbTable instance_probs(const ModelParams& params, std::span<const SuperBag> super_bags);
SimilarityTable similarity_table(std::span<const SuperBag> super_bags);
std::vector<ObjectiveTerms> objective_terms(std::span<const BatchItem> batch,
                                            const ModelParams& params, const LossConfig& cfg);
/// Sum of per-super-bag gradient contributions, accumulated in batch order.
std::vector<double> gradient_sum(std::span<const BatchItem> batch, const ModelParams& params,
                                 const LossConfig& cfg);
}  // namespace serial

namespace omp {
std::vector<double> superbag_probs(const ModelParams& params,
                                   std::span<const SuperBag> super_bags);
InstanceProbTable instance_probs(const ModelParams& params, std::span<const SuperBag> super_bags);
SimilarityTable similarity_table(std::span<const SuperBag> super_bags);
std::vector<ObjectiveTerms> objective_terms(std::span<const BatchItem> batch,
                                            const ModelParams& params, const LossConfig& cfg);
std::vector<double> gradient_sum(std::span<const BatchItem> batch, const ModelParams& params,
                                 const LossConfig& cfg);
}  // namespace omp

}  // namespace nmil::kernels
