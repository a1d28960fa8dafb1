#include "nmil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "nmil/kernels.hpp"

using nlohmann::json;

namespace nmil {

void TrainConfig::validate(std::size_t dataset_size) const {
  loss.validate();
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ValidationError("lr0 must be finite and >= 0");
  if (init == InitKind::gaussian && !(init_scale > 0.0))
    throw ValidationError("init_scale must be > 0");
  if (dataset_size > 0 && static_cast<std::size_t>(batch_size) > dataset_size) {
    throw ValidationError("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                          std::to_string(dataset_size));
  }
}

double TrainConfig::learning_rate(std::uint64_t step) const noexcept {
  return lr0 / (1.0 + lr0 * loss.lambda * static_cast<double>(step));
}

json TrainConfig::to_json() const {
  return json{{"variant", std::string(to_string(variant))},
              {"beta", loss.beta},
              {"lambda", loss.lambda},
              {"m0", loss.m0},
              {"p0", loss.p0},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"lr0", lr0},
              {"lr_schedule", "lr0/(1+lr0*lambda*t)"},
              {"init", init == InitKind::zeros ? "zeros" : "gaussian"},
              {"init_scale", init_scale},
              {"seed", seed}};
}

namespace {

ModelParams make_initial(const Dataset& ds, const TrainConfig& tcfg, std::mt19937_64& rng) {
  ModelParams params(tcfg.variant, ds.feature_dim, ds.history_days);
  if (tcfg.init == InitKind::gaussian) {
    std::normal_distribution<double> normal(0.0, tcfg.init_scale);
    for (double& w : params.coefficients()) w = normal(rng);
  }
  return params;
}

}  // namespace

ModelParams initial_params(const Dataset& ds, const TrainConfig& tcfg) {
  std::mt19937_64 rng(tcfg.seed);
  return make_initial(ds, tcfg, rng);
}

TrainReport train(const Dataset& ds, const TrainConfig& tcfg, const UpdateObserver& on_update) {
  if (ds.super_bags.empty()) throw ValidationError("cannot train on an empty dataset");
  tcfg.validate(ds.size());

  std::mt19937_64 rng(tcfg.seed);
  TrainReport report;
  report.final_params = make_initial(ds, tcfg, rng);
  ModelParams& params = report.final_params;
  params.check_compatible(ds);

  SimilarityTable sims;
  if (tcfg.variant == Variant::nmil_delta) sims = kernels::omp::similarity_table(ds.super_bags);
  const std::vector<BatchItem> all = make_batch(ds.super_bags, tcfg.variant, &sims);

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<BatchItem> batch;
  batch.reserve(static_cast<std::size_t>(tcfg.batch_size));
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double rate = tcfg.learning_rate(step);
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(all[order[i]]);

      const std::vector<double> grad = gradient(batch, params, tcfg.loss);
      rate = tcfg.learning_rate(step);
      auto& w = params.coefficients();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= rate * grad[k];
      if (on_update) on_update(step, params);
      ++step;
    }

    const double objective = total_objective(all, params, tcfg.loss);
    if (!std::isfinite(objective)) {
      std::ostringstream msg;
      msg << "objective diverged at epoch " << epoch << " (learning rate " << rate << ")";
      throw TrainingError(epoch, rate, msg.str());
    }
    report.objective_trace.push_back(objective);
    report.epochs_run = epoch;
  }
  return report;
}

void write_trace_csv(const TrainReport& report, std::ostream& out) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "epoch,objective\n";
  for (std::size_t e = 0; e < report.objective_trace.size(); ++e)
    buf << (e + 1) << ',' << report.objective_trace[e] << '\n';
  out << buf.str();
}

}  // namespace nmil
