#pragma once

// Mini-batch SGD on the objective, its analytic gradient, and a
// central-difference gradient audit.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmil/corpus.hpp"
#include "nmil/model.hpp"
#include "nmil/objective.hpp"

namespace nmil {

/// Non-finite objective during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, double learning_rate, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), learning_rate_(learning_rate) {}
  int epoch() const noexcept { return epoch_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  int epoch_;
  double learning_rate_;
};

enum class InitKind { zeros, gaussian };

struct TrainConfig {
  LossConfig loss;
  Variant variant = Variant::nmil;
  int epochs = 50;
  int batch_size = 8;
  double lr0 = 0.1;
  InitKind init = InitKind::zeros;
  double init_scale = 0.01;
  std::uint64_t seed = 0;

  /// Checks every field; dataset_size > 0 also checks batch_size <= n.
  void validate(std::size_t dataset_size = 0) const;

  /// eta_t = lr0 / (1 + lr0 * lambda * t), t counting updates from 0.
  double learning_rate(std::uint64_t step) const noexcept;

  nlohmann::json to_json() const;
};

struct TrainReport {
  std::vector<double> objective_trace;
  ModelParams final_params;
  int epochs_run = 0;

  bool operator==(const TrainReport&) const = default;
};

/// Called after every parameter update with the global update index.
using UpdateObserver = std::function<void(std::uint64_t step, const ModelParams& params)>;

/// Adds one super-bag's contribution to the unnormalized gradient:
/// beta * df/dw + dg/dw + dh/dw (no 1/n, no regularizer).
void accumulate_superbag_gradient(const BatchItem& item, const ModelParams& params,
                                  const LossConfig& cfg, std::span<double> out);

/// Gradient of total_objective, laid out like ModelParams::coefficients().
std::vector<double> gradient(std::span<const BatchItem> batch, const ModelParams& params,
                             const LossConfig& cfg);
std::vector<double> gradient(std::span<const SuperBag> batch, const ModelParams& params,
                             const LossConfig& cfg);

ModelParams initial_params(const Dataset& ds, const TrainConfig& tcfg);

TrainReport train(const Dataset& ds, const TrainConfig& tcfg,
                  const UpdateObserver& on_update = {});

struct FdCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_near_kink = 0;
};

/// Compares the analytic gradient against central differences. Coordinates
/// whose perturbation could cross a hinge kink are skipped.
FdCheckResult fd_check(std::span<const SuperBag> batch, const ModelParams& params,
                       const LossConfig& cfg, double step);

/// CSV with header `epoch,objective`, epochs numbered from 1.
void write_trace_csv(const TrainReport& report, std::ostream& out);

}  // namespace nmil
