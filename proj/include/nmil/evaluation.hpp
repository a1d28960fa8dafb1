#pragma once

// Forecast metrics, stratified k-fold cross-validation and the
// lead-time x history-days sweep.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmil/corpus.hpp"
#include "nmil/trainer.hpp"

namespace nmil {

/// Confusion counts and derived rates; +1 is the positive class. Any rate
/// with a zero denominator is reported as 0.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
Metrics compute_metrics(std::span<const Label> preds, std::span<const Label> truth);

/// Support-weighted mean of per-class one-vs-rest F1 over classes 1..K,
/// support taken from truth. A prediction of 0 means "no class" and only
/// counts as a miss for the true class.
double weighted_f1(std::span<const int> preds, std::span<const int> truth, int num_classes);

/// Probability that a relevant item outscores an irrelevant one (ROC AUC);
/// ties count half.
double roc_auc(std::span<const double> relevant, std::span<const double> irrelevant);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: positives and negatives are shuffled separately with the
/// seed, laid out positives first, and position r goes to test fold r mod k.
std::vector<Fold> kfold_split(const Dataset& ds, int k, std::uint64_t seed);

struct CrossValidation {
  std::vector<Metrics> folds;
  /// (event index, P) for every test super-bag, by fold.
  std::vector<std::vector<std::pair<std::size_t, double>>> test_scores;
  std::vector<ModelParams> models;
};

CrossValidation cross_validate(const Dataset& ds, const TrainConfig& tcfg, int k);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across folds
};
Summary summarize(std::span<const double> values);

struct SweepCell {
  int lead = 1;
  int history = 1;
  std::vector<Metrics> folds;
  Summary accuracy, precision, recall, f1;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // lead-major, then history
};

struct SweepConfig {
  int max_lead = 5;
  int max_history = 10;
  int folds = 3;
  int jobs = 1;
};

/// Builds the dataset for one (lead, history) cell. Must be safe to call
/// concurrently when jobs > 1.
using DatasetFamily = std::function<Dataset(int lead, int history)>;

SweepResult sweep(const DatasetFamily& family, const TrainConfig& tcfg, const SweepConfig& cfg);

/// `lead,history,metric,mean,std`
void write_sweep_csv(const SweepResult& result, std::ostream& out);
nlohmann::json sweep_to_json(const SweepResult& result);
nlohmann::json metrics_to_json(const Metrics& m);

}  // namespace nmil
