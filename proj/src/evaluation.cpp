#include "nmil/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <ostream>
#include <random>
#include <sstream>

#include "nmil/kernels.hpp"

using nlohmann::json;

namespace nmil {

namespace {
double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  m.accuracy = ratio(tp + tn, m.total());
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

Metrics compute_metrics(std::span<const Label> preds, std::span<const Label> truth) {
  if (preds.size() != truth.size()) {
    throw ValidationError("prediction count " + std::to_string(preds.size()) +
                          " does not match truth count " + std::to_string(truth.size()));
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == Label::positive;
    const bool t = truth[i] == Label::positive;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

double weighted_f1(std::span<const int> preds, std::span<const int> truth, int num_classes) {
  if (preds.size() != truth.size()) throw ValidationError("prediction/truth length mismatch");
  if (truth.empty()) return 0.0;
  double total = 0.0;
  for (int c = 1; c <= num_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == c;
      const bool t = truth[i] == c;
      support += t;
      if (p && t) ++tp;
      else if (p) ++fp;
      else if (t) ++fn;
    }
    if (support == 0) continue;
    total += ratio(support, truth.size()) * metrics_from_counts(tp, fp, 0, fn).f1;
  }
  return total;
}

double roc_auc(std::span<const double> relevant, std::span<const double> irrelevant) {
  if (relevant.empty() || irrelevant.empty())
    throw ValidationError("AUC needs both relevant and irrelevant items");
  std::vector<std::pair<double, bool>> all;
  all.reserve(relevant.size() + irrelevant.size());
  for (double s : relevant) all.emplace_back(s, true);
  for (double s : irrelevant) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Mann-Whitney U with midranks for ties.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(relevant.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(irrelevant.size()));
}

std::vector<Fold> kfold_split(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k must be >= 2");
  if (ds.size() < static_cast<std::size_t>(k))
    throw ValidationError("dataset has fewer super-bags than folds");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (ds.super_bags[i].label == Label::positive ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  std::vector<std::size_t> layout = pos;
  layout.insert(layout.end(), neg.begin(), neg.end());
  std::vector<int> fold_of(ds.size());
  for (std::size_t r = 0; r < layout.size(); ++r) fold_of[layout[r]] = static_cast<int>(r % k);

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int f = 0; f < k; ++f) (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

CrossValidation cross_validate(const Dataset& ds, const TrainConfig& tcfg, int k) {
  CrossValidation cv;
  for (const Fold& fold : kfold_split(ds, k, tcfg.seed)) {
    const Dataset train_set = subset(ds, fold.train);
    const Dataset test_set = subset(ds, fold.test);
    TrainReport report = train(train_set, tcfg);

    const auto probs = kernels::omp::superbag_probs(report.final_params, test_set.super_bags);
    std::vector<Label> preds, truth;
    std::vector<std::pair<std::size_t, double>> scores;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      preds.push_back(decide(probs[i]));
      truth.push_back(test_set.super_bags[i].label);
      scores.emplace_back(fold.test[i], probs[i]);
    }
    cv.folds.push_back(compute_metrics(preds, truth));
    cv.test_scores.push_back(std::move(scores));
    cv.models.push_back(std::move(report.final_params));
  }
  return cv;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

SweepResult sweep(const DatasetFamily& family, const TrainConfig& tcfg, const SweepConfig& cfg) {
  if (cfg.max_lead < 1 || cfg.max_history < 1) throw ValidationError("sweep grid must be non-empty");
  if (cfg.jobs < 1) throw ValidationError("jobs must be >= 1");

  SweepResult result;
  for (int l = 1; l <= cfg.max_lead; ++l)
    for (int h = 1; h <= cfg.max_history; ++h) result.cells.push_back({l, h, {}, {}, {}, {}, {}});

  const auto n = static_cast<std::int64_t>(result.cells.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.jobs) if (cfg.jobs > 1)
  for (std::int64_t c = 0; c < n; ++c) {
    try {
      SweepCell& cell = result.cells[c];
      const Dataset ds = family(cell.lead, cell.history);
      cell.folds = cross_validate(ds, tcfg, cfg.folds).folds;
      std::vector<double> acc, prec, rec, f1;
      for (const auto& m : cell.folds) {
        acc.push_back(m.accuracy);
        prec.push_back(m.precision);
        rec.push_back(m.recall);
        f1.push_back(m.f1);
      }
      cell.accuracy = summarize(acc);
      cell.precision = summarize(prec);
      cell.recall = summarize(rec);
      cell.f1 = summarize(f1);
    } catch (...) {
#pragma omp critical(nmil_sweep_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "lead,history,metric,mean,std\n";
  for (const auto& c : result.cells) {
    const std::pair<const char*, const Summary*> rows[] = {
        {"accuracy", &c.accuracy}, {"precision", &c.precision}, {"recall", &c.recall}, {"f1", &c.f1}};
    for (const auto& [name, s] : rows)
      buf << c.lead << ',' << c.history << ',' << name << ',' << s->mean << ',' << s->std << '\n';
  }
  out << buf.str();
}

json metrics_to_json(const Metrics& m) {
  return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
              {"f1", m.f1},             {"tp", m.tp},               {"fp", m.fp},
              {"tn", m.tn},             {"fn", m.fn}};
}

json sweep_to_json(const SweepResult& result) {
  json cells = json::array();
  auto summary = [](const Summary& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  for (const auto& c : result.cells) {
    json folds = json::array();
    for (const auto& m : c.folds) folds.push_back(metrics_to_json(m));
    cells.push_back({{"lead", c.lead},
                     {"history", c.history},
                     {"accuracy", summary(c.accuracy)},
                     {"precision", summary(c.precision)},
                     {"recall", summary(c.recall)},
                     {"f1", summary(c.f1)},
                     {"folds", std::move(folds)}});
  }
  return json{{"schema", "nmil-sweep"}, {"version", 1}, {"cells", std::move(cells)}};
}

}  // namespace nmil
