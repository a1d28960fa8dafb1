#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nmil/corpus.hpp"
#include "nmil/evaluation.hpp"
#include "nmil/model.hpp"
#include "nmil/multiclass.hpp"
#include "nmil/precursor.hpp"
#include "nmil/synthgen.hpp"
#include "nmil/trainer.hpp"

using nlohmann::json;

namespace nmil::cli {

namespace {

constexpr const char* kFormats = R"(File formats
  dataset       newline-delimited JSON. Line 1 is a header
                {"schema":"nmil-dataset","version":1,"feature_dim":V,"history_days":h,
                 "lead_time":l,"class_names":[..]|null}
                followed by one super-bag per line
                {"event_id":str,"label":1|-1,"class_label":int|null,
                 "days":[[{"id":str,"features":[..],"title":str|null},..],..],
                 "target_doc":{..}|null}
  truth         one {"event_id":str,"signal_ids":[str..],"class_label":int|null} per line
  model         {"schema":"nmil-model","version":1,"variant":str,"feature_dim":V,
                 "history_days":h,"weights":[[..],..],"config":{..}}
  multi-model   {"schema":"nmil-multimodel","version":1,"class_names":[..],
                 "binary":<model>,"per_class":[<model>,..]}
  trace         CSV epoch,objective
  predictions   CSV event_id,label,probability (label is 1 or -1)
  classes       CSV event_id,class (class 0 means no event forecast)
  precursors    one {"event_id","label","tau","top_k","entries":[{"day","id",
                 "probability","title"}]} per line
  day table     CSV day,mean_relative_cosine
  samples       CSV population,value with population all or precursor
  sweep         CSV lead,history,metric,mean,std plus an optional JSON mirror

A --config file (TOML or INI) may set any flag; keys of a subcommand go in a
section named after it, e.g. [train] lr0 = 0.5. NMIL_SEED supplies --seed when
the flag is absent.
)";

struct Options {
  GenConfig gen;
  TrainConfig train;
  std::string variant = "nmil";
  std::string init = "zeros";
  std::uint64_t seed = 0;
  bool antipodal = false;
  bool no_intercept = false;

  std::string data, model, out = "-", truth, trace, predictions, json_out, day_table, samples;
  double tau = kDefaultTau;
  std::size_t top_k = 0;
  bool include_negatives = false;
  int folds = 3;
  int lead_max = 5;
  int history_max = 10;
  int jobs = 1;
  int classes = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t sample = 8;
};

void add_seed(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "RNG seed")->envname("NMIL_SEED")->capture_default_str();
}

void add_loss_flags(CLI::App* sub, Options& o) {
  LossConfig& l = o.train.loss;
  sub->add_option("--beta", l.beta, "weight of the super-bag log-loss")->capture_default_str();
  sub->add_option("--lambda", l.lambda, "L2 regularization strength")->capture_default_str();
  sub->add_option("--m0", l.m0, "instance hinge margin")->capture_default_str();
  sub->add_option("--p0", l.p0, "instance hinge sign threshold")->capture_default_str();
}

void add_train_flags(CLI::App* sub, Options& o) {
  add_loss_flags(sub, o);
  sub->add_option("--variant", o.variant, "nmil | nmil-delta | nmil-omega | rmil-nor | rmil-avg")
      ->capture_default_str();
  sub->add_option("--lr0", o.train.lr0, "initial learning rate")->capture_default_str();
  sub->add_option("--epochs", o.train.epochs, "passes over the data")->capture_default_str();
  sub->add_option("--batch-size", o.train.batch_size, "super-bags per update")->capture_default_str();
  sub->add_option("--init", o.init, "zeros | gaussian")->capture_default_str();
  sub->add_option("--init-scale", o.train.init_scale, "std of gaussian initial weights")
      ->capture_default_str();
  add_seed(sub, o);
}

void add_gen_flags(CLI::App* sub, Options& o) {
  GenConfig& g = o.gen;
  sub->add_option("--n-pos", g.n_pos, "positive super-bags")->capture_default_str();
  sub->add_option("--n-neg", g.n_neg, "negative super-bags")->capture_default_str();
  sub->add_option("--dim", g.feature_dim, "feature dimension")->capture_default_str();
  sub->add_option("--per-day-min", g.per_day_min, "fewest instances per day")->capture_default_str();
  sub->add_option("--per-day-max", g.per_day_max, "most instances per day")->capture_default_str();
  sub->add_option("--precursor-rate", g.precursor_rate, "mean share of signal instances in positives")
      ->capture_default_str();
  sub->add_option("--signal-shift", g.signal_shift, "distance of the signal mean from 0")
      ->capture_default_str();
  sub->add_option("--noise-std", g.noise_std, "instance noise std")->capture_default_str();
  sub->add_option("--ramp", g.ramp, "0 = flat day rates, 1 = rate proportional to day")
      ->capture_default_str();
  sub->add_option("--classes", g.num_classes, "event classes of positive super-bags")
      ->capture_default_str();
  sub->add_flag("--antipodal", o.antipodal, "two classes with opposite signal directions");
  sub->add_flag("--no-intercept", o.no_intercept, "do not fix the last feature at 1");
  sub->add_option("--lead-decay", g.lead_decay, "signal rate factor per extra lead day")
      ->capture_default_str();
}

void finalize(Options& o) {
  o.train.variant = parse_variant(o.variant);
  if (o.init == "zeros") o.train.init = InitKind::zeros;
  else if (o.init == "gaussian") o.train.init = InitKind::gaussian;
  else throw ValidationError("unknown init '" + o.init + "' (zeros | gaussian)");
  o.train.seed = o.seed;
  o.gen.seed = o.seed;
  o.gen.directions = o.antipodal ? DirectionLayout::antipodal : DirectionLayout::orthogonal;
  o.gen.intercept_feature = !o.no_intercept;
}

// Writes to the named file, or standard output for "-".
void emit(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  body(out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

Dataset load_input(const std::string& path) {
  LoadStats stats;
  Dataset ds = load_dataset(path, &stats);
  std::clog << "loaded " << ds.size() << " super-bags from " << path << '\n';
  return ds;
}

int cmd_generate(Options& o) {
  if (o.out == "-") throw ValidationError("generate needs --out");
  const std::string truth_path = o.truth.empty() ? o.out + ".truth" : o.truth;
  auto [ds, truth] = generate(o.gen);
  save_dataset(ds, o.out);
  save_truth(truth, truth_path);
  std::clog << "wrote " << ds.size() << " super-bags to " << o.out << " and truth to "
            << truth_path << '\n';
  return 0;
}

int cmd_train(Options& o) {
  if (o.out == "-") throw ValidationError("train needs --out for the model file");
  const Dataset ds = load_input(o.data);
  o.train.validate(ds.size());
  const TrainReport report = train(ds, o.train, {});
  save_model(report.final_params, o.out, o.train.to_json());
  if (!o.trace.empty()) emit(o.trace, [&](std::ostream& s) { write_trace_csv(report, s); });
  std::clog << "trained " << to_string(o.train.variant) << " for " << report.epochs_run
            << " epochs, final objective " << report.objective_trace.back() << '\n';
  return 0;
}

int cmd_predict(Options& o) {
  const ModelParams params = load_model(o.model);
  const Dataset ds = load_input(o.data);
  params.check_compatible(ds);
  emit(o.out, [&](std::ostream& s) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "event_id,label,probability\n";
    for (const auto& sb : ds.super_bags) {
      const double p = superbag_prob(params, sb);
      buf << sb.event_id << ',' << to_int(decide(p)) << ',' << p << '\n';
    }
    s << buf.str();
  });
  return 0;
}

int cmd_precursors(Options& o) {
  const ModelParams params = load_model(o.model);
  const Dataset ds = load_input(o.data);
  DiscoverOptions opts{o.tau, o.top_k, o.include_negatives};
  const auto reports = discover(ds, params, opts);
  emit(o.out, [&](std::ostream& s) { write_reports(reports, s); });
  if (!o.day_table.empty() || !o.samples.empty()) {
    const auto diag = similarity_diagnostics(reports, ds);
    if (!o.day_table.empty()) emit(o.day_table, [&](std::ostream& s) { write_day_table(diag, s); });
    if (!o.samples.empty()) emit(o.samples, [&](std::ostream& s) { write_samples(diag, s); });
  }
  std::size_t n = 0;
  for (const auto& r : reports) n += r.entries.size();
  std::clog << n << " precursors above tau " << o.tau << " in " << reports.size() << " events\n";
  return 0;
}

int infer_classes(const Dataset& ds) {
  if (ds.class_names) return static_cast<int>(ds.class_names->size());
  int k = 0;
  for (const auto& sb : ds.super_bags)
    if (sb.class_label) k = std::max(k, *sb.class_label);
  return k;
}

int cmd_train_mc(Options& o) {
  if (o.out == "-") throw ValidationError("train-mc needs --out for the model bundle");
  const Dataset ds = load_input(o.data);
  o.train.validate(ds.size());
  const int k = o.classes > 0 ? o.classes : infer_classes(ds);
  const MultiModel mm = train_multiclass(ds, o.train, k);
  save_multimodel(mm, o.out, o.train.to_json());
  std::clog << "trained binary gate and " << k << " class models\n";
  return 0;
}

int cmd_classify_mc(Options& o) {
  const MultiModel mm = load_multimodel(o.model);
  const Dataset ds = load_input(o.data);
  mm.binary.check_compatible(ds);
  emit(o.out, [&](std::ostream& s) {
    s << "event_id,class\n";
    for (const auto& sb : ds.super_bags) s << sb.event_id << ',' << classify(mm, sb) << '\n';
  });
  return 0;
}

// Splits "a,b,c" from the right into `fields` trailing columns plus the event id.
std::vector<std::string> split_row(const std::string& line, std::size_t fields, std::size_t line_no) {
  std::vector<std::string> out(fields + 1);
  std::size_t end = line.size();
  for (std::size_t f = fields; f > 0; --f) {
    const auto comma = line.rfind(',', end == 0 ? 0 : end - 1);
    if (comma == std::string::npos) throw ParseError(line_no, "expected " + std::to_string(fields + 1) + " columns");
    out[f] = line.substr(comma + 1, end - comma - 1);
    end = comma;
  }
  out[0] = line.substr(0, end);
  return out;
}

int parse_int(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line_no, "not an integer: '" + s + "'");
  }
}

int cmd_eval(Options& o) {
  const Dataset ds = load_input(o.data);
  std::ifstream in(o.predictions);
  if (!in) throw IoError("cannot open predictions '" + o.predictions + "'");
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const bool binary = header == "event_id,label,probability";
  if (!binary && header != "event_id,class")
    throw ParseError(1, "unrecognized predictions header '" + header + "'");

  std::map<std::string, int> predicted;
  std::string line;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto row = split_row(line, binary ? 2 : 1, line_no);
    if (!predicted.emplace(row[0], parse_int(row[1], line_no)).second)
      throw ParseError(line_no, "duplicate event '" + row[0] + "'");
  }

  auto lookup = [&](const SuperBag& sb) {
    auto it = predicted.find(sb.event_id);
    if (it == predicted.end()) throw ValidationError("no prediction for event '" + sb.event_id + "'");
    return it->second;
  };

  json result;
  if (binary) {
    std::vector<Label> preds, truth;
    for (const auto& sb : ds.super_bags) {
      preds.push_back(label_from_int(lookup(sb)));
      truth.push_back(sb.label);
    }
    result = metrics_to_json(compute_metrics(preds, truth));
  } else {
    const int k = o.classes > 0 ? o.classes : infer_classes(ds);
    std::vector<int> preds, truth;
    for (const auto& sb : ds.super_bags) {
      if (sb.label != Label::positive) continue;
      if (!sb.class_label) throw ValidationError("positive event '" + sb.event_id + "' has no class label");
      preds.push_back(lookup(sb));
      truth.push_back(*sb.class_label);
    }
    result = {{"weighted_f1", weighted_f1(preds, truth, k)},
              {"num_classes", k},
              {"evaluated", preds.size()}};
  }
  emit(o.out, [&](std::ostream& s) { s << result.dump(2) << '\n'; });
  return 0;
}

int cmd_sweep(Options& o) {
  SweepConfig sc{o.lead_max, o.history_max, o.folds, o.jobs};
  const GenConfig base = o.gen;
  const DatasetFamily family = [base](int lead, int history) {
    GenConfig g = base;
    g.lead_time = lead;
    g.history_days = history;
    return generate(g).first;
  };
  o.train.validate();
  std::clog << "sweeping " << sc.max_lead * sc.max_history << " cells with " << sc.jobs << " job(s)\n";
  const SweepResult result = sweep(family, o.train, sc);
  emit(o.out, [&](std::ostream& s) { write_sweep_csv(result, s); });
  if (!o.json_out.empty())
    emit(o.json_out, [&](std::ostream& s) { s << sweep_to_json(result).dump(2) << '\n'; });
  return 0;
}

int cmd_fd_check(Options& o) {
  const Dataset ds = load_input(o.data);
  if (o.sample < 1) throw ValidationError("--sample must be >= 1");
  if (!(o.step > 0.0)) throw ValidationError("--step must be > 0");
  o.train.loss.validate();

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(o.seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(o.sample, order.size()));
  const Dataset batch = subset(ds, order);

  const ModelParams params = initial_params(batch, o.train);
  const FdCheckResult r = fd_check(batch.super_bags, params, o.train.loss, o.step);
  const json out{{"variant", std::string(to_string(o.train.variant))},
                 {"super_bags", batch.size()},
                 {"step", o.step},
                 {"max_relative_error", r.max_relative_error},
                 {"checked", r.checked},
                 {"skipped_near_kink", r.skipped_near_kink}};
  emit(o.out, [&](std::ostream& s) { s << out.dump(2) << '\n'; });
  if (r.max_relative_error > o.tolerance) {
    std::cerr << "gradient check failed: relative error " << r.max_relative_error << " > "
              << o.tolerance << '\n';
    return 2;
  }
  return 0;
}

// Only sweep runs on more than one thread.
class ThreadLimit {
 public:
  explicit ThreadLimit(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadLimit() { omp_set_num_threads(saved_); }
  ThreadLimit(const ThreadLimit&) = delete;
  ThreadLimit& operator=(const ThreadLimit&) = delete;

 private:
  int saved_;
};

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Nested multiple-instance event forecasting", "nmil"};
  app.footer(kFormats);
  app.set_config("--config", "", "TOML or INI file with flag values");
  app.require_subcommand(1);

  std::map<std::string, Options> opts;
  std::map<std::string, std::function<int(Options&)>> handlers;
  auto sub = [&](const std::string& name, const std::string& help, std::function<int(Options&)> fn) {
    handlers[name] = std::move(fn);
    return std::pair<CLI::App*, Options*>{app.add_subcommand(name, help), &opts[name]};
  };

  {
    auto [s, o] = sub("generate", "write a synthetic dataset and its planted truth", cmd_generate);
    add_gen_flags(s, *o);
    s->add_option("--history", o->gen.history_days, "days per super-bag")->capture_default_str();
    s->add_option("--lead", o->gen.lead_time, "days between the last observed day and the event")
        ->capture_default_str();
    o->seed = o->gen.seed;
    add_seed(s, *o);
    s->add_option("-o,--out", o->out, "dataset file")->required();
    s->add_option("--truth", o->truth, "truth file (default <out>.truth)");
  }
  {
    auto [s, o] = sub("train", "fit a model with mini-batch SGD", cmd_train);
    add_train_flags(s, *o);
    s->add_option("-d,--data", o->data, "dataset file")->required();
    s->add_option("-o,--out", o->out, "model file")->required();
    s->add_option("--trace", o->trace, "objective trace CSV");
  }
  {
    auto [s, o] = sub("predict", "forecast every super-bag of a dataset", cmd_predict);
    s->add_option("-m,--model", o->model, "model file")->required();
    s->add_option("-d,--data", o->data, "dataset file")->required();
    s->add_option("-o,--out", o->out, "predictions CSV, - for stdout")->capture_default_str();
  }
  {
    auto [s, o] = sub("precursors", "list documents scored above tau", cmd_precursors);
    s->add_option("-m,--model", o->model, "model file")->required();
    s->add_option("-d,--data", o->data, "dataset file")->required();
    s->add_option("-o,--out", o->out, "precursor reports, - for stdout")->capture_default_str();
    s->add_option("--tau", o->tau, "probability threshold in [0, 1)")->capture_default_str();
    s->add_option("--top-k", o->top_k, "cap per day, 0 for none")->capture_default_str();
    s->add_flag("--include-negatives", o->include_negatives, "report negative super-bags too");
    s->add_option("--day-table", o->day_table, "per-day relative cosine CSV");
    s->add_option("--samples", o->samples, "relative cosine samples CSV");
  }
  {
    auto [s, o] = sub("train-mc", "fit the binary gate and one-vs-rest class models", cmd_train_mc);
    add_train_flags(s, *o);
    s->add_option("-d,--data", o->data, "dataset file")->required();
    s->add_option("-o,--out", o->out, "multi-model file")->required();
    s->add_option("--classes", o->classes, "number of classes (default from the dataset)");
  }
  {
    auto [s, o] = sub("classify-mc", "assign event classes with a multi-model", cmd_classify_mc);
    s->add_option("-m,--model", o->model, "multi-model file")->required();
    s->add_option("-d,--data", o->data, "dataset file")->required();
    s->add_option("-o,--out", o->out, "classes CSV, - for stdout")->capture_default_str();
  }
  {
    auto [s, o] = sub("eval", "score predictions or classes against dataset labels", cmd_eval);
    s->add_option("-p,--predictions", o->predictions, "predictions or classes CSV")->required();
    s->add_option("-d,--data", o->data, "dataset with true labels")->required();
    s->add_option("-o,--out", o->out, "metrics JSON, - for stdout")->capture_default_str();
    s->add_option("--classes", o->classes, "number of classes (default from the dataset)");
  }
  {
    auto [s, o] = sub("sweep", "cross-validate over a lead x history grid of synthetic data", cmd_sweep);
    add_train_flags(s, *o);
    add_gen_flags(s, *o);
    s->add_option("--lead-max", o->lead_max, "largest lead time")->capture_default_str();
    s->add_option("--history-max", o->history_max, "largest history length")->capture_default_str();
    s->add_option("--folds", o->folds, "cross-validation folds")->capture_default_str();
    s->add_option("--jobs", o->jobs, "cells trained concurrently")->capture_default_str();
    s->add_option("-o,--out", o->out, "sweep CSV, - for stdout")->capture_default_str();
    s->add_option("--json", o->json_out, "JSON mirror of the sweep");
  }
  {
    auto [s, o] = sub("fd-check", "compare the analytic gradient with finite differences", cmd_fd_check);
    o->init = "gaussian";
    o->train.init_scale = 0.5;
    add_train_flags(s, *o);
    s->add_option("-d,--data", o->data, "dataset file")->required();
    s->add_option("--sample", o->sample, "super-bags drawn from the dataset")->capture_default_str();
    s->add_option("--step", o->step, "central difference step")->capture_default_str();
    s->add_option("--tolerance", o->tolerance, "largest accepted relative error")->capture_default_str();
    s->add_option("-o,--out", o->out, "result JSON, - for stdout")->capture_default_str();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cout, std::cerr) == 0 ? 0 : 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  Options& o = opts.at(name);
  ThreadLimit threads(name == "sweep" ? std::max(o.jobs, 1) : 1);
  try {
    finalize(o);
    return handlers.at(name)(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const TrainingError& e) {
    std::cerr << "training failed at epoch " << e.epoch() << " (learning rate " << e.learning_rate()
              << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace nmil::cli
