#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "nmil/precursor.hpp"
#include "nmil/synthgen.hpp"
#include "nmil/trainer.hpp"
#include "support.hpp"

using namespace nmil;
using namespace nmil::testing;

namespace {

// Instance j of the single day scores logit(probs[j]) under w = (1).
SuperBag one_day(const std::vector<double>& probs) {
  std::vector<FeatureVector> day;
  for (double p : probs) day.push_back({std::log(p / (1.0 - p))});
  return superbag("ev", Label::positive, {day});
}

std::set<std::string> ids_of(const std::vector<PrecursorReport>& reports) {
  std::set<std::string> out;
  for (const auto& r : reports)
    for (const auto& e : r.entries) out.insert(r.event_id + "|" + e.instance_id);
  return out;
}

}  // namespace

TEST_CASE("threshold then sort descending") {
  const SuperBag sb = one_day({0.9, 0.6, 0.8});
  const double probs[] = {0.9, 0.6, 0.8};
  const auto kept = rank_day(sb.bags[0], probs, 0.7, 0);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].probability == 0.9);
  CHECK(kept[1].probability == 0.8);
  CHECK(kept[0].instance_id == "ev/d1/1");
  CHECK(kept[1].instance_id == "ev/d1/3");
}

TEST_CASE("a day with nothing above tau still yields a report") {
  const Dataset ds = dataset_of({one_day({0.3, 0.7, 0.1})}, 1, 1);
  const auto p = ModelParams::from_blocks(Variant::nmil, 1, {{1.0}});
  const auto reports = discover(ds, p, {0.7, 0, false});
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].entries.empty());
  CHECK(reports[0].event_id == "ev");
}

TEST_CASE("ties break by instance id and top_k truncates") {
  Bag bag{2, {inst("b", {0}), inst("c", {0}), inst("a", {0})}};
  const double probs[] = {0.8, 0.9, 0.8};
  const auto kept = rank_day(bag, probs, 0.5, 2);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].instance_id == "c");
  CHECK(kept[1].instance_id == "a");
  CHECK(kept[0].day == 2);
}

TEST_CASE("negatives are skipped unless requested") {
  const Dataset ds = random_dataset(3, 6, 2, 2, 1, 3);
  const ModelParams p(Variant::nmil, 2, 2);
  CHECK(discover(ds, p, {0.0, 0, false}).size() == 3);
  CHECK(discover(ds, p, {0.0, 0, true}).size() == 6);
}

TEST_CASE("tau 0 lists every instance exactly once") {
  const Dataset ds = random_dataset(5, 8, 3, 3, 1, 5);
  const ModelParams p = ModelParams::from_blocks(Variant::nmil_omega, 3, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto reports = discover(ds, p, {0.0, 0, true});
  std::size_t total = 0;
  for (const auto& sb : ds.super_bags) total += sb.num_instances();
  std::size_t listed = 0;
  for (const auto& r : reports) listed += r.entries.size();
  CHECK(listed == total);
  CHECK(ids_of(reports).size() == total);
}

TEST_CASE("raising tau never adds an entry, and entries respect their invariants") {
  const Dataset ds = random_dataset(6, 10, 3, 2, 2, 8);
  const ModelParams p = ModelParams::from_blocks(Variant::nmil, 2, {{1.5, -0.5, 0.8}});
  std::set<std::string> prev;
  bool first = true;
  for (double tau : {0.5, 0.6, 0.7, 0.8, 0.9}) {
    for (std::size_t k : {std::size_t{0}, std::size_t{2}}) {
      const auto reports = discover(ds, p, {tau, k, false});
      for (const auto& r : reports) {
        std::map<int, std::size_t> per_day;
        int last_day = 0;
        for (std::size_t i = 0; i < r.entries.size(); ++i) {
          const auto& e = r.entries[i];
          CHECK(e.probability > tau);
          CHECK(e.day >= last_day);
          if (i > 0 && r.entries[i - 1].day == e.day) CHECK(r.entries[i - 1].probability >= e.probability);
          last_day = e.day;
          ++per_day[e.day];
        }
        if (k > 0)
          for (const auto& [day, n] : per_day) CHECK(n <= k);
      }
    }
    const auto now = ids_of(discover(ds, p, {tau, 0, false}));
    if (!first)
      for (const auto& id : now) CHECK(prev.count(id) == 1);
    prev = now;
    first = false;
  }
}

TEST_CASE("discover validates tau and the model shape") {
  const Dataset ds = random_dataset(1, 2, 3, 2, 1, 2);
  CHECK_THROWS_AS(discover(ds, ModelParams(Variant::nmil, 3, 2), {1.0, 0, false}), ValidationError);
  CHECK_THROWS_AS(discover(ds, ModelParams(Variant::nmil, 3, 2), {-0.1, 0, false}), ValidationError);
  CHECK_THROWS_AS(discover(ds, ModelParams(Variant::nmil, 4, 2), {}), ValidationError);
}

TEST_CASE("relative cosine: identical target scores 1, orthogonal target scores 0") {
  SuperBag sb = superbag("ev", Label::positive, {{{1.0, 0.0}, {1.0, 1.0}}, {{0.0, 2.0}}});
  sb.target_doc = inst("ev/target", {1.0, 0.0});
  SuperBag flat = superbag("flat", Label::positive, {{{0.0, 1.0}}, {{0.0, 3.0}, {0.0, -2.0}}});
  flat.target_doc = inst("flat/target", {5.0, 0.0});
  const Dataset ds = dataset_of({sb, flat}, 2, 2);
  const auto reports = discover(ds, ModelParams(Variant::nmil, 2, 2), {0.0, 0, false});
  const auto diag = similarity_diagnostics(reports, ds);

  REQUIRE(diag.all.size() == 6);
  CHECK(diag.all[0] == 1.0);
  CHECK(diag.all[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(diag.all[2] == 0.0);
  for (std::size_t i = 3; i < 6; ++i) CHECK(diag.all[i] == 0.0);
  // Day means averaged over events: day 1 = ((1 + 1/sqrt2)/2 + 0) / 2, day 2 = 0.
  REQUIRE(diag.day_mean.size() == 2);
  CHECK(diag.day_mean[0] == doctest::Approx((1.0 + 1.0 / std::sqrt(2.0)) / 4.0));
  CHECK(diag.day_mean[1] == 0.0);
  CHECK(diag.precursors.size() == 6);
}

TEST_CASE("diagnostics name events missing a target document") {
  const Dataset ds = random_dataset(2, 4, 2, 2, 1, 2);
  const auto reports = discover(ds, ModelParams(Variant::nmil, 2, 2), {});
  try {
    similarity_diagnostics(reports, ds);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("e0") != std::string::npos);
    CHECK(std::string(e.what()).find("e2") != std::string::npos);
  }
}

TEST_CASE("precursors sit closer to the target than documents at large") {
  GenConfig g;
  g.n_pos = 40;
  g.n_neg = 40;
  const Dataset ds = generate(g).first;
  const TrainReport r = train(ds, TrainConfig{});
  const auto diag = similarity_diagnostics(discover(ds, r.final_params, {}), ds);
  REQUIRE(!diag.precursors.empty());
  auto avg = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  CHECK(avg(diag.precursors) > avg(diag.all));
}

TEST_CASE("report and table formats") {
  PrecursorReport r{"ev", Label::positive, 0.7, 3, {{1, "a", 0.75, std::string("t")}, {2, "b", 0.8, {}}}};
  std::stringstream s;
  write_reports(std::vector{r}, s);
  CHECK(s.str() ==
        R"({"entries":[{"day":1,"id":"a","probability":0.75,"title":"t"},{"day":2,"id":"b","probability":0.8,"title":null}],"event_id":"ev","label":1,"tau":0.7,"top_k":3})"
        "\n");
  const auto back = read_reports(s);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);

  SimilarityDiagnostics d{{0.5, 0.25}, {0.5}, {1.0}};
  std::ostringstream t, u;
  write_day_table(d, t);
  write_samples(d, u);
  CHECK(t.str() == "day,mean_relative_cosine\n1,0.5\n2,0.25\n");
  CHECK(u.str() == "population,value\nall,0.5\nprecursor,1\n");
}
