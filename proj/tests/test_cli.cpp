#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "support.hpp"

using namespace nmil::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kData = NMIL_TEST_DATA;

int run(std::vector<std::string> args) { return nmil::cli::run(args); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    // Split from the right: only the first column may hold commas.
    std::vector<std::string> row;
    const auto last = line.rfind(',');
    const auto mid = line.rfind(',', last - 1);
    row = {line.substr(0, mid), line.substr(mid + 1, last - mid - 1), line.substr(last + 1)};
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::string> small_gen(const fs::path& out) {
  return {"generate", "-o", out.string(), "--n-pos", "12", "--n-neg", "12", "--dim", "5", "--history", "3",
          "--per-day-min", "2", "--per-day-max", "5"};
}

}  // namespace

TEST_CASE("predict reproduces the hand-computed golden predictions") {
  const fs::path dir = scratch_dir("cli-golden");
  const fs::path out = dir / "pred.csv";
  REQUIRE(run({"predict", "-m", (kData / "tiny_model.json").string(), "-d", (kData / "tiny.ndjson").string(), "-o",
               out.string()}) == 0);
  const auto got = read_csv(out);
  const auto want = read_csv(kData / "tiny_predictions.csv");
  REQUIRE(got.size() == want.size());
  CHECK(got[0] == want[0]);
  for (std::size_t r = 1; r < want.size(); ++r) {
    CAPTURE(want[r][0]);
    CHECK(got[r][0] == want[r][0]);
    CHECK(got[r][1] == want[r][1]);
    CHECK(std::stod(got[r][2]) == doctest::Approx(std::stod(want[r][2])).epsilon(1e-9));
  }
}

TEST_CASE("eval scores the golden predictions") {
  const fs::path out = scratch_dir("cli-eval") / "metrics.json";
  REQUIRE(run({"eval", "-p", (kData / "tiny_predictions.csv").string(), "-d", (kData / "tiny.ndjson").string(), "-o",
               out.string()}) == 0);
  const auto m = read_json(out);
  // a is a hit, b a correct rejection, c a miss.
  CHECK(m.at("accuracy").get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK(m.at("precision").get<double>() == 1.0);
  CHECK(m.at("recall").get<double>() == 0.5);
}

TEST_CASE("generate and train are byte-identical across reruns") {
  const fs::path dir = scratch_dir("cli-rerun");
  std::vector<std::string> contents;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = dir / ("d" + std::to_string(rep) + ".ndjson");
    const fs::path m = dir / ("m" + std::to_string(rep) + ".json");
    const fs::path t = dir / ("t" + std::to_string(rep) + ".csv");
    REQUIRE(run(small_gen(d)) == 0);
    REQUIRE(run({"train", "-d", d.string(), "-o", m.string(), "--trace", t.string(), "--epochs", "5", "--init",
                 "gaussian", "--seed", "4"}) == 0);
    contents.push_back(slurp(d) + slurp(fs::path(d.string() + ".truth")) + slurp(m) + slurp(t));
  }
  CHECK(contents[0] == contents[1]);
}

TEST_CASE("nmil-omega on one-day data predicts exactly like nmil") {
  const fs::path dir = scratch_dir("cli-omega");
  const fs::path d = dir / "d.ndjson";
  auto gen = small_gen(d);
  gen[std::find(gen.begin(), gen.end(), "--history") - gen.begin() + 1] = "1";
  REQUIRE(run(gen) == 0);
  std::vector<std::string> preds;
  for (const char* v : {"nmil", "nmil-omega"}) {
    const fs::path m = dir / (std::string(v) + ".json");
    const fs::path p = dir / (std::string(v) + ".csv");
    REQUIRE(run({"train", "-d", d.string(), "-o", m.string(), "--variant", v, "--epochs", "4"}) == 0);
    REQUIRE(run({"predict", "-m", m.string(), "-d", d.string(), "-o", p.string()}) == 0);
    preds.push_back(slurp(p));
  }
  CHECK(preds[0] == preds[1]);
}

TEST_CASE("sweep writes one row per cell and metric") {
  const fs::path dir = scratch_dir("cli-sweep");
  const fs::path csv = dir / "sweep.csv";
  const fs::path js = dir / "sweep.json";
  REQUIRE(run({"sweep", "--lead-max", "5", "--history-max", "10", "--n-pos", "6", "--n-neg", "6", "--dim", "4",
               "--per-day-min", "1", "--per-day-max", "2", "--epochs", "1", "--batch-size", "4", "-o",
               csv.string(), "--json", js.string()}) == 0);
  const auto rows = read_csv(csv);
  REQUIRE(rows.size() == 201);
  std::map<std::string, int> per_metric;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    // Columns: lead,history,metric,mean,std -> the right split puts metric in the first field's tail.
    const std::string& head = rows[r][0];
    per_metric[head.substr(head.rfind(',') + 1)]++;
  }
  CHECK(per_metric.size() == 4);
  for (const auto& [metric, n] : per_metric) CHECK(n == 50);
  CHECK(read_json(js).at("cells").size() == 50);
}

TEST_CASE("multi-class commands and class evaluation") {
  const fs::path dir = scratch_dir("cli-mc");
  const fs::path d = dir / "d.ndjson";
  auto gen = small_gen(d);
  gen.insert(gen.end(), {"--classes", "3"});
  REQUIRE(run(gen) == 0);
  REQUIRE(run({"train-mc", "-d", d.string(), "-o", (dir / "mm.json").string(), "--epochs", "3"}) == 0);
  REQUIRE(run({"classify-mc", "-m", (dir / "mm.json").string(), "-d", d.string(), "-o",
               (dir / "cls.csv").string()}) == 0);
  REQUIRE(run({"eval", "-p", (dir / "cls.csv").string(), "-d", d.string(), "-o", (dir / "e.json").string()}) == 0);
  const auto e = read_json(dir / "e.json");
  CHECK(e.at("num_classes") == 3);
  CHECK(e.at("evaluated") == 12);
  CHECK(e.at("weighted_f1").get<double>() >= 0.0);
}

TEST_CASE("precursors and fd-check run on generated data") {
  const fs::path dir = scratch_dir("cli-prec");
  const fs::path d = dir / "d.ndjson";
  REQUIRE(run(small_gen(d)) == 0);
  REQUIRE(run({"train", "-d", d.string(), "-o", (dir / "m.json").string()}) == 0);
  REQUIRE(run({"precursors", "-m", (dir / "m.json").string(), "-d", d.string(), "-o", (dir / "r.ndjson").string(),
               "--tau", "0.5", "--day-table", (dir / "days.csv").string()}) == 0);
  CHECK(slurp(dir / "days.csv").rfind("day,mean_relative_cosine\n", 0) == 0);
  REQUIRE(run({"fd-check", "-d", d.string(), "-o", (dir / "fd.json").string(), "--variant", "nmil-omega"}) == 0);
  CHECK(read_json(dir / "fd.json").at("max_relative_error").get<double>() <= 1e-4);
}

TEST_CASE("config file and seed environment variable") {
  const fs::path dir = scratch_dir("cli-config");
  {
    std::ofstream cfg(dir / "gen.toml");
    cfg << "[generate]\nn-pos = 3\nn-neg = 2\nseed = 99\n";
  }
  REQUIRE(run({"--config", (dir / "gen.toml").string(), "generate", "-o", (dir / "a.ndjson").string()}) == 0);
  CHECK(nmil::load_dataset(dir / "a.ndjson").size() == 5);

  REQUIRE(run({"generate", "-o", (dir / "b.ndjson").string(), "--n-pos", "3", "--n-neg", "2", "--seed", "99"}) == 0);
  ::setenv("NMIL_SEED", "99", 1);
  REQUIRE(run({"generate", "-o", (dir / "c.ndjson").string(), "--n-pos", "3", "--n-neg", "2"}) == 0);
  ::unsetenv("NMIL_SEED");
  CHECK(slurp(dir / "a.ndjson") == slurp(dir / "b.ndjson"));
  CHECK(slurp(dir / "b.ndjson") == slurp(dir / "c.ndjson"));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch_dir("cli-exit");
  const std::string tiny = (kData / "tiny.ndjson").string();
  CHECK(run({"--help"}) == 0);
  CHECK(run({}) == 1);
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({"train", "-d", tiny}) == 1);
  CHECK(run({"train", "-d", tiny, "-o", (dir / "m.json").string(), "--variant", "svm"}) == 1);
  CHECK(run({"train", "-d", tiny, "-o", (dir / "m.json").string(), "--batch-size", "9"}) == 1);
  CHECK(run({"train", "-d", (dir / "missing.ndjson").string(), "-o", (dir / "m.json").string()}) == 2);
  REQUIRE(run(small_gen(dir / "d.ndjson")) == 0);
  CHECK(run({"train", "-d", (dir / "d.ndjson").string(), "-o", (dir / "m.json").string(), "--lr0", "1e300",
             "--epochs", "3"}) == 2);
  CHECK(run({"eval", "-p", tiny, "-d", tiny}) == 1);
}
