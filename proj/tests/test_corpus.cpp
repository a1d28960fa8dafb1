#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "nmil/corpus.hpp"
#include "support.hpp"

using namespace nmil;
using namespace nmil::testing;

namespace {

const char* kHeader = R"({"schema":"nmil-dataset","version":1,"feature_dim":4,"history_days":3,"lead_time":1,"class_names":null})";

std::string record(const std::string& id, int label, const std::string& days) {
  return R"({"event_id":")" + id + R"(","label":)" + std::to_string(label) +
         R"(,"class_label":null,"days":)" + days + R"(,"target_doc":null})";
}

std::string doc(const std::string& id, const std::string& feats) {
  return R"({"id":")" + id + R"(","features":)" + feats + R"(,"title":null})";
}

}  // namespace

TEST_CASE("two super-bags with h=3 and V=4 load with their shape") {
  std::ostringstream f;
  f << kHeader << '\n';
  for (const char* id : {"a", "b"}) {
    std::string days = "[";
    for (int d = 1; d <= 3; ++d) {
      days += "[" + doc(std::string(id) + std::to_string(d), "[1,2,3,4]") + "]";
      if (d < 3) days += ",";
    }
    days += "]";
    f << record(id, 1, days) << '\n';
  }
  std::istringstream in(f.str());
  const Dataset ds = read_dataset(in);
  CHECK(ds.size() == 2);
  CHECK(ds.history_days == 3);
  CHECK(ds.feature_dim == 4);
  CHECK(ds.super_bags[1].bags[2].instances[0].id == "b3");
}

TEST_CASE("a short feature vector is rejected with the instance id") {
  std::ostringstream f;
  f << kHeader << '\n'
    << record("ev", -1,
              "[[" + doc("ok1", "[1,2,3,4]") + "],[" + doc("short-one", "[1,2,3]") + "],[" +
                  doc("ok3", "[0,0,0,0]") + "]]")
    << '\n';
  std::istringstream in(f.str());
  try {
    read_dataset(in);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("short-one") != std::string::npos);
  }
}

TEST_CASE("an empty day is dropped and the remaining days must still number h") {
  // Four day records, one empty: three remain, matching h = 3.
  std::ostringstream ok;
  ok << kHeader << '\n'
     << record("ev", 1,
               "[[" + doc("x1", "[1,0,0,0]") + "],[],[" + doc("x2", "[0,1,0,0]") + "],[" +
                   doc("x3", "[0,0,1,0]") + "]]")
     << '\n';
  std::istringstream in(ok.str());
  LoadStats stats;
  const Dataset ds = read_dataset(in, &stats);
  CHECK(stats.dropped_empty_days == 1);
  REQUIRE(ds.super_bags[0].bags.size() == 3);
  CHECK(ds.super_bags[0].bags[1].day_index == 2);
  CHECK(ds.super_bags[0].bags[1].instances[0].id == "x2");

  // Three records with one empty leave two days.
  std::ostringstream bad;
  bad << kHeader << '\n'
      << record("short-ev", 1, "[[" + doc("y1", "[1,0,0,0]") + "],[],[" + doc("y2", "[0,1,0,0]") + "]]")
      << '\n';
  std::istringstream in2(bad.str());
  try {
    read_dataset(in2);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("short-ev") != std::string::npos);
  }
}

TEST_CASE("malformed json reports its line") {
  std::istringstream in(std::string(kHeader) + "\n{not json\n");
  try {
    read_dataset(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("save then load is the identity, including awkward doubles") {
  Dataset ds = random_dataset(3, 5, 4, 3, 1, 4);
  ds.super_bags[0].bags[0].instances[0].features = {0.1, 1.0 / 3.0, -std::numeric_limits<double>::denorm_min(),
                                                    std::numeric_limits<double>::max()};
  ds.super_bags[0].bags[0].instances[0].title = "headline, with \"quotes\"";
  ds.super_bags[0].class_label = 2;
  ds.super_bags[0].target_doc = inst("target", {1, 2, 3, 4});
  ds.class_names = std::vector<std::string>{"small", "large"};
  ds.lead_time = 4;

  std::stringstream buf;
  write_dataset(ds, buf);
  const Dataset back = read_dataset(buf);
  CHECK(back == ds);
  CHECK(std::signbit(back.super_bags[0].bags[0].instances[0].features[2]));
}

TEST_CASE("validation rejects broken invariants") {
  Dataset ds = random_dataset(1, 2, 3, 2, 1, 2);
  validate(ds);

  SUBCASE("class label on a negative") {
    ds.super_bags[1].class_label = 1;
    CHECK_THROWS_AS(validate(ds), ValidationError);
  }
  SUBCASE("non-finite feature") {
    ds.super_bags[0].bags[0].instances[0].features[1] = std::nan("");
    CHECK_THROWS_AS(validate(ds), ValidationError);
  }
  SUBCASE("target document inside a bag") {
    ds.super_bags[0].target_doc = ds.super_bags[0].bags[1].instances[0];
    CHECK_THROWS_AS(validate(ds), ValidationError);
  }
  SUBCASE("day indices out of order") {
    std::swap(ds.super_bags[0].bags[0], ds.super_bags[0].bags[1]);
    CHECK_THROWS_AS(validate(ds), ValidationError);
  }
  SUBCASE("wrong number of days") {
    ds.super_bags[0].bags.pop_back();
    CHECK_THROWS_AS(validate(ds), ValidationError);
  }
}

TEST_CASE("subset keeps metadata and order") {
  const Dataset ds = random_dataset(2, 6, 2, 1, 1, 1);
  const Dataset s = subset(ds, {4, 1});
  REQUIRE(s.size() == 2);
  CHECK(s.super_bags[0].event_id == "e4");
  CHECK(s.super_bags[1].event_id == "e1");
  CHECK(s.feature_dim == 2);
  CHECK_THROWS(subset(ds, {6}));
}

TEST_CASE("labels convert only from +1 and -1") {
  CHECK(label_from_int(1) == Label::positive);
  CHECK(label_from_int(-1) == Label::negative);
  CHECK_THROWS_AS(label_from_int(0), ValidationError);
}

TEST_CASE("unwritable path is an io error") {
  CHECK_THROWS_AS(save_dataset(random_dataset(1, 1, 1, 1, 1, 1), "/nonexistent-dir/x.ndjson"), IoError);
  CHECK_THROWS_AS(load_dataset("/nonexistent-dir/x.ndjson"), IoError);
}
