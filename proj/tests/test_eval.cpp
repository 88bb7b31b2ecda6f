#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "treestealer/error.hpp"
#include "treestealer/eval.hpp"

using namespace treestealer;

TEST(Dataset, ParseAndInferRanges) {
  const auto ds = parse_dataset("1,2,A\n3,4,B\n", false);
  ASSERT_EQ(ds.rows.size(), 2u);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(std::get<std::int64_t>(ds.rows[1].y), 1);
  const auto r = infer_ranges(ds, 0.0);
  EXPECT_EQ(r.low, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(r.high, (std::vector<double>{3.0, 4.0}));
  const auto wide = infer_ranges(ds, 0.5);
  EXPECT_EQ(wide.low[0], 0.0);
  EXPECT_EQ(wide.high[1], 5.0);
}

TEST(Dataset, LabelKinds) {
  const auto ints = parse_dataset("x,y\n0.5,3\n1.5,-2\n", true);
  EXPECT_EQ(ints.feature_names, std::vector<std::string>{"x"});
  EXPECT_EQ(std::get<std::int64_t>(ints.rows[1].y), -2);
  const auto reals = parse_dataset("0.5,3.25\n", false);
  EXPECT_EQ(std::get<double>(reals.rows[0].y), 3.25);
}

TEST(Dataset, Iris) {
  const auto ds = load_dataset(TREESTEALER_DATA_DIR "/iris.csv", true);
  EXPECT_EQ(ds.num_features(), 4u);
  EXPECT_EQ(ds.rows.size(), 150u);
  EXPECT_EQ(ds.class_names.size(), 3u);
}

namespace {

std::string dataset_error(const std::string& csv) {
  try {
    parse_dataset(csv, false);
  } catch (const DatasetError& e) {
    return e.what();
  }
  return "<none>";
}

}  // namespace

TEST(Dataset, ErrorsCarryCoordinates) {
  EXPECT_NE(dataset_error("1,2,3\n4,x,6\n").find("line 2, column 2"), std::string::npos);
  EXPECT_NE(dataset_error("1,2,3\n4,5\n").find("line 2"), std::string::npos);
  EXPECT_NE(dataset_error("").find("no rows"), std::string::npos);
  EXPECT_THROW(load_dataset("/nonexistent/data.csv", true), DatasetError);
}

TEST(Datasets, StayInsideRanges) {
  const auto tree = fixtures::worked_example_tree();
  Rng rng(3);
  for (const auto& ds : {uniform_dataset(tree, 500, rng), grid_dataset(tree, 0.5, 500, rng)}) {
    ASSERT_EQ(ds.rows.size(), 500u);
    for (const auto& r : ds.rows) {
      for (std::size_t f = 0; f < 2; ++f) {
        EXPECT_GE(r.x[f], tree.ranges_low()[f]);
        EXPECT_LE(r.x[f], tree.ranges_high()[f]);
      }
      EXPECT_EQ(r.y, infer(tree, r.x));
    }
  }
}

TEST(Datasets, GridSamplesAreCellCentres) {
  const auto tree = fixtures::worked_example_tree();
  Rng rng(5);
  for (const auto& r : grid_dataset(tree, 0.5, 200, rng).rows) {
    for (std::size_t f = 0; f < 2; ++f) {
      const double k = (r.x[f] - tree.ranges_low()[f]) / 0.5 - 0.5;
      EXPECT_DOUBLE_EQ(k, std::round(k));
    }
  }
}

TEST(ExtractionError, IdentityAndFlippedLeaf) {
  const auto tree = fixtures::worked_example_tree();
  Rng rng(2);
  const auto ds = uniform_dataset(tree, 1000, rng);
  EXPECT_EQ(extraction_error(tree, tree, ds), 0.0);
  EXPECT_EQ(fidelity(tree, tree, ds), 1.0);

  TreeBuilder b;
  const int n1 = b.inner(1, 1.0, b.leaf(std::int64_t{0}), b.leaf(std::int64_t{9}));
  const int n8 = b.inner(1, 0.0, b.leaf(std::int64_t{4}), b.leaf(std::int64_t{5}));
  const int n3 = b.inner(1, 1.9, b.leaf(std::int64_t{3}), n8);
  const int n2 = b.inner(1, -0.9, n3, b.leaf(std::int64_t{2}));
  const auto flipped = b.build(b.inner(0, 3.0, n1, n2), {2.0, -2.0}, {7.0, 3.0});
  std::size_t expected = 0;
  for (const auto& r : ds.rows) expected += r.x[0] > 3.0 && r.x[1] <= 1.0;
  EXPECT_DOUBLE_EQ(extraction_error(tree, flipped, ds),
                   static_cast<double>(expected) / static_cast<double>(ds.rows.size()));
}

TEST(Enums, RoundTrip) {
  for (const auto s : {PointStatus::Ok, PointStatus::Timeout, PointStatus::Plateau,
                       PointStatus::PathDeviation, PointStatus::Error}) {
    EXPECT_EQ(parse_point_status(to_string(s)), s);
  }
  EXPECT_EQ(parse_attack_kind("baseline"), AttackKind::Baseline);
  EXPECT_THROW(parse_attack_kind("oracle"), Error);
  EXPECT_THROW(parse_point_status("done"), SchemaError);
}

TEST(Sweep, SingleLeafIsOnePoint) {
  TreeBuilder b;
  const auto tree = b.build(b.leaf(std::int64_t{1}), {0.0}, {1.0});
  Rng rng(1);
  const auto ds = uniform_dataset(tree, 100, rng);
  SweepConfig cfg;
  cfg.eps_start = 4.0;
  const auto s = pareto_sweep(tree, ds, cfg);
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0], (SweepPoint{4.0, 1, 1.0, PointStatus::Ok, {}, ""}));
  EXPECT_EQ(s.frontier, s.points);
  EXPECT_EQ(s.attack, "extractor");
  EXPECT_EQ(s.channel, "perfect");
}

TEST(Sweep, WorkedExampleFirstPointIsExact) {
  const auto tree = fixtures::worked_example_tree();
  Rng rng(1);
  const auto ds = grid_dataset(tree, 0.5, 1000, rng);
  SweepConfig cfg;
  cfg.eps_start = 0.5;
  const auto s = pareto_sweep(tree, ds, cfg);
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0].fidelity, 1.0);
  EXPECT_EQ(s.points[0].queries, 26);
}

TEST(Sweep, HalvesUntilExact) {
  const auto tree = fixtures::worked_example_tree();
  Rng rng(1);
  const auto ds = grid_dataset(tree, 0.1, 1000, rng);
  for (const auto attack : {AttackKind::Extractor, AttackKind::Baseline}) {
    SweepConfig cfg;
    cfg.attack = attack;
    cfg.eps_start = 8.0;
    const auto s = pareto_sweep(tree, ds, cfg);
    ASSERT_FALSE(s.points.empty());
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      EXPECT_EQ(s.points[i].epsilon, s.points[i - 1].epsilon / 2);
    }
    EXPECT_EQ(s.points.back().status, PointStatus::Ok);
    EXPECT_EQ(s.points.back().fidelity, 1.0);
    EXPECT_FALSE(s.points.back().wall_time);
  }
}

TEST(Sweep, PlateauAndMaxPoints) {
  TreeBuilder b;
  // Threshold off any dyadic grid: fidelity stays below 1 on coarse runs.
  const auto tree = b.build(b.inner(0, 1.0 / 3, b.leaf(std::int64_t{0}), b.leaf(std::int64_t{1})),
                            {0.0}, {1.0});
  Rng rng(1);
  const auto ds = uniform_dataset(tree, 1000, rng);
  SweepConfig cfg;
  cfg.eps_start = 1.0;
  cfg.max_points = 3;
  const auto s = pareto_sweep(tree, ds, cfg);
  EXPECT_LE(s.points.size(), 3u);
  cfg.max_points = 40;
  cfg.plateau_limit = 1;
  const auto p = pareto_sweep(tree, ds, cfg);
  EXPECT_EQ(p.points.back().status, PointStatus::Plateau);
  EXPECT_THROW(pareto_sweep(tree, ds, [] {
                 SweepConfig c;
                 c.eps_start = 0.0;
                 return c;
               }()),
               Error);
}

TEST(Sweep, WallTimeIsOptIn) {
  const auto tree = fixtures::worked_example_tree();
  Rng rng(1);
  const auto ds = grid_dataset(tree, 0.1, 100, rng);
  SweepConfig cfg;
  cfg.eps_start = 0.5;
  cfg.record_wall_time = true;
  const auto s = pareto_sweep(tree, ds, cfg);
  ASSERT_TRUE(s.points[0].wall_time);
  EXPECT_GE(*s.points[0].wall_time, 0.0);
}

TEST(Frontier, NonDominatedAndSorted) {
  const std::vector<SweepPoint> pts = {
      {1.0, 50, 0.8, PointStatus::Ok, {}, ""},
      {0.5, 40, 0.9, PointStatus::Ok, {}, ""},
      {0.25, 100, 0.9, PointStatus::Ok, {}, ""},
      {0.125, 200, 1.0, PointStatus::Ok, {}, ""},
      {0.0625, 10, 1.0, PointStatus::PathDeviation, {}, "x"},
  };
  const auto f = pareto_frontier(pts);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].queries, 40);
  EXPECT_EQ(f[1].queries, 200);
  for (const auto& p : f) {
    for (const auto& q : pts) {
      if (q.status != PointStatus::Ok) continue;
      EXPECT_FALSE(q.queries <= p.queries && q.fidelity >= p.fidelity &&
                   (q.queries < p.queries || q.fidelity > p.fidelity));
    }
  }
  EXPECT_TRUE(pareto_frontier({}).empty());
}

TEST(Report, RoundTripAndCsv) {
  Report rep;
  SweepResult s;
  s.attack = "extractor";
  s.channel = "phr";
  s.points = {{1.0, 10, 0.5, PointStatus::Ok, 0.25, ""},
              {0.5, 12, 0.0, PointStatus::PathDeviation, {}, "deviated"}};
  s.frontier = pareto_frontier(s.points);
  rep.series["extractor"] = s;
  rep.series["baseline"] = SweepResult{"baseline", "api", {}, {}};
  EXPECT_EQ(report_from_json(nlohmann::json::parse(report_to_json(rep).dump())), rep);

  const auto dir = std::filesystem::temp_directory_path() / "treestealer_report_test";
  std::filesystem::remove_all(dir);
  emit_report(rep, dir);
  EXPECT_EQ(load_report(dir / "report.json"), rep);
  std::ifstream csv(dir / "baseline.csv");
  std::stringstream text;
  text << csv.rdbuf();
  EXPECT_EQ(text.str(), "epsilon,queries,fidelity,status\n");
  EXPECT_EQ(sweep_csv(s), "epsilon,queries,fidelity,status\n1,10,0.5,ok\n0.5,12,0,path_deviation\n");
  std::filesystem::remove_all(dir);
}

TEST(Report, SchemaErrors) {
  EXPECT_THROW(report_from_json(nlohmann::json::array()), SchemaError);
  EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"series": {"a": {"attack": "x"}}})")),
               SchemaError);
  try {
    report_from_json(nlohmann::json::parse(
        R"({"series": {"a": {"attack": "x", "channel": "y", "frontier": [],
            "points": [{"epsilon": 1, "queries": 1.5, "fidelity": 1, "status": "ok"}]}}})"));
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "series.a.points[0].queries");
  }
}
