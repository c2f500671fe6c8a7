#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "survkit/errors.hpp"
#include "survkit/estimators.hpp"
#include "survkit/metrics.hpp"
#include "survkit/model_io.hpp"
#include "survkit/rng.hpp"
#include "survkit/rsf.hpp"

#include "helpers.hpp"

using namespace survkit;
using testutil::make_data;
using testutil::make_data_x;

namespace {

// Re-routes a raw row down one tree by the stored split conventions
// (numeric: x <= cut goes left; categorical: mask bit of the level code).
const RsfNode& route(const SurvTree& tree, const double* x) {
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    const double v = x[nd.var];
    const bool left = nd.categorical
                          ? ((nd.level_mask >> static_cast<std::uint64_t>(v)) & 1u) != 0
                          : v <= nd.cut;
    id = left ? nd.left : nd.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)];
}

// Two-group data where a binary covariate perfectly orders survival.
SurvDataset separable_fixture(std::uint64_t seed, std::size_t n) {
  Rng rng = make_rng(seed, 0x729);
  std::vector<std::tuple<double, int, std::vector<double>>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = i % 2 == 0 ? 1.0 : 0.0;
    const double base = g == 1.0 ? 1.0 : 10.0;
    const double t = base + sample_uniform(rng);
    rows.emplace_back(t, 1, std::vector<double>{g, sample_normal(rng)});
  }
  return make_data_x({"group", "noise"}, rows);
}

}  // namespace

TEST_CASE("log-rank statistic on hand-worked two-sample fixtures") {
  const auto a12 = make_data({{1, 1}, {2, 1}});
  const auto a34 = make_data({{3, 1}, {4, 1}});
  CHECK(logrank_split_stat(a12, a34) == doctest::Approx(1.697749375254331).epsilon(1e-12));

  const auto a13 = make_data({{1, 1}, {3, 1}});
  const auto a24 = make_data({{2, 1}, {4, 1}});
  const double inter = logrank_split_stat(a13, a24);
  CHECK(inter == doctest::Approx(0.7844645405527362).epsilon(1e-12));
  CHECK(inter < logrank_split_stat(a12, a34));  // separation scores higher

  // Symmetric in the two children and zero without events.
  CHECK(logrank_split_stat(a34, a12) == doctest::Approx(1.697749375254331).epsilon(1e-12));
  CHECK(logrank_split_stat(make_data({{1, 0}, {2, 0}}), make_data({{3, 0}})) == 0.0);
}

TEST_CASE("log-rank-score statistic on the same fixtures") {
  const auto a12 = make_data({{1, 1}, {2, 1}});
  const auto a34 = make_data({{3, 1}, {4, 1}});
  const auto a13 = make_data({{1, 1}, {3, 1}});
  const auto a24 = make_data({{2, 1}, {4, 1}});
  CHECK(logrank_score_split_stat(a12, a34) ==
        doctest::Approx(1.4596008983995234).epsilon(1e-12));
  CHECK(logrank_score_split_stat(a13, a24) ==
        doctest::Approx(0.8340576562282991).epsilon(1e-12));
  CHECK(logrank_score_split_stat(a34, a12) ==
        doctest::Approx(1.4596008983995234).epsilon(1e-12));
  CHECK(logrank_score_split_stat(make_data({{1, 0}, {2, 0}}), make_data({{3, 0}})) == 0.0);
}

TEST_CASE("split statistics are symmetric on fuzzed children") {
  Rng rng = make_rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const auto left = testutil::fuzz_data(rng, 6 + rep % 10, rep % 2 == 0);
    const auto right = testutil::fuzz_data(rng, 5 + rep % 7, rep % 2 == 1);
    CHECK(logrank_split_stat(left, right) ==
          doctest::Approx(logrank_split_stat(right, left)).epsilon(1e-12));
    CHECK(logrank_score_split_stat(left, right) ==
          doctest::Approx(logrank_score_split_stat(right, left)).epsilon(1e-12));
  }
}

TEST_CASE("root split picks the perfect separator and attains the max statistic") {
  const auto data = separable_fixture(5, 60);
  RsfConfig cfg;
  cfg.n_trees = 1;
  cfg.mtry = 2;  // consider every covariate at every node
  cfg.seed = 5;
  SplitLog log;
  const auto forest = fit_forest(data, cfg, 1, &log);

  const auto& root = forest.trees[0].nodes[0];
  REQUIRE_FALSE(root.is_leaf());
  CHECK(root.var == 0);  // "group"

  double best = 0.0;
  const SplitEval* chosen = nullptr;
  for (const auto& e : log.evals) {
    if (e.tree != 0 || e.node != 0) continue;
    best = std::max(best, e.stat);
    if (e.chosen) chosen = &e;
  }
  REQUIRE(chosen != nullptr);
  CHECK(chosen->stat == best);
  CHECK(chosen->var == root.var);
  CHECK(chosen->cut == root.cut);

  // Recompute the chosen statistic with the public kernel on the actual
  // bootstrap partition.
  std::vector<std::size_t> li, ri;
  for (auto r : forest.trees[0].inbag) {
    if (data.x(r, 0) <= root.cut)
      li.push_back(r);
    else
      ri.push_back(r);
  }
  CHECK(logrank_split_stat(data.subset(li), data.subset(ri)) ==
        doctest::Approx(chosen->stat).epsilon(1e-12));
}

TEST_CASE("min terminal deaths collapses trees to stumps with the inbag nelson-aalen") {
  const auto data = separable_fixture(7, 40);
  RsfConfig cfg;
  cfg.n_trees = 8;
  cfg.min_terminal_deaths = static_cast<int>(data.n_events());  // no split can satisfy this
  cfg.seed = 7;
  const auto forest = fit_forest(data, cfg, 1);

  for (const auto& tree : forest.trees) {
    REQUIRE(tree.nodes.size() == 1);
    REQUIRE(tree.nodes[0].is_leaf());
    std::vector<std::size_t> rows(tree.inbag.begin(), tree.inbag.end());
    const auto na = nelson_aalen(data.subset(rows));
    const auto& chf = tree.leaf_chf[static_cast<std::size_t>(tree.nodes[0].leaf)];
    REQUIRE(chf.size() == forest.grid.size());
    for (std::size_t j = 0; j < forest.grid.size(); ++j)
      CHECK(chf[j] == doctest::Approx(na.at(forest.grid[j])).epsilon(1e-14));
  }
}

TEST_CASE("leaf hazards are the nelson-aalen of the routed inbag rows") {
  const auto data = separable_fixture(11, 80);
  RsfConfig cfg;
  cfg.n_trees = 5;
  cfg.seed = 11;
  const auto forest = fit_forest(data, cfg, 1);

  for (const auto& tree : forest.trees) {
    std::vector<std::vector<std::size_t>> members(tree.leaf_chf.size());
    for (auto r : tree.inbag) {
      const auto& leaf = route(tree, data.row(r));
      members[static_cast<std::size_t>(leaf.leaf)].push_back(r);
    }
    std::size_t deaths_min = data.n();
    for (std::size_t l = 0; l < members.size(); ++l) {
      REQUIRE_FALSE(members[l].empty());
      const auto sub = data.subset(members[l]);
      deaths_min = std::min(deaths_min, sub.n_events());
      const auto na = nelson_aalen(sub);
      for (std::size_t j = 0; j < forest.grid.size(); ++j)
        CHECK(tree.leaf_chf[l][j] == doctest::Approx(na.at(forest.grid[j])).epsilon(1e-13));
    }
    // every leaf is a child of an accepted split (or the root), so the
    // d0 rule bounds its death count from below
    CHECK(deaths_min >= static_cast<std::size_t>(cfg.min_terminal_deaths));
  }
}

TEST_CASE("forest fits are deterministic and thread-count independent") {
  const auto data = separable_fixture(13, 50);
  RsfConfig cfg;
  cfg.n_trees = 12;
  cfg.seed = 13;
  const auto a = fit_forest(data, cfg, 1);
  const auto b = fit_forest(data, cfg, 1);
  const auto c = fit_forest(data, cfg, 3);
  CHECK(forest_to_json(a).dump() == forest_to_json(b).dump());
  CHECK(forest_to_json(a).dump() == forest_to_json(c).dump());

  RsfConfig other = cfg;
  other.seed = 14;
  CHECK(forest_to_json(a).dump() != forest_to_json(fit_forest(data, other, 1)).dump());
}

TEST_CASE("ensemble prediction is the mean of per-tree leaf hazards") {
  const auto data = separable_fixture(17, 60);
  RsfConfig cfg;
  cfg.n_trees = 7;
  cfg.seed = 17;
  const auto forest = fit_forest(data, cfg, 1);

  const std::vector<double> x = {1.0, 0.2};
  const auto pred = predict_chf(forest, x);
  REQUIRE(pred.grid.times == forest.grid.times);
  for (std::size_t j = 0; j < pred.grid.size(); ++j) {
    double acc = 0.0;
    for (const auto& tree : forest.trees)
      acc += tree.leaf_chf[static_cast<std::size_t>(route(tree, x.data()).leaf)][j];
    CHECK(pred.values[j] == doctest::Approx(acc / 7.0).epsilon(1e-13));
    if (j > 0) CHECK(pred.values[j] >= pred.values[j - 1]);
  }

  // A short-lived group-1 subject should accumulate hazard much faster.
  const auto fast = predict_chf(forest, {1.0, 0.0});
  const auto slow = predict_chf(forest, {0.0, 0.0});
  CHECK(fast.at(2.0) > slow.at(2.0));

  CHECK_THROWS_AS(predict_chf(forest, {1.0}), input_error);
  CHECK_THROWS_AS(predict_chf(forest, {1.0, 0.0, 3.0}), input_error);
}

TEST_CASE("single-tree forest predicts its own leaf exactly") {
  const auto data = separable_fixture(19, 40);
  RsfConfig cfg;
  cfg.n_trees = 1;
  cfg.seed = 19;
  const auto forest = fit_forest(data, cfg, 1);
  const std::vector<double> x = {0.0, -1.0};
  const auto pred = predict_chf(forest, x);
  const auto& leaf = route(forest.trees[0], x.data());
  const auto& chf = forest.trees[0].leaf_chf[static_cast<std::size_t>(leaf.leaf)];
  for (std::size_t j = 0; j < pred.grid.size(); ++j) CHECK(pred.values[j] == chf[j]);
}

TEST_CASE("out-of-bag rates and predictions") {
  const auto data = separable_fixture(23, 40);
  RsfConfig cfg;
  cfg.n_trees = 500;
  cfg.seed = 23;
  const auto forest = fit_forest(data, cfg, 0);

  // Bootstrap leave-out rate concentrates near e^-1.
  double oob_frac = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    int out = 0;
    for (const auto& tree : forest.trees)
      if (std::find(tree.inbag.begin(), tree.inbag.end(), static_cast<std::uint32_t>(i)) ==
          tree.inbag.end())
        ++out;
    oob_frac += static_cast<double>(out) / 500.0;
  }
  oob_frac /= static_cast<double>(data.n());
  CHECK(oob_frac == doctest::Approx(std::exp(-1.0)).epsilon(0.08));

  const auto oob = oob_predict(forest, data);
  REQUIRE(oob.chf.size() == data.n());
  REQUIRE(oob.grid.times == forest.grid.times);
  for (std::size_t i = 0; i < data.n(); ++i) {
    REQUIRE(oob.valid[i]);  // with 500 trees every record is out somewhere
    double acc = 0.0;
    std::size_t cnt = 0;
    for (const auto& tree : forest.trees) {
      if (std::find(tree.inbag.begin(), tree.inbag.end(), static_cast<std::uint32_t>(i)) !=
          tree.inbag.end())
        continue;
      acc += tree.leaf_chf[static_cast<std::size_t>(route(tree, data.row(i)).leaf)].back();
      ++cnt;
    }
    CHECK(oob.chf[i].back() == doctest::Approx(acc / static_cast<double>(cnt)).epsilon(1e-12));
  }
}

TEST_CASE("a record inbag everywhere is flagged invalid") {
  // With two trees some record usually lands in both bootstrap samples;
  // scan seeds for one so the test stays deterministic.
  const auto data = separable_fixture(29, 12);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RsfConfig cfg;
    cfg.n_trees = 2;
    cfg.seed = seed;
    const auto forest = fit_forest(data, cfg, 1);
    const auto oob = oob_predict(forest, data);
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (!oob.valid[i]) {
        CHECK(oob.chf[i].empty());
        return;
      }
      CHECK_FALSE(oob.chf[i].empty());
    }
  }
  FAIL("no all-inbag record found across 40 seeds");
}

TEST_CASE("variable importance separates signal from noise and ignores unused columns") {
  Rng rng = make_rng(37);
  std::vector<std::tuple<double, int, std::vector<double>>> rows;
  for (std::size_t i = 0; i < 120; ++i) {
    const double g = i % 2 == 0 ? 1.0 : 0.0;
    const double t = (g == 1.0 ? 1.0 : 8.0) * (0.25 + sample_uniform(rng));
    rows.emplace_back(t, sample_uniform(rng) < 0.15 ? 0 : 1,
                      std::vector<double>{g, sample_normal(rng), 7.0});
  }
  const auto data = make_data_x({"group", "noise", "flat"}, rows);

  RsfConfig cfg;
  cfg.n_trees = 120;
  cfg.mtry = 3;
  cfg.seed = 37;
  const auto forest = fit_forest(data, cfg, 0);
  const auto vimp = variable_importance(forest, data, 0);
  REQUIRE(vimp.size() == 3);
  CHECK(vimp[0] > vimp[1]);
  CHECK(vimp[0] > 0.05);
  // a constant column can never host a split, so its importance is exactly 0
  CHECK(vimp[2] == 0.0);
}

TEST_CASE("stump forests have identically zero importance") {
  const auto data = separable_fixture(41, 30);
  RsfConfig cfg;
  cfg.n_trees = 10;
  cfg.min_terminal_deaths = static_cast<int>(data.n_events());
  cfg.seed = 41;
  const auto forest = fit_forest(data, cfg, 1);
  for (double v : variable_importance(forest, data, 1)) CHECK(v == 0.0);
}

TEST_CASE("random cutpoint mode stays deterministic and respects nsplit") {
  const auto data = separable_fixture(43, 60);
  RsfConfig cfg;
  cfg.n_trees = 6;
  cfg.nsplit = 2;
  cfg.seed = 43;
  SplitLog log;
  const auto a = fit_forest(data, cfg, 1, &log);
  const auto b = fit_forest(data, cfg, 3);
  CHECK(forest_to_json(a).dump() == forest_to_json(b).dump());

  // at most nsplit candidate cutpoints per (tree, node, covariate)
  std::map<std::tuple<int, int, int>, int> counts;
  for (const auto& e : log.evals) ++counts[{e.tree, e.node, e.var}];
  for (const auto& [key, c] : counts) CHECK(c <= 2);

  const auto pred = predict_chf(a, {1.0, 0.0});
  for (std::size_t j = 1; j < pred.grid.size(); ++j)
    CHECK(pred.values[j] >= pred.values[j - 1]);
}

TEST_CASE("categorical splits route whole level sets") {
  Rng rng = make_rng(47);
  Schema s;
  s.covariates.push_back(CovariateSpec{"arm", true, {"a", "b", "c", "d"}});
  std::vector<SurvRecord> recs;
  for (std::size_t i = 0; i < 120; ++i) {
    const double code = std::floor(sample_uniform(rng) * 4.0);
    const double base = (code < 2.0) ? 1.0 : 9.0;  // {a,b} short, {c,d} long
    recs.push_back(SurvRecord{base + sample_uniform(rng), 1, {code}});
  }
  const auto data = SurvDataset::from_records(s, recs);

  RsfConfig cfg;
  cfg.n_trees = 20;
  cfg.mtry = 1;
  cfg.seed = 47;
  const auto forest = fit_forest(data, cfg, 1);

  bool saw_categorical = false;
  for (const auto& tree : forest.trees)
    for (const auto& nd : tree.nodes)
      if (!nd.is_leaf()) {
        REQUIRE(nd.categorical);
        saw_categorical = true;
        const std::uint64_t mask = nd.level_mask & 0xF;
        CHECK(mask != 0);        // someone goes left
        CHECK(mask != 0xF);      // someone goes right
      }
  CHECK(saw_categorical);

  // Short-lived arms should be predicted to accumulate hazard faster.
  CHECK(predict_chf(forest, {0.0}).at(3.0) > predict_chf(forest, {3.0}).at(3.0));

  CHECK_THROWS_AS(predict_chf(forest, {5.0}), input_error);   // level code out of range
  CHECK_THROWS_AS(predict_chf(forest, {0.5}), input_error);   // fractional level code
}

TEST_CASE("mtry bounds are validated") {
  const auto data = separable_fixture(53, 30);
  RsfConfig cfg;
  cfg.n_trees = 2;
  cfg.mtry = 3;  // only 2 covariates
  CHECK_THROWS_AS(fit_forest(data, cfg, 1), input_error);
  cfg.mtry = -1;
  CHECK_THROWS_AS(fit_forest(data, cfg, 1), input_error);
}
