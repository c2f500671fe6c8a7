#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "survkit/bart.hpp"
#include "survkit/cox.hpp"
#include "survkit/errors.hpp"
#include "survkit/model_io.hpp"
#include "survkit/rng.hpp"
#include "survkit/rsf.hpp"

#include "helpers.hpp"

using namespace survkit;
using testutil::make_data_x;

namespace {

SurvDataset small_fixture(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x696f);
  std::vector<std::tuple<double, int, std::vector<double>>> rows;
  for (int i = 0; i < 50; ++i) {
    const double x = sample_normal(rng);
    const double t = 0.1 + (x > 0 ? 0.5 : 3.0) * sample_uniform(rng);
    rows.emplace_back(t, sample_uniform(rng) < 0.75 ? 1 : 0,
                      std::vector<double>{x, sample_normal(rng)});
  }
  return make_data_x({"a", "b"}, rows);
}

}  // namespace

TEST_CASE("cox round trip preserves the fit") {
  const auto data = small_fixture(1);
  const auto model = fit_cox(data);
  const auto doc = cox_to_json(model);
  CHECK(model_kind(doc) == "cox");
  const auto back = cox_from_json(doc);

  CHECK(back.beta == model.beta);
  CHECK(back.log_partial_likelihood == model.log_partial_likelihood);
  CHECK(back.n_params == model.n_params);
  CHECK(back.baseline_chf.grid.times == model.baseline_chf.grid.times);
  CHECK(back.baseline_chf.values == model.baseline_chf.values);
  CHECK(back.schema.encoded_names() == model.schema.encoded_names());
  CHECK(back.diagnostics.iterations == model.diagnostics.iterations);

  const std::vector<double> x = {0.4, -1.0};
  const auto grid = model.baseline_chf.grid;
  CHECK(predict_cox_survival(back, x, grid).values ==
        predict_cox_survival(model, x, grid).values);

  // serialization is deterministic: one fit, one byte stream
  CHECK(doc.dump() == cox_to_json(fit_cox(data)).dump());
}

TEST_CASE("forest round trip preserves predictions") {
  const auto data = small_fixture(2);
  RsfConfig cfg;
  cfg.n_trees = 15;
  cfg.seed = 2;
  cfg.split_rule = SplitRule::LogRankScore;
  cfg.nsplit = 3;
  const auto forest = fit_forest(data, cfg, 1);
  const auto doc = forest_to_json(forest);
  CHECK(model_kind(doc) == "rsf");
  const auto back = forest_from_json(doc);

  CHECK(back.trees.size() == forest.trees.size());
  CHECK(back.grid.times == forest.grid.times);
  CHECK(back.config.n_trees == 15);
  CHECK(back.config.nsplit == 3);
  CHECK(back.config.split_rule == SplitRule::LogRankScore);
  CHECK(back.config.seed == 2);

  for (const std::vector<double> x : {std::vector<double>{0.5, 0.1},
                                      std::vector<double>{-2.0, 1.3}}) {
    CHECK(predict_chf(back, x).values == predict_chf(forest, x).values);
  }
  for (std::size_t t = 0; t < forest.trees.size(); ++t)
    CHECK(back.trees[t].inbag == forest.trees[t].inbag);

  CHECK(forest_to_json(back).dump() == doc.dump());
}

TEST_CASE("bart round trip preserves the posterior") {
  const auto data = small_fixture(3);
  BartConfig cfg;
  cfg.priors.m = 4;
  cfg.n_burn = 30;
  cfg.n_keep = 20;
  cfg.seed = 3;
  cfg.max_grid_points = 15;
  const auto post = fit_bart_survival(data, cfg);
  const auto doc = bart_to_json(post);
  CHECK(model_kind(doc) == "bart");
  const auto back = bart_from_json(doc);

  CHECK(back.mu0 == post.mu0);
  CHECK(back.grid.times == post.grid.times);
  CHECK(back.draws.size() == post.draws.size());
  CHECK(std::isnan(back.config.priors.mu0));  // NaN survives via null
  CHECK(back.config.priors.m == 4);
  CHECK(back.config.seed == 3);

  const std::vector<double> x = {0.2, -0.7};
  const auto a = survival_curve(post, x);
  const auto b = survival_curve(back, x);
  CHECK(a.mean.values == b.mean.values);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(variable_usage(back) == variable_usage(post));

  CHECK(bart_to_json(back).dump() == doc.dump());

  // an explicit mu0 round-trips as a number
  BartConfig cfg2 = cfg;
  cfg2.priors.mu0 = -0.25;
  const auto post2 = fit_bart_survival(data, cfg2);
  CHECK(post2.mu0 == -0.25);
  const auto back2 = bart_from_json(bart_to_json(post2));
  CHECK(back2.config.priors.mu0 == -0.25);
}

TEST_CASE("file write and read round trip") {
  const std::string dir = "model_io_tmp";
  std::filesystem::create_directories(dir);
  const auto data = small_fixture(4);
  const auto model = fit_cox(data);
  const auto doc = cox_to_json(model);
  write_model_file(dir + "/m.json", doc);
  const auto loaded = read_model_file(dir + "/m.json");
  CHECK(loaded == doc);

  // identical fits produce byte-identical files
  write_model_file(dir + "/m2.json", cox_to_json(fit_cox(data)));
  std::ifstream f1(dir + "/m.json"), f2(dir + "/m2.json");
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.back() == '\n');

  std::filesystem::remove_all(dir);
}

TEST_CASE("io failures carry the path") {
  CHECK_THROWS_WITH_AS(read_model_file("does_not_exist.json"),
                       doctest::Contains("does_not_exist.json"), input_error);

  const std::string dir = "model_io_bad";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir + "/corrupt.json");
    f << "{ not json";
  }
  CHECK_THROWS_WITH_AS(read_model_file(dir + "/corrupt.json"),
                       doctest::Contains("corrupt.json"), input_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("tampered documents are rejected") {
  const auto data = small_fixture(5);

  auto doc = cox_to_json(fit_cox(data));
  doc["format_version"] = 999;
  CHECK_THROWS_WITH_AS(cox_from_json(doc), doctest::Contains("version"), input_error);

  doc = cox_to_json(fit_cox(data));
  doc["model"].erase("beta");
  CHECK_THROWS_WITH_AS(cox_from_json(doc), doctest::Contains("beta"), input_error);

  doc = cox_to_json(fit_cox(data));
  doc["model"]["beta"].push_back({{"name", "extra"}, {"value", 1.5}});
  CHECK_THROWS_WITH_AS(cox_from_json(doc), doctest::Contains("beta length"), input_error);

  // kind mismatch across loaders
  CHECK_THROWS_WITH_AS(forest_from_json(cox_to_json(fit_cox(data))),
                       doctest::Contains("kind"), input_error);

  RsfConfig rcfg;
  rcfg.n_trees = 3;
  rcfg.seed = 5;
  auto fdoc = forest_to_json(fit_forest(data, rcfg, 1));
  fdoc["model"]["trees"][0]["nodes"][0][0] = 9999;  // left child index
  CHECK_THROWS_WITH_AS(forest_from_json(fdoc), doctest::Contains("child index"),
                       input_error);
  fdoc = forest_to_json(fit_forest(data, rcfg, 1));
  fdoc["model"]["trees"][0]["nodes"][0].erase(6);  // no longer 7 fields
  CHECK_THROWS_WITH_AS(forest_from_json(fdoc), doctest::Contains("malformed"),
                       input_error);

  BartConfig bcfg;
  bcfg.priors.m = 2;
  bcfg.n_burn = 5;
  bcfg.n_keep = 3;
  bcfg.seed = 5;
  auto bdoc = bart_to_json(fit_bart_survival(data, bcfg));
  bdoc["model"]["draws"][0][0][0][0] = 9999;  // left child index
  CHECK_THROWS_WITH_AS(bart_from_json(bdoc), doctest::Contains("child index"),
                       input_error);
}

TEST_CASE("model_kind validates the envelope") {
  nlohmann::json doc;
  CHECK_THROWS_AS(model_kind(doc), input_error);
  doc["format_version"] = 1;
  doc["kind"] = "cox";
  doc["schema"] = nlohmann::json::array();
  doc["model"] = nlohmann::json::object();
  CHECK(model_kind(doc) == "cox");
}
