#include "survkit/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "survkit/errors.hpp"
#include "survkit/version.hpp"

namespace survkit {

namespace {

using nlohmann::json;

const json& need(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end())
    throw input_error(std::string("model file: missing field '") + key + "'");
  return *it;
}

json schema_to_json(const Schema& schema) {
  json cov = json::array();
  for (const CovariateSpec& c : schema.covariates) {
    json entry = {{"name", c.name}, {"categorical", c.categorical}};
    if (c.categorical) entry["levels"] = c.levels;
    cov.push_back(std::move(entry));
  }
  return json{{"covariates", std::move(cov)}};
}

Schema schema_from_json(const json& j) {
  Schema schema;
  for (const json& entry : need(j, "covariates")) {
    CovariateSpec c;
    c.name = need(entry, "name").get<std::string>();
    c.categorical = need(entry, "categorical").get<bool>();
    if (c.categorical) c.levels = need(entry, "levels").get<std::vector<std::string>>();
    schema.covariates.push_back(std::move(c));
  }
  schema.validate();
  return schema;
}

json envelope(const char* kind, const Schema& schema, json model) {
  return json{{"format_version", kModelFormatVersion},
              {"kind", kind},
              {"schema", schema_to_json(schema)},
              {"model", std::move(model)}};
}

void check_envelope(const json& doc, const char* kind) {
  if (need(doc, "format_version").get<int>() != kModelFormatVersion)
    throw input_error("model file: unsupported format version");
  if (need(doc, "kind").get<std::string>() != kind)
    throw input_error(std::string("model file: expected kind '") + kind + "', found '" +
                      need(doc, "kind").get<std::string>() + "'");
}

json grid_to_json(const TimeGrid& grid) { return json(grid.times); }

TimeGrid grid_from_json(const json& j) {
  return TimeGrid(j.get<std::vector<double>>());
}

}  // namespace

nlohmann::json cox_to_json(const CoxModel& model) {
  const std::vector<std::string> names = model.schema.encoded_names();
  json beta = json::array();
  for (std::size_t j = 0; j < model.beta.size(); ++j)
    beta.push_back({{"name", names[j]}, {"value", model.beta[j]}});

  json m = {
      {"beta", std::move(beta)},
      {"baseline",
       {{"grid", grid_to_json(model.baseline_chf.grid)},
        {"values", model.baseline_chf.values}}},
      {"log_partial_likelihood", model.log_partial_likelihood},
      {"n_params", model.n_params},
      {"diagnostics",
       {{"iterations", model.diagnostics.iterations},
        {"converged", model.diagnostics.converged},
        {"grad_max_norm", model.diagnostics.grad_max_norm}}},
  };
  return envelope("cox", model.schema, std::move(m));
}

CoxModel cox_from_json(const nlohmann::json& doc) {
  check_envelope(doc, "cox");
  CoxModel model;
  model.schema = schema_from_json(need(doc, "schema"));
  const json& m = need(doc, "model");

  for (const json& entry : need(m, "beta"))
    model.beta.push_back(need(entry, "value").get<double>());
  if (model.beta.size() != model.schema.encoded_width())
    throw input_error("model file: beta length does not match the schema");

  const json& baseline = need(m, "baseline");
  model.baseline_chf = CumHazardCurve(
      grid_from_json(need(baseline, "grid")),
      need(baseline, "values").get<std::vector<double>>());
  model.log_partial_likelihood = need(m, "log_partial_likelihood").get<double>();
  model.n_params = need(m, "n_params").get<std::size_t>();
  const json& diag = need(m, "diagnostics");
  model.diagnostics.iterations = need(diag, "iterations").get<int>();
  model.diagnostics.converged = need(diag, "converged").get<bool>();
  model.diagnostics.grad_max_norm = need(diag, "grad_max_norm").get<double>();
  return model;
}

nlohmann::json forest_to_json(const Forest& forest) {
  json trees = json::array();
  for (const SurvTree& tree : forest.trees) {
    json nodes = json::array();
    for (const RsfNode& n : tree.nodes)
      nodes.push_back({n.left, n.right, n.var, n.cut, n.level_mask, n.categorical, n.leaf});
    trees.push_back({{"nodes", std::move(nodes)},
                     {"leaf_chf", tree.leaf_chf},
                     {"inbag", tree.inbag}});
  }
  json m = {
      {"config",
       {{"n_trees", forest.config.n_trees},
        {"mtry", forest.config.mtry},
        {"min_terminal_deaths", forest.config.min_terminal_deaths},
        {"split_rule",
         forest.config.split_rule == SplitRule::LogRank ? "logrank" : "logrank-score"},
        {"nsplit", forest.config.nsplit},
        {"seed", forest.config.seed}}},
      {"grid", grid_to_json(forest.grid)},
      {"trees", std::move(trees)},
  };
  return envelope("rsf", forest.schema, std::move(m));
}

Forest forest_from_json(const nlohmann::json& doc) {
  check_envelope(doc, "rsf");
  Forest forest;
  forest.schema = schema_from_json(need(doc, "schema"));
  const json& m = need(doc, "model");

  const json& config = need(m, "config");
  forest.config.n_trees = need(config, "n_trees").get<int>();
  forest.config.mtry = need(config, "mtry").get<int>();
  forest.config.min_terminal_deaths = need(config, "min_terminal_deaths").get<int>();
  const std::string rule = need(config, "split_rule").get<std::string>();
  if (rule == "logrank")
    forest.config.split_rule = SplitRule::LogRank;
  else if (rule == "logrank-score")
    forest.config.split_rule = SplitRule::LogRankScore;
  else
    throw input_error("model file: unknown split rule '" + rule + "'");
  forest.config.nsplit = need(config, "nsplit").get<int>();
  forest.config.seed = need(config, "seed").get<std::uint64_t>();

  forest.grid = grid_from_json(need(m, "grid"));

  for (const json& jt : need(m, "trees")) {
    SurvTree tree;
    for (const json& jn : need(jt, "nodes")) {
      if (!jn.is_array() || jn.size() != 7)
        throw input_error("model file: malformed forest node");
      RsfNode n;
      n.left = jn[0].get<int>();
      n.right = jn[1].get<int>();
      n.var = jn[2].get<int>();
      n.cut = jn[3].get<double>();
      n.level_mask = jn[4].get<std::uint64_t>();
      n.categorical = jn[5].get<bool>();
      n.leaf = jn[6].get<int>();
      tree.nodes.push_back(n);
    }
    tree.leaf_chf = need(jt, "leaf_chf").get<std::vector<std::vector<double>>>();
    tree.inbag = need(jt, "inbag").get<std::vector<std::uint32_t>>();

    if (tree.nodes.empty()) throw input_error("model file: empty tree");
    const int n_nodes = static_cast<int>(tree.nodes.size());
    for (const RsfNode& n : tree.nodes) {
      if (n.is_leaf()) {
        if (n.leaf < 0 || n.leaf >= static_cast<int>(tree.leaf_chf.size()))
          throw input_error("model file: leaf index out of range");
      } else if (n.left < 0 || n.left >= n_nodes || n.right < 0 || n.right >= n_nodes) {
        throw input_error("model file: node child index out of range");
      }
    }
    for (const auto& chf : tree.leaf_chf)
      if (chf.size() != forest.grid.size())
        throw input_error("model file: leaf curve length does not match the grid");
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

nlohmann::json bart_to_json(const BartPosterior& post) {
  json draws = json::array();
  for (const auto& draw : post.draws) {
    json ensemble = json::array();
    for (const BartTree& tree : draw) {
      json nodes = json::array();
      for (const BartTreeNode& n : tree.nodes)
        nodes.push_back({n.left, n.right, n.var, n.cut, n.mu});
      ensemble.push_back(std::move(nodes));
    }
    draws.push_back(std::move(ensemble));
  }

  const BartPriors& priors = post.config.priors;
  json m = {
      {"config",
       {{"priors",
         {{"alpha", priors.alpha},
          {"zeta", priors.zeta},
          {"m", priors.m},
          {"leaf_sd", priors.leaf_sd},
          {"mu0", std::isnan(priors.mu0) ? json(nullptr) : json(priors.mu0)}}},
        {"n_burn", post.config.n_burn},
        {"n_keep", post.config.n_keep},
        {"thin", post.config.thin},
        {"seed", post.config.seed},
        {"max_grid_points", post.config.max_grid_points}}},
      {"mu0", post.mu0},
      {"grid", grid_to_json(post.grid)},
      {"diagnostics",
       {{"grow", {{"proposed", post.diagnostics.grow.proposed},
                  {"accepted", post.diagnostics.grow.accepted}}},
        {"prune", {{"proposed", post.diagnostics.prune.proposed},
                   {"accepted", post.diagnostics.prune.accepted}}},
        {"change", {{"proposed", post.diagnostics.change.proposed},
                    {"accepted", post.diagnostics.change.accepted}}}}},
      {"draws", std::move(draws)},
  };
  return envelope("bart", post.schema, std::move(m));
}

BartPosterior bart_from_json(const nlohmann::json& doc) {
  check_envelope(doc, "bart");
  BartPosterior post;
  post.schema = schema_from_json(need(doc, "schema"));
  const json& m = need(doc, "model");

  const json& config = need(m, "config");
  const json& priors = need(config, "priors");
  post.config.priors.alpha = need(priors, "alpha").get<double>();
  post.config.priors.zeta = need(priors, "zeta").get<double>();
  post.config.priors.m = need(priors, "m").get<int>();
  post.config.priors.leaf_sd = need(priors, "leaf_sd").get<double>();
  const json& mu0 = need(priors, "mu0");
  post.config.priors.mu0 =
      mu0.is_null() ? std::numeric_limits<double>::quiet_NaN() : mu0.get<double>();
  post.config.n_burn = need(config, "n_burn").get<int>();
  post.config.n_keep = need(config, "n_keep").get<int>();
  post.config.thin = need(config, "thin").get<int>();
  post.config.seed = need(config, "seed").get<std::uint64_t>();
  post.config.max_grid_points = need(config, "max_grid_points").get<std::size_t>();

  post.mu0 = need(m, "mu0").get<double>();
  post.grid = grid_from_json(need(m, "grid"));

  const json& diag = need(m, "diagnostics");
  const auto read_move = [](const json& j, BartMoveStats& stats) {
    stats.proposed = need(j, "proposed").get<std::uint64_t>();
    stats.accepted = need(j, "accepted").get<std::uint64_t>();
  };
  read_move(need(diag, "grow"), post.diagnostics.grow);
  read_move(need(diag, "prune"), post.diagnostics.prune);
  read_move(need(diag, "change"), post.diagnostics.change);

  const int joined = static_cast<int>(post.schema.encoded_width()) + 1;
  for (const json& jd : need(m, "draws")) {
    std::vector<BartTree> draw;
    for (const json& jt : jd) {
      BartTree tree;
      for (const json& jn : jt) {
        if (!jn.is_array() || jn.size() != 5)
          throw input_error("model file: malformed tree node");
        BartTreeNode n;
        n.left = jn[0].get<int>();
        n.right = jn[1].get<int>();
        n.var = jn[2].get<int>();
        n.cut = jn[3].get<double>();
        n.mu = jn[4].get<double>();
        tree.nodes.push_back(n);
      }
      if (tree.nodes.empty()) throw input_error("model file: empty tree");
      const int n_nodes = static_cast<int>(tree.nodes.size());
      for (const BartTreeNode& n : tree.nodes) {
        if (n.is_leaf()) continue;
        if (n.left < 0 || n.left >= n_nodes || n.right < 0 || n.right >= n_nodes)
          throw input_error("model file: node child index out of range");
        if (n.var < 0 || n.var >= joined)
          throw input_error("model file: split variable out of range");
      }
      draw.push_back(std::move(tree));
    }
    post.draws.push_back(std::move(draw));
  }
  return post;
}

std::string model_kind(const nlohmann::json& doc) {
  if (need(doc, "format_version").get<int>() != kModelFormatVersion)
    throw input_error("model file: unsupported format version");
  return need(doc, "kind").get<std::string>();
}

void write_model_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open '" + path + "' for writing");
  out << doc.dump() << '\n';
  if (!out) throw input_error("failed writing '" + path + "'");
}

nlohmann::json read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw input_error("model file '" + path + "': " + ex.what());
  }
}

}  // namespace survkit
