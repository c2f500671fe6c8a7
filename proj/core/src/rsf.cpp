#include "survkit/rsf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survkit/errors.hpp"
#include "survkit/estimators.hpp"
#include "survkit/metrics.hpp"
#include "survkit/parallel.hpp"
#include "survkit/rng.hpp"

namespace survkit {

namespace {

constexpr std::uint64_t kTreeStream = 0x74726565;  // per-tree RNG tag
constexpr std::uint64_t kVimpStream = 0x76696d70;  // per-covariate VIMP tag

// Standardized log-rank statistic over instances listed in `rows` (sorted by
// ascending time). Sweeps tied-time groups from the largest time down,
// growing the risk set; times with risk set <= 1 are skipped.
double logrank_from_rows(const std::vector<std::uint32_t>& rows,
                         const std::vector<double>& z, const std::vector<int>& d,
                         const std::vector<char>& is_left) {
  double num = 0.0, var = 0.0;
  double r_all = 0.0, r_left = 0.0;
  std::size_t k = rows.size();
  while (k > 0) {
    const double t = z[rows[k - 1]];
    double dj = 0.0, dlj = 0.0;
    while (k > 0 && z[rows[k - 1]] == t) {
      const std::uint32_t r = rows[--k];
      r_all += 1.0;
      if (is_left[r]) r_left += 1.0;
      if (d[r]) {
        dj += 1.0;
        if (is_left[r]) dlj += 1.0;
      }
    }
    if (dj > 0.0 && r_all > 1.0) {
      num += dlj - r_left * dj / r_all;
      const double r_right = r_all - r_left;
      var += r_left * r_right * dj * (r_all - dj) / (r_all * r_all * (r_all - 1.0));
    }
  }
  if (var <= 0.0) return 0.0;
  return std::abs(num) / std::sqrt(var);
}

// Censoring-adjusted rank scores a_i = d_i - sum_{k: z_k <= z_i} d_k/(n-k+1),
// where k runs over rank order (time ascending, events before censorings at
// ties, stable otherwise) and tied times share the full tie block's sum.
// Output is indexed by instance id.
void logrank_scores_from_rows(const std::vector<std::uint32_t>& rows,
                              const std::vector<double>& z, const std::vector<int>& d,
                              std::vector<double>& score) {
  std::vector<std::uint32_t> ord = rows;
  std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (z[a] != z[b]) return z[a] < z[b];
    if (d[a] != d[b]) return d[a] > d[b];
    return a < b;
  });
  const double n = static_cast<double>(ord.size());
  double cum = 0.0;
  std::size_t b = 0;
  while (b < ord.size()) {
    std::size_t e = b;
    while (e < ord.size() && z[ord[e]] == z[ord[b]]) {
      cum += static_cast<double>(d[ord[e]]) / (n - static_cast<double>(e));
      ++e;
    }
    for (std::size_t k = b; k < e; ++k)
      score[ord[k]] = static_cast<double>(d[ord[k]]) - cum;
    b = e;
  }
}

double logrank_score_stat(const std::vector<std::uint32_t>& rows,
                          const std::vector<double>& score,
                          const std::vector<char>& is_left) {
  const double n = static_cast<double>(rows.size());
  if (rows.size() < 2) return 0.0;
  double sum = 0.0, sum_left = 0.0, n_left = 0.0;
  for (std::uint32_t r : rows) {
    sum += score[r];
    if (is_left[r]) {
      sum_left += score[r];
      n_left += 1.0;
    }
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (std::uint32_t r : rows) ss += (score[r] - mean) * (score[r] - mean);
  const double s2 = ss / (n - 1.0);
  const double denom = n_left * (1.0 - n_left / n) * s2;
  if (denom <= 0.0) return 0.0;
  return std::abs(sum_left - n_left * mean) / std::sqrt(denom);
}

struct CandidateSplit {
  double cut = 0.0;
  std::uint64_t mask = 0;
};

struct TreeGrower {
  const SurvDataset& data;
  const RsfConfig& cfg;
  int mtry;
  const TimeGrid& grid;
  Rng rng;
  int tree_index;
  std::vector<SplitEval>* log;

  // per-instance views (instance = bootstrap draw)
  std::vector<double> z;
  std::vector<int> d;
  std::vector<std::uint32_t> data_row;

  SurvTree tree;
  std::vector<char> left_buf;
  std::vector<double> score_buf;

  TreeGrower(const SurvDataset& data_, const RsfConfig& cfg_, int mtry_,
             const TimeGrid& grid_, int tree_index_, std::vector<SplitEval>* log_)
      : data(data_), cfg(cfg_), mtry(mtry_), grid(grid_),
        rng(make_rng(cfg_.seed, kTreeStream, static_cast<std::uint64_t>(tree_index_))),
        tree_index(tree_index_), log(log_) {}

  void run() {
    const std::size_t n = data.n();
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
    tree.inbag.resize(n);
    for (auto& r : tree.inbag) r = pick(rng);

    z.resize(n);
    d.resize(n);
    data_row.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      data_row[i] = tree.inbag[i];
      z[i] = data.time(tree.inbag[i]);
      d[i] = data.event(tree.inbag[i]);
    }
    left_buf.assign(n, 0);
    score_buf.assign(n, 0.0);

    std::vector<std::uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0u);
    std::sort(rows.begin(), rows.end(), [&](std::uint32_t a, std::uint32_t b) {
      return z[a] != z[b] ? z[a] < z[b] : a < b;
    });
    grow(std::move(rows));
  }

  int grow(std::vector<std::uint32_t> rows) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::size_t deaths = 0;
    for (std::uint32_t r : rows) deaths += static_cast<std::size_t>(d[r]);

    const std::size_t d0 = static_cast<std::size_t>(cfg.min_terminal_deaths);
    bool found = false;
    int best_var = -1;
    CandidateSplit best_cand;
    double best_stat = 0.0;
    std::size_t best_log_index = 0;

    if (deaths >= 2 * d0) {
      if (cfg.split_rule == SplitRule::LogRankScore)
        logrank_scores_from_rows(rows, z, d, score_buf);

      const std::size_t p = data.n_covariates();
      std::vector<std::size_t> vars(p);
      std::iota(vars.begin(), vars.end(), std::size_t{0});
      // partial Fisher-Yates: the first mtry entries are the sampled covariates
      for (int k = 0; k < mtry; ++k) {
        std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(k), p - 1);
        std::swap(vars[static_cast<std::size_t>(k)], vars[u(rng)]);
      }

      for (int k = 0; k < mtry; ++k) {
        const std::size_t v = vars[static_cast<std::size_t>(k)];
        for (const CandidateSplit& cand : candidates_for(v, rows)) {
          std::size_t n_left = 0, d_left = 0, d_right = 0;
          for (std::uint32_t r : rows) {
            const bool go_left = goes_left(v, cand, data.x(data_row[r], v));
            left_buf[r] = go_left ? 1 : 0;
            if (go_left) {
              ++n_left;
              d_left += static_cast<std::size_t>(d[r]);
            } else {
              d_right += static_cast<std::size_t>(d[r]);
            }
          }
          if (n_left == 0 || n_left == rows.size()) continue;
          if (d_left < d0 || d_right < d0) continue;

          const double stat = cfg.split_rule == SplitRule::LogRank
                                  ? logrank_from_rows(rows, z, d, left_buf)
                                  : logrank_score_stat(rows, score_buf, left_buf);
          if (log) {
            log->push_back({tree_index, node_id, static_cast<int>(v), cand.cut,
                            cand.mask, data.schema().covariates[v].categorical,
                            stat, false});
          }
          if (stat > best_stat) {
            best_stat = stat;
            best_var = static_cast<int>(v);
            best_cand = cand;
            found = true;
            if (log) best_log_index = log->size() - 1;
          }
        }
      }
    }

    if (!found) {
      make_leaf(node_id, rows);
      return node_id;
    }
    if (log) (*log)[best_log_index].chosen = true;

    std::vector<std::uint32_t> left_rows, right_rows;
    for (std::uint32_t r : rows) {
      if (goes_left(static_cast<std::size_t>(best_var), best_cand,
                    data.x(data_row[r], static_cast<std::size_t>(best_var))))
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[static_cast<std::size_t>(node_id)].var = best_var;
    tree.nodes[static_cast<std::size_t>(node_id)].cut = best_cand.cut;
    tree.nodes[static_cast<std::size_t>(node_id)].level_mask = best_cand.mask;
    tree.nodes[static_cast<std::size_t>(node_id)].categorical =
        data.schema().covariates[static_cast<std::size_t>(best_var)].categorical;

    const int left_id = grow(std::move(left_rows));
    tree.nodes[static_cast<std::size_t>(node_id)].left = left_id;
    const int right_id = grow(std::move(right_rows));
    tree.nodes[static_cast<std::size_t>(node_id)].right = right_id;
    return node_id;
  }

  static bool goes_left(std::size_t, const CandidateSplit& cand, double value) {
    if (cand.mask != 0)
      return (cand.mask >> static_cast<std::uint64_t>(value)) & 1u;
    return value <= cand.cut;
  }

  std::vector<CandidateSplit> candidates_for(std::size_t v,
                                             const std::vector<std::uint32_t>& rows) {
    std::vector<CandidateSplit> out;
    const auto& spec = data.schema().covariates[v];
    if (!spec.categorical) {
      std::vector<double> vals;
      vals.reserve(rows.size());
      for (std::uint32_t r : rows) vals.push_back(data.x(data_row[r], v));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      if (vals.size() < 2) return out;
      const std::size_t n_cand = vals.size() - 1;  // cut at all but the max
      if (cfg.nsplit > 0 && n_cand > static_cast<std::size_t>(cfg.nsplit)) {
        std::vector<std::size_t> idx(n_cand);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (int k = 0; k < cfg.nsplit; ++k) {
          std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(k),
                                                       n_cand - 1);
          std::swap(idx[static_cast<std::size_t>(k)], idx[u(rng)]);
        }
        idx.resize(static_cast<std::size_t>(cfg.nsplit));
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) out.push_back({vals[i], 0});
      } else {
        for (std::size_t i = 0; i < n_cand; ++i) out.push_back({vals[i], 0});
      }
      return out;
    }

    // categorical: bipartitions of the levels present in this node, with the
    // highest present level pinned to the right side so each partition is
    // enumerated once
    std::vector<std::uint32_t> present;
    {
      std::vector<char> seen(spec.levels.size(), 0);
      for (std::uint32_t r : rows) {
        const auto code = static_cast<std::size_t>(data.x(data_row[r], v));
        if (!seen[code]) {
          seen[code] = 1;
          present.push_back(static_cast<std::uint32_t>(code));
        }
      }
      std::sort(present.begin(), present.end());
    }
    if (present.size() < 2) return out;
    const std::size_t free_levels = present.size() - 1;
    if (free_levels >= 63)
      throw input_error("rsf: categorical covariate '" + spec.name +
                        "' has too many levels for subset splits");
    const std::uint64_t n_masks = (std::uint64_t{1} << free_levels) - 1;

    auto mask_for = [&](std::uint64_t idx) {
      std::uint64_t mask = 0;
      for (std::size_t b = 0; b < free_levels; ++b)
        if ((idx >> b) & 1u) mask |= std::uint64_t{1} << present[b];
      return mask;
    };

    if (cfg.nsplit > 0 && n_masks > static_cast<std::uint64_t>(cfg.nsplit)) {
      std::vector<std::uint64_t> picks;
      std::uniform_int_distribution<std::uint64_t> u(1, n_masks);
      for (int k = 0; k < cfg.nsplit; ++k) picks.push_back(u(rng));
      std::sort(picks.begin(), picks.end());
      picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
      for (std::uint64_t i : picks) out.push_back({0.0, mask_for(i)});
    } else {
      if (free_levels > 20)
        throw input_error("rsf: exhaustive subset splits infeasible for '" +
                          spec.name + "'; set nsplit > 0");
      for (std::uint64_t i = 1; i <= n_masks; ++i) out.push_back({0.0, mask_for(i)});
    }
    return out;
  }

  void make_leaf(int node_id, const std::vector<std::uint32_t>& rows) {
    // Nelson-Aalen over the leaf's in-bag members, sampled onto the shared grid.
    std::vector<double> chf(grid.size(), 0.0);
    double h = 0.0;
    std::size_t at_risk = rows.size();
    std::size_t b = 0;
    std::size_t g = 0;
    while (b < rows.size()) {
      std::size_t e = b;
      std::size_t dj = 0;
      const double t = z[rows[b]];
      while (e < rows.size() && z[rows[e]] == t) {
        dj += static_cast<std::size_t>(d[rows[e]]);
        ++e;
      }
      if (dj > 0) {
        while (g < grid.size() && grid[g] < t) {
          chf[g] = h;
          ++g;
        }
        h += static_cast<double>(dj) / static_cast<double>(at_risk);
      }
      at_risk -= (e - b);
      b = e;
    }
    while (g < grid.size()) {
      chf[g] = h;
      ++g;
    }

    tree.nodes[static_cast<std::size_t>(node_id)].leaf =
        static_cast<int>(tree.leaf_chf.size());
    tree.leaf_chf.push_back(std::move(chf));
  }
};

void validate_config(const RsfConfig& cfg, std::size_t p) {
  if (cfg.n_trees < 1) throw input_error("rsf: n_trees must be >= 1");
  if (cfg.min_terminal_deaths < 1) throw input_error("rsf: min_terminal_deaths must be >= 1");
  if (cfg.mtry < 0 || static_cast<std::size_t>(cfg.mtry) > p)
    throw input_error("rsf: mtry must lie in [1, p]");
  if (cfg.nsplit < 0) throw input_error("rsf: nsplit must be >= 0");
}

int resolve_mtry(const RsfConfig& cfg, std::size_t p) {
  if (cfg.mtry > 0) return cfg.mtry;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
}

const std::vector<double>& tree_leaf_for(const SurvTree& tree,
                                         const std::vector<double>& x) {
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const RsfNode& node = tree.nodes[static_cast<std::size_t>(id)];
    const double value = x[static_cast<std::size_t>(node.var)];
    const bool go_left = node.categorical
                             ? ((node.level_mask >> static_cast<std::uint64_t>(value)) & 1u)
                             : (value <= node.cut);
    id = go_left ? node.left : node.right;
  }
  return tree.leaf_chf[static_cast<std::size_t>(
      tree.nodes[static_cast<std::size_t>(id)].leaf)];
}

// Same walk, but any node splitting on `v` routes by a coin flip.
const std::vector<double>& tree_leaf_random_daughter(const SurvTree& tree,
                                                     const std::vector<double>& x,
                                                     int v, Rng& rng) {
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const RsfNode& node = tree.nodes[static_cast<std::size_t>(id)];
    bool go_left;
    if (node.var == v) {
      go_left = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
    } else {
      const double value = x[static_cast<std::size_t>(node.var)];
      go_left = node.categorical
                    ? ((node.level_mask >> static_cast<std::uint64_t>(value)) & 1u)
                    : (value <= node.cut);
    }
    id = go_left ? node.left : node.right;
  }
  return tree.leaf_chf[static_cast<std::size_t>(
      tree.nodes[static_cast<std::size_t>(id)].leaf)];
}

}  // namespace

double logrank_split_stat(const SurvDataset& left, const SurvDataset& right) {
  const std::size_t n = left.n() + right.n();
  std::vector<double> z(n);
  std::vector<int> d(n);
  std::vector<char> is_left(n, 0);
  for (std::size_t i = 0; i < left.n(); ++i) {
    z[i] = left.time(i);
    d[i] = left.event(i);
    is_left[i] = 1;
  }
  for (std::size_t i = 0; i < right.n(); ++i) {
    z[left.n() + i] = right.time(i);
    d[left.n() + i] = right.event(i);
  }
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  std::sort(rows.begin(), rows.end(),
            [&](std::uint32_t a, std::uint32_t b) { return z[a] != z[b] ? z[a] < z[b] : a < b; });
  return logrank_from_rows(rows, z, d, is_left);
}

double logrank_score_split_stat(const SurvDataset& left, const SurvDataset& right) {
  const std::size_t n = left.n() + right.n();
  std::vector<double> z(n);
  std::vector<int> d(n);
  std::vector<char> is_left(n, 0);
  for (std::size_t i = 0; i < left.n(); ++i) {
    z[i] = left.time(i);
    d[i] = left.event(i);
    is_left[i] = 1;
  }
  for (std::size_t i = 0; i < right.n(); ++i) {
    z[left.n() + i] = right.time(i);
    d[left.n() + i] = right.event(i);
  }
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  std::vector<double> score(n, 0.0);
  logrank_scores_from_rows(rows, z, d, score);
  return logrank_score_stat(rows, score, is_left);
}

Forest fit_forest(const SurvDataset& data, const RsfConfig& config, int n_threads,
                  SplitLog* log) {
  validate_config(config, data.n_covariates());
  if (data.n_events() == 0) throw input_error("rsf: dataset has no events");

  Forest forest;
  forest.config = config;
  forest.schema = data.schema();

  // shared grid: distinct event times of the full training sample
  std::vector<double> event_times;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (data.event(i)) event_times.push_back(data.time(i));
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());
  forest.grid = TimeGrid(std::move(event_times));

  const int mtry = resolve_mtry(config, data.n_covariates());
  const std::size_t n_trees = static_cast<std::size_t>(config.n_trees);
  forest.trees.resize(n_trees);
  std::vector<std::vector<SplitEval>> tree_logs(log ? n_trees : 0);

  parallel_for(n_trees, n_threads, [&](std::size_t b) {
    TreeGrower grower(data, config, mtry, forest.grid, static_cast<int>(b),
                      log ? &tree_logs[b] : nullptr);
    grower.run();
    forest.trees[b] = std::move(grower.tree);
  });

  if (log)
    for (auto& tl : tree_logs)
      log->evals.insert(log->evals.end(), tl.begin(), tl.end());
  return forest;
}

CumHazardCurve predict_chf(const Forest& forest, const std::vector<double>& x_raw) {
  forest.schema.validate_raw_row(x_raw);
  std::vector<double> acc(forest.grid.size(), 0.0);
  for (const auto& tree : forest.trees) {
    const auto& leaf = tree_leaf_for(tree, x_raw);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += leaf[j];
  }
  const double inv_b = 1.0 / static_cast<double>(forest.trees.size());
  for (double& v : acc) v *= inv_b;
  return CumHazardCurve(forest.grid, std::move(acc));
}

OobPrediction oob_predict(const Forest& forest, const SurvDataset& data) {
  const std::size_t n = data.n();
  std::vector<std::vector<char>> inbag_flag(forest.trees.size(),
                                            std::vector<char>(n, 0));
  for (std::size_t b = 0; b < forest.trees.size(); ++b)
    for (std::uint32_t r : forest.trees[b].inbag) {
      if (r >= n) throw input_error("rsf: forest was not trained on this dataset");
      inbag_flag[b][r] = 1;
    }

  OobPrediction out;
  out.grid = forest.grid;
  out.valid.assign(n, false);
  out.chf.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> acc(forest.grid.size(), 0.0);
    std::size_t used = 0;
    std::vector<double> x(data.row(i), data.row(i) + data.n_covariates());
    for (std::size_t b = 0; b < forest.trees.size(); ++b) {
      if (inbag_flag[b][i]) continue;
      const auto& leaf = tree_leaf_for(forest.trees[b], x);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += leaf[j];
      ++used;
    }
    if (used == 0) continue;
    for (double& v : acc) v /= static_cast<double>(used);
    out.valid[i] = true;
    out.chf[i] = std::move(acc);
  }
  return out;
}

std::vector<double> variable_importance(const Forest& forest, const SurvDataset& data,
                                        int n_threads) {
  const std::size_t n = data.n();
  const std::size_t p = data.n_covariates();
  const OobPrediction oob = oob_predict(forest, data);

  std::vector<std::size_t> valid_rows;
  for (std::size_t i = 0; i < n; ++i)
    if (oob.valid[i]) valid_rows.push_back(i);
  if (valid_rows.empty())
    throw input_error("rsf: no record has an out-of-bag prediction");

  auto mortality_of = [&](const std::vector<std::vector<double>>& chf) {
    RiskScores s;
    s.reserve(valid_rows.size());
    for (std::size_t i : valid_rows) {
      double m = 0.0;
      for (double v : chf[i]) m += v;
      s.push_back(m);
    }
    return s;
  };

  const SurvDataset eval_data = data.subset(valid_rows);
  const double base_error =
      1.0 - concordance_index(mortality_of(oob.chf), eval_data);

  std::vector<std::vector<char>> inbag_flag(forest.trees.size(),
                                            std::vector<char>(n, 0));
  for (std::size_t b = 0; b < forest.trees.size(); ++b)
    for (std::uint32_t r : forest.trees[b].inbag) inbag_flag[b][r] = 1;

  std::vector<double> vimp(p, 0.0);
  parallel_for(p, n_threads, [&](std::size_t v) {
    Rng rng = make_rng(forest.config.seed, kVimpStream, v);
    std::vector<std::vector<double>> chf(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!oob.valid[i]) continue;
      std::vector<double> acc(forest.grid.size(), 0.0);
      std::size_t used = 0;
      std::vector<double> x(data.row(i), data.row(i) + p);
      for (std::size_t b = 0; b < forest.trees.size(); ++b) {
        if (inbag_flag[b][i]) continue;
        const auto& leaf = tree_leaf_random_daughter(forest.trees[b], x,
                                                     static_cast<int>(v), rng);
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += leaf[j];
        ++used;
      }
      for (double& val : acc) val /= static_cast<double>(used);
      chf[i] = std::move(acc);
    }
    vimp[v] = (1.0 - concordance_index(mortality_of(chf), eval_data)) - base_error;
  });
  return vimp;
}

}  // namespace survkit
