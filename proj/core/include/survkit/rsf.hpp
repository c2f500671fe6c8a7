#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"

namespace survkit {

enum class SplitRule { LogRank, LogRankScore };

struct RsfConfig {
  int n_trees = 1000;
  int mtry = 0;  // 0 = ceil(sqrt(p)) at fit time
  int min_terminal_deaths = 3;
  SplitRule split_rule = SplitRule::LogRank;
  int nsplit = 0;  // 0 = exhaustive candidate cutpoints
  std::uint64_t seed = 0;
};

// Interior nodes carry (var, cut) for numeric splits or (var, level_mask) for
// categorical splits (bit l set = level l goes left). Leaves carry an index
// into leaf_chf.
struct RsfNode {
  int left = -1;
  int right = -1;
  int var = -1;
  double cut = 0.0;
  std::uint64_t level_mask = 0;
  bool categorical = false;
  int leaf = -1;

  bool is_leaf() const { return left < 0; }
};

struct SurvTree {
  std::vector<RsfNode> nodes;  // nodes[0] is the root
  std::vector<std::vector<double>> leaf_chf;  // per leaf, on the shared grid
  std::vector<std::uint32_t> inbag;           // bootstrap row indices, with repeats
};

struct Forest {
  std::vector<SurvTree> trees;
  RsfConfig config;
  TimeGrid grid;  // distinct event times of the training data
  Schema schema;
};

// Candidate-split evaluations captured during growth, for auditing that each
// chosen split attains the maximum statistic.
struct SplitEval {
  int tree = 0;
  int node = 0;
  int var = -1;
  double cut = 0.0;
  std::uint64_t level_mask = 0;
  bool categorical = false;
  double stat = 0.0;
  bool chosen = false;
};
struct SplitLog {
  std::vector<SplitEval> evals;
};

// Standardized log-rank statistic between two samples, summed over pooled
// distinct event times with risk set > 1:
//   |sum_j (d_Lj - R_Lj d_j / R_j)| / sqrt(sum_j R_Lj R_Rj d_j (R_j - d_j) / (R_j^2 (R_j - 1)))
// Zero variance yields 0.
double logrank_split_stat(const SurvDataset& left, const SurvDataset& right);

// Standardized log-rank-score statistic: censoring-adjusted rank scores
//   a_i = d_i - sum_{k: z_k <= z_i} d_k / (n - rank_k + 1)
// over the pooled sample (ranks 1..n ordered by time, events before
// censorings at ties, input order last), then
//   |sum_{i in left} a_i - n_L abar| / sqrt(n_L (1 - n_L/n) s_a^2)
// with s_a^2 the sample variance (n-1 denominator). Zero variance yields 0.
double logrank_score_split_stat(const SurvDataset& left, const SurvDataset& right);

// Grows config.n_trees bootstrap survival trees. At each node, mtry
// covariates are drawn without replacement and every candidate cutpoint (or
// nsplit random ones per covariate) is scored with the configured statistic;
// the best positive-statistic split satisfying the d_0 rule (each child gets
// >= min_terminal_deaths deaths) is taken. Leaves store Nelson-Aalen CHFs of
// their in-bag members on the shared grid. Deterministic for a fixed seed
// regardless of n_threads. `log` (optional) records every evaluated candidate.
Forest fit_forest(const SurvDataset& data, const RsfConfig& config, int n_threads = 0,
                  SplitLog* log = nullptr);

// Ensemble CHF: arithmetic mean of per-tree leaf CHFs for x (raw covariate
// row, level codes for categoricals).
CumHazardCurve predict_chf(const Forest& forest, const std::vector<double>& x_raw);

struct OobPrediction {
  TimeGrid grid;
  std::vector<bool> valid;  // false = record was in-bag in every tree
  std::vector<std::vector<double>> chf;  // per record, empty when !valid
};

// Per-record ensemble CHF averaged over the trees whose bootstrap sample
// excludes the record.
OobPrediction oob_predict(const Forest& forest, const SurvDataset& data);

// Random-daughter variable importance: baseline OOB error is 1 - C-index of
// OOB mortality (the grid-summed ensemble CHF); for each covariate v, cases
// are re-dropped with every split on v replaced by a coin flip, and
// VIMP(v) = perturbed error - baseline error.
std::vector<double> variable_importance(const Forest& forest, const SurvDataset& data,
                                        int n_threads = 0);

}  // namespace survkit
