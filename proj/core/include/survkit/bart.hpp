#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"
#include "survkit/rng.hpp"

namespace survkit {

// Discrete-time probit survival model: a sum of m regression trees over the
// joined covariate space (time as covariate 0, then the one-of-K encoded x),
// fitted by truncated-normal data augmentation and backfitting MCMC.

struct BartPriors {
  double alpha = 0.95;  // growth prior: nonterminal probability alpha (1+d)^-zeta
  double zeta = 2.0;
  int m = 50;            // number of trees
  double leaf_sd = 0.0;  // 0 = default sqrt(2.25 / m)
  double mu0 = std::numeric_limits<double>::quiet_NaN();  // NaN = from event fraction

  double effective_leaf_sd() const {
    return leaf_sd > 0.0 ? leaf_sd : std::sqrt(2.25 / static_cast<double>(m));
  }
};

struct BartConfig {
  BartPriors priors;
  int n_burn = 5000;
  int n_keep = 10000;
  int thin = 1;
  std::uint64_t seed = 0;
  std::size_t max_grid_points = 100;
};

// Long-format expansion: subject i contributes one row per grid time z_(j)
// with z_(j) <= z_i; y is 0 on every row except the last row of an event
// subject. Covariates are stored once per subject, one-of-K encoded.
struct ExpandedData {
  TimeGrid grid;
  std::size_t n_subjects = 0;
  std::size_t width = 0;  // encoded covariate count (time not included)
  std::vector<std::uint32_t> subject;     // per row
  std::vector<std::uint32_t> grid_index;  // per row, 0-based
  std::vector<std::uint8_t> y;            // per row
  std::vector<double> x_encoded;          // n_subjects x width, row-major

  std::size_t n_rows() const { return y.size(); }
  double row_time(std::size_t r) const { return grid[grid_index[r]]; }
  // joined covariate: 0 = time, v >= 1 = encoded column v-1
  double row_value(std::size_t r, std::size_t joined_var) const {
    return joined_var == 0
               ? row_time(r)
               : x_encoded[subject[r] * width + (joined_var - 1)];
  }
  std::size_t n_joined() const { return width + 1; }
};

struct BartTreeNode {
  int left = -1;
  int right = -1;
  int var = -1;    // joined covariate index; -1 on leaves
  double cut = 0.0;
  double mu = 0.0;  // leaf value; 0 on interior nodes

  bool is_leaf() const { return left < 0; }
};

struct BartTree {
  std::vector<BartTreeNode> nodes;  // nodes[0] is the root
};

struct BartMoveStats {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double rate() const {
    return proposed == 0 ? 0.0
                         : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

struct BartDiagnostics {
  BartMoveStats grow, prune, change;
};

// Mutable chain state. `rows_by_leaf` and `g` are derived caches kept in sync
// by init_bart_state / mcmc_step: per tree, the expanded rows sitting in each
// leaf (indexed by node id) and the tree's fitted value per row.
struct BartState {
  std::vector<BartTree> trees;
  std::vector<double> latent;  // per expanded row
  std::vector<double> f;       // sum-of-trees fit per expanded row (without mu0)
  std::vector<std::vector<std::vector<std::uint32_t>>> rows_by_leaf;
  std::vector<std::vector<double>> g;  // per tree, per row
};

struct BartPosterior {
  Schema schema;  // raw covariate schema of the training data
  TimeGrid grid;
  double mu0 = 0.0;
  BartConfig config;
  std::vector<std::vector<BartTree>> draws;  // n_keep ensembles of m trees
  BartDiagnostics diagnostics;
};

// Survival curve with a pointwise equal-tailed 95% credible band.
struct CredibleCurve {
  SurvivalCurve mean;
  std::vector<double> lower, upper;
};

struct EventProbSummary {
  double mean = 0.0;
  double lower = 0.0, upper = 0.0;
};

ExpandedData expand_survival_data(const SurvDataset& data, const TimeGrid& grid);

// alpha (1+d)^-zeta
double node_nonterminal_prob(int depth, const BartPriors& priors);

// N(mu, 1) truncated to (0, inf) when y = 1, to (-inf, 0) when y = 0.
double sample_latents(int y, double mu, Rng& rng);

// Structure-only draw from the growth prior (split rules ignored); used to
// audit the alpha (1+d)^-zeta law.
BartTree sample_tree_structure_prior(const BartPriors& priors, Rng& rng);

BartState init_bart_state(const ExpandedData& expanded, const BartPriors& priors);

// One backfitting sweep: redraw every latent from its truncated normal, then
// for each tree propose GROW (0.25) / PRUNE (0.25) / CHANGE (0.50), accept by
// Metropolis-Hastings against the integrated leaf marginal likelihood (unit
// error variance), and redraw all leaf values from their normal full
// conditionals. Infeasible proposals reject and leave the tree unchanged.
void mcmc_step(BartState& state, const ExpandedData& expanded, const BartPriors& priors,
               Rng& rng, BartDiagnostics* diag = nullptr);

BartPosterior fit_bart_survival(const SurvDataset& data, const BartConfig& config);

// Posterior of p(t, x) = Phi(mu0 + f(t, x)) at a grid time t.
EventProbSummary posterior_event_prob(const BartPosterior& post, double t,
                                      const std::vector<double>& x_raw);

// Per draw, S(z_(j)|x) = prod_{l<=j} (1 - p(z_(l), x)); posterior mean and
// pointwise 95% band over the grid.
CredibleCurve survival_curve(const BartPosterior& post, const std::vector<double>& x_raw);

// Posterior mean of p(z_(j), x) / (z_(j) - z_(j-1)), with z_(0) = 0 and j
// 1-based.
double hazard_rate(const BartPosterior& post, const std::vector<double>& x_raw,
                   std::size_t j);

// Fixes the covariates named in `fixed` (raw index, raw value) and averages
// survival curves over the completions taken from data's rows, per draw.
CredibleCurve partial_dependence_survival(
    const BartPosterior& post, const std::vector<std::pair<std::size_t, double>>& fixed,
    const SurvDataset& data);

// Mean per-draw proportion of splitting rules by joined covariate (index 0 =
// time). Draws with no splits anywhere contribute a uniform 1/p vector.
std::vector<double> variable_usage(const BartPosterior& post);

}  // namespace survkit
