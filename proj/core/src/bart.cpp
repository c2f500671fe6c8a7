#include "survkit/bart.hpp"

#include <algorithm>
#include <cmath>

#include "survkit/errors.hpp"
#include "survkit/estimators.hpp"
#include "survkit/mathutil.hpp"
#include "survkit/parallel.hpp"

namespace survkit {

namespace {

constexpr std::uint64_t kBartChainStream = 0x62617274;  // "bart"

// Freed node slots (left over from PRUNE, reused by later GROWs) are leaves
// tagged var = -2; they are unreachable from the root and carry no rows.
constexpr int kFreedSlot = -2;

void validate_priors(const BartPriors& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw input_error("bart: alpha must lie in (0, 1)");
  if (!(p.zeta >= 0.0)) throw input_error("bart: zeta must be >= 0");
  if (p.m < 1) throw input_error("bart: m must be >= 1");
  if (!std::isnan(p.mu0) && !std::isfinite(p.mu0))
    throw input_error("bart: mu0 must be finite");
  if (!(p.effective_leaf_sd() > 0.0)) throw input_error("bart: leaf sd must be > 0");
}

std::vector<int> node_depths(const BartTree& tree) {
  std::vector<int> depth(tree.nodes.size(), -1);
  depth[0] = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const BartTreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf()) continue;
    depth[static_cast<std::size_t>(n.left)] = depth[static_cast<std::size_t>(id)] + 1;
    depth[static_cast<std::size_t>(n.right)] = depth[static_cast<std::size_t>(id)] + 1;
    stack.push_back(n.left);
    stack.push_back(n.right);
  }
  return depth;
}

double eval_tree(const BartTree& tree, double t, const double* enc) {
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const BartTreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    const double v = n.var == 0 ? t : enc[n.var - 1];
    id = v <= n.cut ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)].mu;
}

double ensemble_fit(const std::vector<BartTree>& draw, double t, const double* enc) {
  double f = 0.0;
  for (const BartTree& tree : draw) f += eval_tree(tree, t, enc);
  return f;
}

// Log marginal likelihood of one leaf with n rows whose residuals sum to s,
// under unit error variance and leaf precision lambda; terms shared by the
// trees being compared (the residual sum of squares, the 2*pi powers) are
// dropped.
double leaf_term(double n, double s, double lambda) {
  return 0.5 * std::log(lambda / (lambda + n)) + 0.5 * s * s / (lambda + n);
}

// Deterministic preorder copy that drops freed slots; retained draws use this
// canonical numbering so equal-seed runs serialize identically.
BartTree compact_tree(const BartTree& tree) {
  BartTree out;
  struct Frame {
    int old_id;
    int parent_new;
    bool is_left;
  };
  std::vector<Frame> frames{{0, -1, false}};
  while (!frames.empty()) {
    const Frame fr = frames.back();
    frames.pop_back();
    const int new_id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(tree.nodes[static_cast<std::size_t>(fr.old_id)]);
    out.nodes.back().left = -1;
    out.nodes.back().right = -1;
    if (fr.parent_new >= 0) {
      BartTreeNode& parent = out.nodes[static_cast<std::size_t>(fr.parent_new)];
      (fr.is_left ? parent.left : parent.right) = new_id;
    }
    const BartTreeNode& old = tree.nodes[static_cast<std::size_t>(fr.old_id)];
    if (!old.is_leaf()) {
      frames.push_back({old.right, new_id, false});
      frames.push_back({old.left, new_id, true});
    }
  }
  return out;
}

// Row-set queries against the joined covariate space (time = var 0).
struct NodeRows {
  const ExpandedData* expanded;

  std::vector<double> distinct_values(const std::vector<std::uint32_t>& rows,
                                      std::size_t v) const {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (std::uint32_t r : rows) vals.push_back(expanded->row_value(r, v));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return vals;
  }

  bool var_available(const std::vector<std::uint32_t>& rows, std::size_t v) const {
    if (rows.size() < 2) return false;
    const double first = expanded->row_value(rows[0], v);
    for (std::size_t k = 1; k < rows.size(); ++k)
      if (expanded->row_value(rows[k], v) != first) return true;
    return false;
  }

  bool any_var_available(const std::vector<std::uint32_t>& rows) const {
    for (std::size_t v = 0; v < expanded->n_joined(); ++v)
      if (var_available(rows, v)) return true;
    return false;
  }

  std::vector<std::size_t> available_vars(const std::vector<std::uint32_t>& rows) const {
    std::vector<std::size_t> vars;
    for (std::size_t v = 0; v < expanded->n_joined(); ++v)
      if (var_available(rows, v)) vars.push_back(v);
    return vars;
  }
};

struct DrawnRule {
  std::size_t var = 0;
  double cut = 0.0;
};

// Rule from the cutpoint prior: uniform covariate among those with >= 2
// distinct values in the node, uniform cutpoint over that covariate's
// distinct values excluding the maximum (so both children are nonempty).
// Returns false when the node admits no rule.
bool draw_rule(const NodeRows& view, const std::vector<std::uint32_t>& rows, Rng& rng,
               DrawnRule& rule) {
  const auto vars = view.available_vars(rows);
  if (vars.empty()) return false;
  rule.var = vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)];
  const auto vals = view.distinct_values(rows, rule.var);
  const std::size_t n_cut = vals.size() - 1;
  rule.cut = vals[std::uniform_int_distribution<std::size_t>(0, n_cut - 1)(rng)];
  return true;
}

double default_mu0(const ExpandedData& expanded) {
  const double n = static_cast<double>(expanded.n_rows());
  if (n == 0.0) throw input_error("bart: expanded data has no rows");
  double events = 0.0;
  for (std::uint8_t v : expanded.y) events += v;
  // clamp away from {0,1}: an all-event or all-censored expansion would put
  // the probit offset at +-infinity
  const double frac = std::min(std::max(events / n, 0.5 / n), 1.0 - 0.5 / n);
  return normal_quantile(frac);
}

double resolve_mu0(const BartPriors& priors, const ExpandedData& expanded) {
  return std::isnan(priors.mu0) ? default_mu0(expanded) : priors.mu0;
}

// One tree's Metropolis-Hastings sweep over a shared chain state. Residuals
// exclude the tree's own contribution through the cached per-tree fit g, so
// structural moves never re-evaluate the other m-1 trees.
struct TreeMover {
  BartState& state;
  const ExpandedData& expanded;
  const BartPriors& priors;
  double mu0;
  Rng& rng;
  BartDiagnostics* diag;
  double lambda;  // 1 / leaf_sd^2

  double resid(std::size_t j, std::uint32_t r) const {
    return state.latent[r] - mu0 - state.f[r] + state.g[j][r];
  }

  double resid_sum(std::size_t j, const std::vector<std::uint32_t>& rows) const {
    double s = 0.0;
    for (std::uint32_t r : rows) s += resid(j, r);
    return s;
  }

  std::vector<int> leaf_ids(std::size_t j) const {
    const BartTree& tree = state.trees[j];
    std::vector<int> ids;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
      if (tree.nodes[i].is_leaf() && tree.nodes[i].var != kFreedSlot &&
          !state.rows_by_leaf[j][i].empty())
        ids.push_back(static_cast<int>(i));
    return ids;
  }

  // Interior nodes whose children are both leaves; PRUNE and CHANGE act here.
  std::vector<int> prunable_ids(const BartTree& tree) const {
    std::vector<int> ids;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const BartTreeNode& n = tree.nodes[i];
      if (!n.is_leaf() && tree.nodes[static_cast<std::size_t>(n.left)].is_leaf() &&
          tree.nodes[static_cast<std::size_t>(n.right)].is_leaf())
        ids.push_back(static_cast<int>(i));
    }
    return ids;
  }

  int alloc_node(std::size_t j) {
    BartTree& tree = state.trees[j];
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (tree.nodes[i].is_leaf() && tree.nodes[i].var == kFreedSlot) {
        tree.nodes[i] = BartTreeNode{};
        return static_cast<int>(i);
      }
    }
    tree.nodes.emplace_back();
    state.rows_by_leaf[j].emplace_back();
    return static_cast<int>(tree.nodes.size() - 1);
  }

  void free_node(std::size_t j, int id) {
    BartTreeNode& n = state.trees[j].nodes[static_cast<std::size_t>(id)];
    n = BartTreeNode{};
    n.var = kFreedSlot;
    state.rows_by_leaf[j][static_cast<std::size_t>(id)].clear();
  }

  void sweep(std::size_t j) {
    const double u = sample_uniform(rng);
    if (u < 0.25)
      grow(j);
    else if (u < 0.5)
      prune(j);
    else
      change(j);
    redraw_leaves(j);
  }

  void grow(std::size_t j) {
    if (diag) ++diag->grow.proposed;
    BartTree& tree = state.trees[j];
    const NodeRows view{&expanded};

    std::vector<int> growable;
    for (int id : leaf_ids(j))
      if (view.any_var_available(state.rows_by_leaf[j][static_cast<std::size_t>(id)]))
        growable.push_back(id);
    if (growable.empty()) return;

    const int leaf =
        growable[std::uniform_int_distribution<std::size_t>(0, growable.size() - 1)(rng)];
    DrawnRule rule;
    if (!draw_rule(view, state.rows_by_leaf[j][static_cast<std::size_t>(leaf)], rng, rule))
      return;

    std::vector<std::uint32_t> left_rows, right_rows;
    for (std::uint32_t r : state.rows_by_leaf[j][static_cast<std::size_t>(leaf)])
      (expanded.row_value(r, rule.var) <= rule.cut ? left_rows : right_rows).push_back(r);

    const auto depth = node_depths(tree);
    const double pd = node_nonterminal_prob(depth[static_cast<std::size_t>(leaf)], priors);
    const double pd1 =
        node_nonterminal_prob(depth[static_cast<std::size_t>(leaf)] + 1, priors);

    const double s_left = resid_sum(j, left_rows);
    const double s_right = resid_sum(j, right_rows);
    const double n_left = static_cast<double>(left_rows.size());
    const double n_right = static_cast<double>(right_rows.size());
    const double log_lr = leaf_term(n_left, s_left, lambda) +
                          leaf_term(n_right, s_right, lambda) -
                          leaf_term(n_left + n_right, s_left + s_right, lambda);

    // prunable count in the proposed tree: the grown leaf becomes prunable,
    // and its parent stops being prunable if the sibling is a leaf
    std::size_t w2_after = prunable_ids(tree).size() + 1;
    for (const BartTreeNode& n : tree.nodes) {
      if (n.is_leaf() || (n.left != leaf && n.right != leaf)) continue;
      const int sibling = n.left == leaf ? n.right : n.left;
      if (tree.nodes[static_cast<std::size_t>(sibling)].is_leaf()) --w2_after;
      break;
    }

    // rule prior cancels against the rule proposal; the grow and prune move
    // probabilities are equal and cancel too
    const double log_accept = std::log(pd) + 2.0 * std::log(1.0 - pd1) -
                              std::log(1.0 - pd) +
                              std::log(static_cast<double>(growable.size())) -
                              std::log(static_cast<double>(w2_after)) + log_lr;

    if (std::log(sample_uniform(rng)) >= log_accept) return;
    if (diag) ++diag->grow.accepted;

    const int left_id = alloc_node(j);
    const int right_id = alloc_node(j);
    BartTreeNode& parent = state.trees[j].nodes[static_cast<std::size_t>(leaf)];
    parent.left = left_id;
    parent.right = right_id;
    parent.var = static_cast<int>(rule.var);
    parent.cut = rule.cut;
    parent.mu = 0.0;
    state.rows_by_leaf[j][static_cast<std::size_t>(left_id)] = std::move(left_rows);
    state.rows_by_leaf[j][static_cast<std::size_t>(right_id)] = std::move(right_rows);
    state.rows_by_leaf[j][static_cast<std::size_t>(leaf)].clear();
  }

  void prune(std::size_t j) {
    if (diag) ++diag->prune.proposed;
    BartTree& tree = state.trees[j];
    const NodeRows view{&expanded};

    const auto prunable = prunable_ids(tree);
    if (prunable.empty()) return;
    const int node =
        prunable[std::uniform_int_distribution<std::size_t>(0, prunable.size() - 1)(rng)];
    const int left_child = tree.nodes[static_cast<std::size_t>(node)].left;
    const int right_child = tree.nodes[static_cast<std::size_t>(node)].right;
    const auto& left_rows = state.rows_by_leaf[j][static_cast<std::size_t>(left_child)];
    const auto& right_rows = state.rows_by_leaf[j][static_cast<std::size_t>(right_child)];

    const auto depth = node_depths(tree);
    const double pd = node_nonterminal_prob(depth[static_cast<std::size_t>(node)], priors);
    const double pd1 =
        node_nonterminal_prob(depth[static_cast<std::size_t>(node)] + 1, priors);

    const double s_left = resid_sum(j, left_rows);
    const double s_right = resid_sum(j, right_rows);
    const double n_left = static_cast<double>(left_rows.size());
    const double n_right = static_cast<double>(right_rows.size());
    const double log_lr = leaf_term(n_left + n_right, s_left + s_right, lambda) -
                          leaf_term(n_left, s_left, lambda) -
                          leaf_term(n_right, s_right, lambda);

    // growable leaf count in the proposed tree: the merged node is growable
    // by construction (its split var has >= 2 distinct values among its rows)
    std::size_t w_after = 1;
    for (int id : leaf_ids(j)) {
      if (id == left_child || id == right_child) continue;
      if (view.any_var_available(state.rows_by_leaf[j][static_cast<std::size_t>(id)]))
        ++w_after;
    }

    const double log_accept = std::log(1.0 - pd) - std::log(pd) -
                              2.0 * std::log(1.0 - pd1) +
                              std::log(static_cast<double>(prunable.size())) -
                              std::log(static_cast<double>(w_after)) + log_lr;

    if (std::log(sample_uniform(rng)) >= log_accept) return;
    if (diag) ++diag->prune.accepted;

    std::vector<std::uint32_t> merged;
    merged.reserve(left_rows.size() + right_rows.size());
    merged.insert(merged.end(), left_rows.begin(), left_rows.end());
    merged.insert(merged.end(), right_rows.begin(), right_rows.end());

    free_node(j, left_child);
    free_node(j, right_child);
    BartTreeNode& parent = state.trees[j].nodes[static_cast<std::size_t>(node)];
    parent.left = -1;
    parent.right = -1;
    parent.var = -1;
    parent.cut = 0.0;
    state.rows_by_leaf[j][static_cast<std::size_t>(node)] = std::move(merged);
  }

  // Rule replacement at a node whose children are both leaves. The new rule
  // is drawn from the cutpoint prior, which equals the proposal, so structure
  // prior and proposal cancel and the acceptance ratio is the likelihood
  // ratio alone.
  void change(std::size_t j) {
    if (diag) ++diag->change.proposed;
    BartTree& tree = state.trees[j];
    const NodeRows view{&expanded};

    const auto candidates = prunable_ids(tree);
    if (candidates.empty()) return;
    const int node = candidates[std::uniform_int_distribution<std::size_t>(
        0, candidates.size() - 1)(rng)];
    BartTreeNode& n = tree.nodes[static_cast<std::size_t>(node)];

    auto& old_left = state.rows_by_leaf[j][static_cast<std::size_t>(n.left)];
    auto& old_right = state.rows_by_leaf[j][static_cast<std::size_t>(n.right)];
    std::vector<std::uint32_t> merged;
    merged.reserve(old_left.size() + old_right.size());
    merged.insert(merged.end(), old_left.begin(), old_left.end());
    merged.insert(merged.end(), old_right.begin(), old_right.end());

    DrawnRule rule;
    if (!draw_rule(view, merged, rng, rule)) return;

    std::vector<std::uint32_t> new_left, new_right;
    for (std::uint32_t r : merged)
      (expanded.row_value(r, rule.var) <= rule.cut ? new_left : new_right).push_back(r);

    const double log_lr =
        leaf_term(static_cast<double>(new_left.size()), resid_sum(j, new_left), lambda) +
        leaf_term(static_cast<double>(new_right.size()), resid_sum(j, new_right), lambda) -
        leaf_term(static_cast<double>(old_left.size()), resid_sum(j, old_left), lambda) -
        leaf_term(static_cast<double>(old_right.size()), resid_sum(j, old_right), lambda);

    if (std::log(sample_uniform(rng)) >= log_lr) return;
    if (diag) ++diag->change.accepted;

    n.var = static_cast<int>(rule.var);
    n.cut = rule.cut;
    old_left = std::move(new_left);
    old_right = std::move(new_right);
  }

  // Redraws every leaf value from N(s/(lambda+n), 1/(lambda+n)) and refreshes
  // the per-row tree fit g and the ensemble sum f.
  void redraw_leaves(std::size_t j) {
    BartTree& tree = state.trees[j];
    auto& g = state.g[j];
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      if (!tree.nodes[id].is_leaf() || tree.nodes[id].var == kFreedSlot) continue;
      const auto& rows = state.rows_by_leaf[j][id];
      const double n = static_cast<double>(rows.size());
      const double s = resid_sum(j, rows);
      const double var = 1.0 / (lambda + n);
      const double mu = sample_normal(rng, s * var, std::sqrt(var));
      tree.nodes[id].mu = mu;
      for (std::uint32_t r : rows) {
        state.f[r] += mu - g[r];
        g[r] = mu;
      }
    }
  }
};

bool same_schema(const Schema& a, const Schema& b) {
  if (a.covariates.size() != b.covariates.size()) return false;
  for (std::size_t i = 0; i < a.covariates.size(); ++i) {
    const CovariateSpec& ca = a.covariates[i];
    const CovariateSpec& cb = b.covariates[i];
    if (ca.name != cb.name || ca.categorical != cb.categorical || ca.levels != cb.levels)
      return false;
  }
  return true;
}

std::vector<double> encode_raw(const Schema& schema, const std::vector<double>& x_raw) {
  schema.validate_raw_row(x_raw);
  std::vector<double> enc(schema.encoded_width(), 0.0);
  schema.encode_row(x_raw.data(), enc.data());
  return enc;
}

// Per-draw survival over the grid: S(z_(j)) = prod_{l<=j} (1 - Phi(mu0 + f)).
std::vector<double> draw_survival(const std::vector<BartTree>& draw, double mu0,
                                  const TimeGrid& grid, const double* enc) {
  std::vector<double> s(grid.size());
  double running = 1.0;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    running *= 1.0 - normal_cdf(mu0 + ensemble_fit(draw, grid[l], enc));
    s[l] = running;
  }
  return s;
}

CredibleCurve summarize_draw_curves(const TimeGrid& grid,
                                    const std::vector<std::vector<double>>& per_draw) {
  const std::size_t n_draws = per_draw.size();
  CredibleCurve out;
  std::vector<double> mean(grid.size()), lower(grid.size()), upper(grid.size());
  std::vector<double> column(n_draws);
  for (std::size_t l = 0; l < grid.size(); ++l) {
    for (std::size_t d = 0; d < n_draws; ++d) column[d] = per_draw[d][l];
    mean[l] = mean_of(column);
    lower[l] = quantile_type7(column, 0.025);
    upper[l] = quantile_type7(column, 0.975);
  }
  out.mean = SurvivalCurve(grid, std::move(mean));
  out.lower = std::move(lower);
  out.upper = std::move(upper);
  return out;
}

}  // namespace

ExpandedData expand_survival_data(const SurvDataset& data, const TimeGrid& grid) {
  if (grid.empty()) throw input_error("bart: empty time grid");

  ExpandedData out;
  out.grid = grid;
  out.n_subjects = data.n();
  out.width = data.schema().encoded_width();
  out.x_encoded = data.encoded_matrix();

  for (std::size_t i = 0; i < data.n(); ++i) {
    const std::size_t n_i = grid.count_leq(data.time(i));
    for (std::size_t j = 0; j < n_i; ++j) {
      out.subject.push_back(static_cast<std::uint32_t>(i));
      out.grid_index.push_back(static_cast<std::uint32_t>(j));
      out.y.push_back(j + 1 == n_i ? static_cast<std::uint8_t>(data.event(i)) : 0);
    }
  }
  return out;
}

double node_nonterminal_prob(int depth, const BartPriors& priors) {
  if (depth < 0) throw input_error("bart: depth must be >= 0");
  return priors.alpha * std::pow(1.0 + static_cast<double>(depth), -priors.zeta);
}

double sample_latents(int y, double mu, Rng& rng) {
  return y == 1 ? sample_trunc_normal_lower(rng, mu, 1.0, 0.0)
                : sample_trunc_normal_upper(rng, mu, 1.0, 0.0);
}

BartTree sample_tree_structure_prior(const BartPriors& priors, Rng& rng) {
  validate_priors(priors);
  BartTree tree;
  tree.nodes.emplace_back();
  struct Item {
    int id;
    int depth;
  };
  std::vector<Item> queue{{0, 0}};
  while (!queue.empty()) {
    const Item it = queue.back();
    queue.pop_back();
    if (sample_uniform(rng) >= node_nonterminal_prob(it.depth, priors)) continue;
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int r = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(it.id)].left = l;
    tree.nodes[static_cast<std::size_t>(it.id)].right = r;
    queue.push_back({r, it.depth + 1});
    queue.push_back({l, it.depth + 1});
  }
  return tree;
}

BartState init_bart_state(const ExpandedData& expanded, const BartPriors& priors) {
  validate_priors(priors);
  BartState state;
  state.trees.assign(static_cast<std::size_t>(priors.m), BartTree{{BartTreeNode{}}});
  state.latent.assign(expanded.n_rows(), 0.0);
  state.f.assign(expanded.n_rows(), 0.0);
  std::vector<std::uint32_t> all(expanded.n_rows());
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = static_cast<std::uint32_t>(r);
  state.rows_by_leaf.assign(static_cast<std::size_t>(priors.m), {all});
  state.g.assign(static_cast<std::size_t>(priors.m),
                 std::vector<double>(expanded.n_rows(), 0.0));
  return state;
}

void mcmc_step(BartState& state, const ExpandedData& expanded, const BartPriors& priors,
               Rng& rng, BartDiagnostics* diag) {
  validate_priors(priors);
  const double mu0 = resolve_mu0(priors, expanded);
  const double sd = priors.effective_leaf_sd();

  for (std::size_t r = 0; r < expanded.n_rows(); ++r)
    state.latent[r] = sample_latents(expanded.y[r], mu0 + state.f[r], rng);

  TreeMover mover{state, expanded, priors, mu0, rng, diag, 1.0 / (sd * sd)};
  for (std::size_t j = 0; j < state.trees.size(); ++j) mover.sweep(j);
}

BartPosterior fit_bart_survival(const SurvDataset& data, const BartConfig& config) {
  validate_priors(config.priors);
  if (config.n_burn < 0) throw input_error("bart: n_burn must be >= 0");
  if (config.n_keep < 1) throw input_error("bart: n_keep must be >= 1");
  if (config.thin < 1) throw input_error("bart: thin must be >= 1");
  if (data.n_events() == 0) throw input_error("bart: dataset has no events");

  const TimeGrid grid = time_grid(data, config.max_grid_points);
  const ExpandedData expanded = expand_survival_data(data, grid);

  BartPriors priors = config.priors;
  priors.mu0 = resolve_mu0(priors, expanded);

  BartPosterior post;
  post.schema = data.schema();
  post.grid = grid;
  post.mu0 = priors.mu0;
  post.config = config;

  Rng rng = make_rng(config.seed, kBartChainStream);
  BartState state = init_bart_state(expanded, priors);

  for (int it = 0; it < config.n_burn; ++it)
    mcmc_step(state, expanded, priors, rng, &post.diagnostics);

  post.draws.reserve(static_cast<std::size_t>(config.n_keep));
  for (int k = 0; k < config.n_keep; ++k) {
    for (int s = 0; s < config.thin; ++s)
      mcmc_step(state, expanded, priors, rng, &post.diagnostics);
    std::vector<BartTree> draw;
    draw.reserve(state.trees.size());
    for (const BartTree& tree : state.trees) draw.push_back(compact_tree(tree));
    post.draws.push_back(std::move(draw));
  }
  return post;
}

EventProbSummary posterior_event_prob(const BartPosterior& post, double t,
                                      const std::vector<double>& x_raw) {
  if (post.draws.empty()) throw input_error("bart: posterior has no draws");
  const auto& times = post.grid.times;
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t)
    throw input_error(
        "bart: t is not a grid time; survival_curve interpolates between grid times");

  const std::vector<double> enc = encode_raw(post.schema, x_raw);
  std::vector<double> p;
  p.reserve(post.draws.size());
  for (const auto& draw : post.draws)
    p.push_back(normal_cdf(post.mu0 + ensemble_fit(draw, t, enc.data())));

  EventProbSummary s;
  s.mean = mean_of(p);
  s.lower = quantile_type7(p, 0.025);
  s.upper = quantile_type7(p, 0.975);
  return s;
}

CredibleCurve survival_curve(const BartPosterior& post, const std::vector<double>& x_raw) {
  if (post.draws.empty()) throw input_error("bart: posterior has no draws");
  const std::vector<double> enc = encode_raw(post.schema, x_raw);
  std::vector<std::vector<double>> per_draw(post.draws.size());
  for (std::size_t d = 0; d < post.draws.size(); ++d)
    per_draw[d] = draw_survival(post.draws[d], post.mu0, post.grid, enc.data());
  return summarize_draw_curves(post.grid, per_draw);
}

double hazard_rate(const BartPosterior& post, const std::vector<double>& x_raw,
                   std::size_t j) {
  if (post.draws.empty()) throw input_error("bart: posterior has no draws");
  if (j < 1 || j > post.grid.size())
    throw input_error("bart: hazard index must lie in 1..grid size");
  const std::vector<double> enc = encode_raw(post.schema, x_raw);
  const double t = post.grid[j - 1];
  const double prev = j >= 2 ? post.grid[j - 2] : 0.0;

  double acc = 0.0;
  for (const auto& draw : post.draws)
    acc += normal_cdf(post.mu0 + ensemble_fit(draw, t, enc.data()));
  return acc / static_cast<double>(post.draws.size()) / (t - prev);
}

CredibleCurve partial_dependence_survival(
    const BartPosterior& post, const std::vector<std::pair<std::size_t, double>>& fixed,
    const SurvDataset& data) {
  if (post.draws.empty()) throw input_error("bart: posterior has no draws");
  if (!same_schema(post.schema, data.schema()))
    throw input_error("bart: completion data does not match the training schema");
  if (fixed.size() >= post.schema.n_covariates())
    throw input_error(
        "bart: fixed covariates must be a strict subset; use survival_curve for a full "
        "vector");
  for (std::size_t a = 0; a < fixed.size(); ++a) {
    if (fixed[a].first >= post.schema.n_covariates())
      throw input_error("bart: fixed covariate index out of range");
    for (std::size_t b = a + 1; b < fixed.size(); ++b)
      if (fixed[a].first == fixed[b].first)
        throw input_error("bart: duplicate fixed covariate index");
  }
  if (data.n() == 0) throw input_error("bart: completion data is empty");

  // completions: each data row with the fixed entries overridden
  const std::size_t p = post.schema.n_covariates();
  std::vector<std::vector<double>> enc_rows(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::vector<double> raw(data.row(i), data.row(i) + p);
    for (const auto& [idx, value] : fixed) raw[idx] = value;
    enc_rows[i] = encode_raw(post.schema, raw);
  }

  const std::size_t k = post.grid.size();
  std::vector<std::vector<double>> per_draw(post.draws.size());
  parallel_for(post.draws.size(), default_threads(), [&](std::size_t d) {
    std::vector<double> acc(k, 0.0);
    for (const auto& enc : enc_rows) {
      const std::vector<double> s =
          draw_survival(post.draws[d], post.mu0, post.grid, enc.data());
      for (std::size_t l = 0; l < k; ++l) acc[l] += s[l];
    }
    for (double& v : acc) v /= static_cast<double>(enc_rows.size());
    per_draw[d] = std::move(acc);
  });
  return summarize_draw_curves(post.grid, per_draw);
}

std::vector<double> variable_usage(const BartPosterior& post) {
  if (post.draws.empty()) throw input_error("bart: posterior has no draws");
  const std::size_t p = post.schema.encoded_width() + 1;  // time is joined var 0
  std::vector<double> mean(p, 0.0);
  std::vector<double> counts(p);
  for (const auto& draw : post.draws) {
    std::fill(counts.begin(), counts.end(), 0.0);
    double total = 0.0;
    for (const BartTree& tree : draw) {
      for (const BartTreeNode& n : tree.nodes) {
        if (n.is_leaf()) continue;
        counts[static_cast<std::size_t>(n.var)] += 1.0;
        total += 1.0;
      }
    }
    for (std::size_t v = 0; v < p; ++v)
      mean[v] += total > 0.0 ? counts[v] / total : 1.0 / static_cast<double>(p);
  }
  for (double& v : mean) v /= static_cast<double>(post.draws.size());
  return mean;
}

}  // namespace survkit
