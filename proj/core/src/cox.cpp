#include "survkit/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "survkit/errors.hpp"
#include "survkit/parallel.hpp"

namespace survkit {

namespace {

// Rows sorted by ascending time and grouped by distinct observed time; the
// likelihood sweep walks groups in descending order, growing the risk set.
struct CoxWork {
  Eigen::MatrixXd x;       // n x p, centered columns
  Eigen::VectorXd col_mu;  // original column means
  std::vector<int> events;
  std::vector<double> times;
  std::vector<std::size_t> order;
  std::vector<std::size_t> group_start;  // G+1 boundaries into order
  std::vector<std::size_t> group_deaths;
  std::vector<double> group_time;
};

CoxWork make_work(const SurvDataset& data) {
  const std::size_t n = data.n();
  const std::size_t p = data.schema().encoded_width();

  CoxWork w;
  w.events = data.events();
  w.times = data.times();
  w.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const auto m = data.encoded_matrix();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      w.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m[i * p + j];

  w.col_mu = w.x.colwise().mean();
  w.x.rowwise() -= w.col_mu.transpose();

  w.order.resize(n);
  std::iota(w.order.begin(), w.order.end(), std::size_t{0});
  std::sort(w.order.begin(), w.order.end(), [&](std::size_t a, std::size_t b) {
    return w.times[a] < w.times[b];
  });

  w.group_start.push_back(0);
  for (std::size_t k = 0; k < n;) {
    const double t = w.times[w.order[k]];
    std::size_t deaths = 0;
    std::size_t e = k;
    while (e < n && w.times[w.order[e]] == t) {
      deaths += static_cast<std::size_t>(w.events[w.order[e]]);
      ++e;
    }
    w.group_start.push_back(e);
    w.group_deaths.push_back(deaths);
    w.group_time.push_back(t);
    k = e;
  }
  return w;
}

// Breslow-tie log partial likelihood. The linear predictor is shifted by its
// maximum before exponentiation; the likelihood is invariant to the shift.
double log_partial_likelihood(const CoxWork& w, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = w.x * beta;
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  const std::size_t groups = w.group_deaths.size();
  double s0 = 0.0;
  double ll = 0.0;
  for (std::size_t g = groups; g-- > 0;) {
    double death_eta = 0.0;
    for (std::size_t k = w.group_start[g]; k < w.group_start[g + 1]; ++k) {
      const std::size_t i = w.order[k];
      s0 += std::exp(eta[static_cast<Eigen::Index>(i)] - shift);
      if (w.events[i]) death_eta += eta[static_cast<Eigen::Index>(i)] - shift;
    }
    if (w.group_deaths[g] > 0)
      ll += death_eta - static_cast<double>(w.group_deaths[g]) * std::log(s0);
  }
  return ll;
}

// Gradient and observed information of the log partial likelihood.
double derivatives(const CoxWork& w, const Eigen::VectorXd& beta,
                   Eigen::VectorXd& grad, Eigen::MatrixXd& info) {
  const auto p = beta.size();
  const Eigen::VectorXd eta = w.x * beta;
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;

  grad.setZero(p);
  info.setZero(p, p);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  double ll = 0.0;

  const std::size_t groups = w.group_deaths.size();
  for (std::size_t g = groups; g-- > 0;) {
    double death_eta = 0.0;
    for (std::size_t k = w.group_start[g]; k < w.group_start[g + 1]; ++k) {
      const std::size_t i = w.order[k];
      const auto row = w.x.row(static_cast<Eigen::Index>(i));
      const double wexp = std::exp(eta[static_cast<Eigen::Index>(i)] - shift);
      s0 += wexp;
      s1.noalias() += wexp * row.transpose();
      s2.noalias() += wexp * row.transpose() * row;
      if (w.events[i]) {
        death_eta += eta[static_cast<Eigen::Index>(i)] - shift;
        grad.noalias() += row.transpose();
      }
    }
    const double d = static_cast<double>(w.group_deaths[g]);
    if (d > 0.0) {
      ll += death_eta - d * std::log(s0);
      const Eigen::VectorXd xbar = s1 / s0;
      grad.noalias() -= d * xbar;
      info.noalias() += d * (s2 / s0 - xbar * xbar.transpose());
    }
  }
  return ll;
}

std::string worst_covariate(const Schema& schema, const Eigen::VectorXd& beta) {
  Eigen::Index worst = 0;
  beta.cwiseAbs().maxCoeff(&worst);
  return schema.encoded_names()[static_cast<std::size_t>(worst)];
}

}  // namespace

double CoxModel::risk_score(const std::vector<double>& x_raw) const {
  schema.validate_raw_row(x_raw);
  std::vector<double> enc(schema.encoded_width());
  schema.encode_row(x_raw.data(), enc.data());
  double eta = 0.0;
  for (std::size_t j = 0; j < enc.size(); ++j) eta += beta[j] * enc[j];
  return eta;
}

CoxModel fit_cox(const SurvDataset& data) {
  if (data.n_events() == 0) throw input_error("cox: dataset has no events");

  const std::size_t p = data.schema().encoded_width();
  if (p > 0) {
    const auto m = data.encoded_matrix();
    const auto names = data.schema().encoded_names();
    for (std::size_t j = 0; j < p; ++j) {
      const double v0 = m[j];
      bool constant = true;
      for (std::size_t i = 1; i < data.n() && constant; ++i)
        constant = (m[i * p + j] == v0);
      if (constant)
        throw input_error("cox: covariate '" + names[j] + "' is constant");
    }
  }

  CoxWork w = make_work(data);
  const auto pi = static_cast<Eigen::Index>(p);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(pi);
  Eigen::VectorXd grad(pi);
  Eigen::MatrixXd info(pi, pi);

  double ll = derivatives(w, beta, grad, info);
  CoxFitDiagnostics diag;
  const double tol = 1e-8;
  const int max_iter = 50;

  while (true) {
    diag.grad_max_norm = p > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (diag.grad_max_norm < tol) {
      diag.converged = true;
      break;
    }
    if (diag.iterations >= max_iter) break;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw numeric_error("cox: singular information matrix");
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite())
      throw numeric_error("cox: information matrix is numerically singular");

    // Full Newton step, halved up to 10 times while the likelihood decreases.
    Eigen::VectorXd trial;
    double trial_ll = 0.0;
    bool improved = false;
    for (int h = 0; h <= 10; ++h) {
      trial = beta + step;
      trial_ll = log_partial_likelihood(w, trial);
      if (std::isfinite(trial_ll) && trial_ll > ll) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // flat along the Newton direction

    beta = trial;
    ++diag.iterations;
    if (beta.cwiseAbs().maxCoeff() > 50.0)
      throw numeric_error("cox: monotone likelihood, coefficient for '" +
                          worst_covariate(data.schema(), beta) +
                          "' is diverging");
    ll = derivatives(w, beta, grad, info);
  }

  // Breslow baseline on the original covariate scale: the centered sweep
  // estimates H_0 for x = col_mu, so rescale by exp(beta' col_mu).
  const Eigen::VectorXd eta = w.x * beta;
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  const double scale = std::exp(-(shift + beta.dot(w.col_mu)));

  std::vector<double> base_times, base_values;
  const std::size_t groups = w.group_deaths.size();
  std::vector<double> s0_at_group(groups, 0.0);
  double s0 = 0.0;
  for (std::size_t g = groups; g-- > 0;) {
    for (std::size_t k = w.group_start[g]; k < w.group_start[g + 1]; ++k)
      s0 += std::exp(eta[static_cast<Eigen::Index>(w.order[k])] - shift);
    s0_at_group[g] = s0;
  }
  double h0 = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    if (w.group_deaths[g] == 0) continue;
    h0 += static_cast<double>(w.group_deaths[g]) / s0_at_group[g] * scale;
    base_times.push_back(w.group_time[g]);
    base_values.push_back(h0);
  }

  CoxModel model;
  model.schema = data.schema();
  model.beta.assign(beta.data(), beta.data() + beta.size());
  model.baseline_chf = CumHazardCurve(TimeGrid(std::move(base_times)), std::move(base_values));
  model.log_partial_likelihood = ll;
  model.n_params = p;
  model.diagnostics = diag;
  return model;
}

SurvivalCurve predict_cox_survival(const CoxModel& model, const std::vector<double>& x_raw,
                                   const TimeGrid& grid) {
  const double rel_risk = std::exp(model.risk_score(x_raw));
  std::vector<double> values(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    values[j] = std::exp(-model.baseline_chf.at(grid[j]) * rel_risk);
  return SurvivalCurve(grid, std::move(values));
}

StepwiseResult backward_stepwise_aic(const SurvDataset& data, int n_threads) {
  if (data.n_covariates() < 2)
    throw input_error("stepwise: need at least 2 covariates");

  StepwiseResult result;
  result.final_model = fit_cox(data);  // full-model failure propagates
  result.initial_aic = result.final_model.aic();

  std::vector<std::size_t> current(data.n_covariates());
  std::iota(current.begin(), current.end(), std::size_t{0});
  double current_aic = result.initial_aic;

  while (!current.empty()) {
    struct Candidate {
      bool ok = false;
      double aic = std::numeric_limits<double>::infinity();
      CoxModel model;
    };
    std::vector<Candidate> cands(current.size());
    parallel_for(current.size(), n_threads, [&](std::size_t c) {
      std::vector<std::size_t> kept;
      for (std::size_t j : current)
        if (j != current[c]) kept.push_back(j);
      try {
        cands[c].model = fit_cox(data.keep_covariates(kept));
        cands[c].aic = cands[c].model.aic();
        cands[c].ok = true;
      } catch (const std::exception&) {
        // a candidate that cannot be fitted is never an improvement
      }
    });

    std::size_t best = current.size();
    for (std::size_t c = 0; c < current.size(); ++c)
      if (cands[c].ok && (best == current.size() || cands[c].aic < cands[best].aic))
        best = c;
    if (best == current.size() || cands[best].aic >= current_aic) break;

    result.trace.push_back(
        {data.schema().covariates[current[best]].name, cands[best].aic});
    result.final_model = std::move(cands[best].model);
    current_aic = cands[best].aic;
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(best));
  }

  for (std::size_t j : current)
    result.selected.push_back(data.schema().covariates[j].name);
  return result;
}

}  // namespace survkit
