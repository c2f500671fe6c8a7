#include "survkit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "survkit/bart.hpp"
#include "survkit/cox.hpp"
#include "survkit/csv.hpp"
#include "survkit/errors.hpp"
#include "survkit/mathutil.hpp"
#include "survkit/parallel.hpp"
#include "survkit/rsf.hpp"

namespace survkit {

namespace {

constexpr std::uint64_t kSimCalibStream = 0x73696d63;  // "simc"
constexpr std::uint64_t kSimRepStream = 0x73696d72;    // "simr"
constexpr std::uint64_t kSimFitStream = 0x73696d66;    // "simf"

void validate_design(const SimDesign& design) {
  if (design.kind != SimKind::kPh && design.kind != SimKind::kNph)
    throw input_error("sim: unknown design kind");
  if (design.p != kSimCovariates)
    throw input_error("sim: designs are defined over exactly 9 covariates");
  if (design.n < 10) throw input_error("sim: n must be >= 10");
  if (!(design.censor_target > 0.0 && design.censor_target < 1.0))
    throw input_error("sim: censor_target must lie in (0, 1)");
  if (design.reps < 1) throw input_error("sim: reps must be >= 1");
  if (!(design.split > 0.0 && design.split < 1.0))
    throw input_error("sim: split must lie in (0, 1)");
}

// Uniform draw guarded away from 0 so -ln U stays finite.
double positive_uniform(Rng& rng) {
  const double u = sample_uniform(rng);
  return u > 0.0 ? u : std::numeric_limits<double>::min();
}

std::string model_name(StudyModelKind kind) {
  switch (kind) {
    case StudyModelKind::kCox: return "cox";
    case StudyModelKind::kRsfLogRank: return "rsf-logrank";
    case StudyModelKind::kRsfScore: return "rsf-score";
    case StudyModelKind::kBart: return "bart";
  }
  throw input_error("sim: unknown model kind");
}

StudyModel make_cox_model() {
  return {"cox", [](const SurvDataset& train, std::uint64_t) -> StudyPredictor {
            auto model = std::make_shared<CoxModel>(fit_cox(train));
            return [model](const std::vector<double>& x, const std::vector<double>& times) {
              std::vector<double> sorted = times;
              std::sort(sorted.begin(), sorted.end());
              sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
              const SurvivalCurve curve =
                  predict_cox_survival(*model, x, TimeGrid(sorted));
              std::vector<double> out;
              out.reserve(times.size());
              for (double t : times) out.push_back(curve.at(t));
              return out;
            };
          }};
}

StudyModel make_rsf_model(SplitRule rule, StudyProfile profile) {
  const std::string name = rule == SplitRule::LogRank ? "rsf-logrank" : "rsf-score";
  return {name, [rule, profile](const SurvDataset& train,
                                std::uint64_t seed) -> StudyPredictor {
            RsfConfig config;
            config.n_trees = profile == StudyProfile::kFast ? 250 : 1000;
            config.split_rule = rule;
            config.seed = seed;
            auto forest = std::make_shared<Forest>(fit_forest(train, config));
            return [forest](const std::vector<double>& x, const std::vector<double>& times) {
              const CumHazardCurve chf = predict_chf(*forest, x);
              std::vector<double> out;
              out.reserve(times.size());
              for (double t : times) out.push_back(std::exp(-chf.at(t)));
              return out;
            };
          }};
}

StudyModel make_bart_model(StudyProfile profile) {
  return {"bart", [profile](const SurvDataset& train, std::uint64_t seed) -> StudyPredictor {
            BartConfig config;
            config.n_burn = profile == StudyProfile::kFast ? 1000 : 5000;
            config.n_keep = profile == StudyProfile::kFast ? 2000 : 10000;
            config.seed = seed;
            auto post = std::make_shared<BartPosterior>(fit_bart_survival(train, config));
            return [post](const std::vector<double>& x, const std::vector<double>& times) {
              // posterior mean of the step-function survival at each time
              post->schema.validate_raw_row(x);
              std::vector<double> enc(post->schema.encoded_width(), 0.0);
              post->schema.encode_row(x.data(), enc.data());

              std::size_t max_idx = 0;
              std::vector<std::size_t> idx(times.size());
              for (std::size_t k = 0; k < times.size(); ++k) {
                idx[k] = post->grid.count_leq(times[k]);
                max_idx = std::max(max_idx, idx[k]);
              }

              std::vector<double> out(times.size(), 0.0);
              std::vector<double> s(max_idx);
              for (const auto& draw : post->draws) {
                double running = 1.0;
                for (std::size_t l = 0; l < max_idx; ++l) {
                  double f = 0.0;
                  for (const BartTree& tree : draw) {
                    int id = 0;
                    while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
                      const BartTreeNode& nd = tree.nodes[static_cast<std::size_t>(id)];
                      const double v = nd.var == 0 ? post->grid[l] : enc[nd.var - 1];
                      id = v <= nd.cut ? nd.left : nd.right;
                    }
                    f += tree.nodes[static_cast<std::size_t>(id)].mu;
                  }
                  running *= 1.0 - normal_cdf(post->mu0 + f);
                  s[l] = running;
                }
                for (std::size_t k = 0; k < times.size(); ++k)
                  out[k] += idx[k] == 0 ? 1.0 : s[idx[k] - 1];
              }
              for (double& v : out) v /= static_cast<double>(post->draws.size());
              return out;
            };
          }};
}

}  // namespace

std::vector<double> gen_covariates(std::size_t n, Rng& rng) {
  if (n < 1) throw input_error("sim: n must be >= 1");
  std::vector<double> x(n * kSimCovariates);
  for (double& v : x) v = sample_uniform(rng) < 0.5 ? 1.0 : 0.0;
  return x;
}

std::pair<double, double> weibull_params(const std::vector<double>& x, SimKind kind) {
  if (x.size() != kSimCovariates)
    throw input_error("sim: covariate vector must have 9 entries");
  for (double v : x)
    if (v != 0.0 && v != 1.0) throw input_error("sim: covariates must be binary");

  const double s6 = x[0] + x[1] + x[2] + x[3] + x[4] + x[5];
  if (kind == SimKind::kPh) return {2.0, std::exp(3.0 + 0.1 * s6 + x[6])};
  return {0.7 + 1.3 * x[6], 20.0 + 5.0 * (s6 + 10.0 * x[6])};
}

double sample_event_time(double alpha, double lambda, Rng& rng) {
  if (!(alpha > 0.0) || !(lambda > 0.0))
    throw input_error("sim: alpha and lambda must be > 0");
  return lambda * std::pow(-std::log(positive_uniform(rng)), 1.0 / alpha);
}

double true_survival(const std::vector<double>& x, double t, SimKind kind) {
  if (!(t >= 0.0)) throw input_error("sim: t must be >= 0");
  const auto [alpha, lambda] = weibull_params(x, kind);
  return std::exp(-std::pow(t / lambda, alpha));
}

double calibrate_censoring_rate(const std::function<double(Rng&)>& sample_time,
                                double target, std::uint64_t seed) {
  if (!(target > 0.0 && target < 1.0))
    throw input_error("sim: censoring target must lie in (0, 1)");

  constexpr std::size_t kDraws = 100000;
  Rng rng = make_rng(seed, kSimCalibStream);
  std::vector<double> t(kDraws), e(kDraws);
  for (std::size_t i = 0; i < kDraws; ++i) t[i] = sample_time(rng);
  for (std::size_t i = 0; i < kDraws; ++i) e[i] = -std::log(positive_uniform(rng));

  // common draws make the estimate a nondecreasing step function of r
  const auto censored_frac = [&](double r) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < kDraws; ++i)
      if (e[i] / r < t[i]) ++c;
    return static_cast<double>(c) / static_cast<double>(kDraws);
  };

  double lo = std::pow(2.0, -40);
  double hi = std::pow(2.0, 40);
  if (censored_frac(lo) > target || censored_frac(hi) < target)
    throw numeric_error("sim: censoring calibration failed to bracket the target");

  for (int iter = 0; iter < 200; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const double frac = censored_frac(mid);
    if (std::fabs(frac - target) <= 0.005) return mid;
    (frac < target ? lo : hi) = mid;
  }
  const double mid = std::sqrt(lo * hi);
  if (std::fabs(censored_frac(mid) - target) <= 0.01) return mid;
  throw numeric_error("sim: censoring calibration did not converge");
}

double calibrate_censoring(const SimDesign& design) {
  validate_design(design);
  const SimKind kind = design.kind;
  return calibrate_censoring_rate(
      [kind](Rng& rng) {
        std::vector<double> x(kSimCovariates);
        for (double& v : x) v = sample_uniform(rng) < 0.5 ? 1.0 : 0.0;
        const auto [alpha, lambda] = weibull_params(x, kind);
        return sample_event_time(alpha, lambda, rng);
      },
      design.censor_target, design.seed);
}

SimResult run_study_custom(const SimDesign& design, const std::vector<StudyModel>& models) {
  validate_design(design);
  if (models.empty()) throw input_error("sim: no models requested");

  SimResult result;
  result.design = design;
  result.exp_rate = calibrate_censoring(design);
  result.achieved_censoring.assign(design.reps, 0.0);

  Schema schema;
  for (std::size_t v = 0; v < kSimCovariates; ++v)
    schema.covariates.push_back({"x" + std::to_string(v + 1), false, {}});

  struct RepOutput {
    std::vector<SimCell> cells;
    std::vector<SimFailure> failures;
  };
  std::vector<RepOutput> per_rep(design.reps);

  parallel_for(design.reps, default_threads(), [&](std::size_t rep) {
    Rng rng = make_rng(design.seed, kSimRepStream, rep);
    const std::size_t n = design.n;
    const std::vector<double> xmat = gen_covariates(n, rng);

    std::vector<double> t_true(n), z(n);
    std::vector<int> delta(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> x(xmat.begin() + static_cast<std::ptrdiff_t>(i * kSimCovariates),
                                  xmat.begin() + static_cast<std::ptrdiff_t>((i + 1) * kSimCovariates));
      const auto [alpha, lambda] = weibull_params(x, design.kind);
      t_true[i] = sample_event_time(alpha, lambda, rng);
    }
    std::size_t censored = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = -std::log(positive_uniform(rng)) / result.exp_rate;
      z[i] = std::min(t_true[i], c);
      delta[i] = t_true[i] <= c ? 1 : 0;
      censored += delta[i] == 0 ? 1 : 0;
    }
    result.achieved_censoring[rep] =
        static_cast<double>(censored) / static_cast<double>(n);

    // evaluation times: percentiles of the replicate's true event times,
    // shared by every model so bias comparisons stay aligned
    const std::vector<double> times = {quantile_type7(t_true, 0.25),
                                       quantile_type7(t_true, 0.50),
                                       quantile_type7(t_true, 0.75)};
    const int labels[3] = {25, 50, 75};

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(design.split * static_cast<double>(n)));
    n_train = std::min(std::max<std::size_t>(n_train, 1), n - 1);

    std::vector<SurvRecord> train_records;
    train_records.reserve(n_train);
    for (std::size_t k = 0; k < n_train; ++k) {
      const std::size_t i = perm[k];
      SurvRecord rec;
      rec.time = z[i];
      rec.event = delta[i];
      rec.covariates.assign(xmat.begin() + static_cast<std::ptrdiff_t>(i * kSimCovariates),
                            xmat.begin() + static_cast<std::ptrdiff_t>((i + 1) * kSimCovariates));
      train_records.push_back(std::move(rec));
    }
    const SurvDataset train = SurvDataset::from_records(schema, train_records);
    const std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                                            perm.end());

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const StudyModel& model = models[mi];
      try {
        const std::uint64_t fit_seed =
            make_rng(design.seed, kSimFitStream, rep, mi)();
        const StudyPredictor predict = model.fit(train, fit_seed);

        double sum_d[3] = {0.0, 0.0, 0.0};
        double sum_d2[3] = {0.0, 0.0, 0.0};
        for (std::size_t i : test_idx) {
          const std::vector<double> x(xmat.begin() + static_cast<std::ptrdiff_t>(i * kSimCovariates),
                                      xmat.begin() + static_cast<std::ptrdiff_t>((i + 1) * kSimCovariates));
          const std::vector<double> s_hat = predict(x, times);
          if (s_hat.size() != times.size())
            throw numeric_error("sim: predictor returned the wrong number of values");
          for (std::size_t k = 0; k < 3; ++k) {
            const double d = s_hat[k] - true_survival(x, times[k], design.kind);
            sum_d[k] += d;
            sum_d2[k] += d * d;
          }
        }
        const double nt = static_cast<double>(test_idx.size());
        for (std::size_t k = 0; k < 3; ++k)
          per_rep[rep].cells.push_back(
              {rep, model.name, labels[k], sum_d[k] / nt, std::sqrt(sum_d2[k] / nt)});
      } catch (const std::exception& ex) {
        per_rep[rep].failures.push_back({rep, model.name, ex.what()});
      }
    }
  });

  for (std::size_t rep = 0; rep < design.reps; ++rep) {
    for (auto& c : per_rep[rep].cells) result.cells.push_back(std::move(c));
    for (auto& f : per_rep[rep].failures) result.failures.push_back(std::move(f));
  }
  return result;
}

SimResult run_study(const SimDesign& design, const std::vector<StudyModelKind>& models,
                    StudyProfile profile) {
  std::vector<StudyModel> built;
  for (StudyModelKind kind : models) {
    switch (kind) {
      case StudyModelKind::kCox: built.push_back(make_cox_model()); break;
      case StudyModelKind::kRsfLogRank:
        built.push_back(make_rsf_model(SplitRule::LogRank, profile));
        break;
      case StudyModelKind::kRsfScore:
        built.push_back(make_rsf_model(SplitRule::LogRankScore, profile));
        break;
      case StudyModelKind::kBart: built.push_back(make_bart_model(profile)); break;
      default: throw input_error("sim: unknown model kind: " + model_name(kind));
    }
  }
  return run_study_custom(design, built);
}

std::string sim_csv(const SimResult& result) {
  std::string out = "replicate,model,percentile,bias,rmse\n";
  for (const SimCell& c : result.cells) {
    out += std::to_string(c.replicate);
    out += ',';
    out += c.model;
    out += ',';
    out += std::to_string(c.percentile);
    out += ',';
    out += format_double(c.bias);
    out += ',';
    out += format_double(c.rmse);
    out += '\n';
  }
  return out;
}

nlohmann::json sim_summary_json(const SimResult& result) {
  nlohmann::json j;
  j["design"] = {
      {"kind", result.design.kind == SimKind::kPh ? "ph" : "nph"},
      {"n", result.design.n},
      {"censor_target", result.design.censor_target},
      {"reps", result.design.reps},
      {"split", result.design.split},
      {"seed", result.design.seed},
  };
  j["censoring"] = {
      {"exp_rate", result.exp_rate},
      {"achieved_median", median_of(result.achieved_censoring)},
  };

  // group cells by (model, percentile)
  std::vector<std::string> order;
  for (const SimCell& c : result.cells)
    if (std::find(order.begin(), order.end(), c.model) == order.end())
      order.push_back(c.model);

  nlohmann::json models = nlohmann::json::object();
  for (const std::string& name : order) {
    nlohmann::json per_pct = nlohmann::json::object();
    for (int pct : {25, 50, 75}) {
      std::vector<double> bias, rmse;
      for (const SimCell& c : result.cells) {
        if (c.model != name || c.percentile != pct) continue;
        bias.push_back(c.bias);
        rmse.push_back(c.rmse);
      }
      if (bias.empty()) continue;
      per_pct[std::to_string(pct)] = {
          {"replicates", bias.size()},
          {"bias_median", median_of(bias)},
          {"bias_q25", quantile_type7(bias, 0.25)},
          {"bias_q75", quantile_type7(bias, 0.75)},
          {"rmse_median", median_of(rmse)},
          {"rmse_q25", quantile_type7(rmse, 0.25)},
          {"rmse_q75", quantile_type7(rmse, 0.75)},
      };
    }
    models[name] = per_pct;
  }
  j["models"] = models;

  nlohmann::json failures = nlohmann::json::array();
  for (const SimFailure& f : result.failures)
    failures.push_back({{"replicate", f.replicate}, {"model", f.model}, {"message", f.message}});
  j["failures"] = failures;
  return j;
}

}  // namespace survkit
