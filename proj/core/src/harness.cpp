#include "gfomlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "gfomlab/error.hpp"
#include "gfomlab/gd_se.hpp"
#include "gfomlab/parallel.hpp"
#include "gfomlab/rng.hpp"
#include "gfomlab/state_evolution.hpp"
#include "gfomlab/test_functions.hpp"

namespace gfom {

using nlohmann::json;

Statistic make_statistic(std::string name, std::string series, double x, double a, double b,
                         double se_a, double se_b, double tolerance, Statistic::Check check) {
  Statistic s;
  s.name = std::move(name);
  s.series = std::move(series);
  s.x = x;
  s.estimate_a = a;
  s.estimate_b = b;
  s.gap = a - b;
  s.se_a = se_a;
  s.se_b = se_b;
  s.combined_se = std::sqrt(se_a * se_a + se_b * se_b);
  s.tolerance = tolerance;
  s.check = check;
  switch (check) {
    case Statistic::Check::two_sided:
      s.pass = std::abs(s.gap) <= tolerance;
      break;
    case Statistic::Check::at_most:
      s.pass = s.gap <= tolerance;
      break;
    case Statistic::Check::at_least:
      s.pass = s.gap >= -tolerance;
      break;
  }
  return s;
}

double se_tolerance(const Tolerances& tol, double combined_se) {
  const double t = std::max(tol.se_multiple * combined_se, tol.exact);
  return tol.abs ? std::min(*tol.abs, t) : t;
}

bool ComparisonReport::passed() const {
  return std::all_of(stats.begin(), stats.end(), [](const Statistic& s) { return s.pass; });
}

namespace {

const char* check_name(Statistic::Check c) {
  switch (c) {
    case Statistic::Check::two_sided:
      return "two_sided";
    case Statistic::Check::at_most:
      return "at_most";
    case Statistic::Check::at_least:
      return "at_least";
  }
  return "two_sided";
}

}  // namespace

json to_json(const ComparisonReport& r) {
  json stats = json::array();
  for (const auto& s : r.stats) {
    stats.push_back({{"name", s.name},
                     {"series", s.series},
                     {"x", s.x},
                     {"estimate_a", s.estimate_a},
                     {"estimate_b", s.estimate_b},
                     {"gap", s.gap},
                     {"se_a", s.se_a},
                     {"se_b", s.se_b},
                     {"combined_se", s.combined_se},
                     {"tolerance", s.tolerance},
                     {"check", check_name(s.check)},
                     {"pass", s.pass}});
  }
  return {{"experiment", r.experiment},
          {"passed", r.passed()},
          {"replicates", r.replicates},
          {"divergent_a", r.divergent_a},
          {"divergent_b", r.divergent_b},
          {"runtime_seconds", r.runtime_seconds},
          {"statistics", stats},
          {"details", r.details}};
}

MeanSe mean_se(const std::vector<double>& x) {
  MeanSe out;
  if (x.empty()) return out;
  const double n = static_cast<double>(x.size());
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (x.size() < 2) return out;
  double ss = 0.0;
  for (double v : x) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / (n - 1.0);
  out.se = std::sqrt(out.variance / n);
  return out;
}

double ks_distance_normal(std::vector<double> x) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("linear_fit: need two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("linear_fit: x values must be distinct");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

double delocalization_ratio(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 1.0;
  const double l2 = v.norm();
  if (l2 == 0.0) return 1.0;
  return v.cwiseAbs().maxCoeff() / (l2 / std::sqrt(static_cast<double>(v.size())));
}

// ---------------------------------------------------------------------------
// Program construction

namespace {

void check_params(const json& p, const std::set<std::string>& allowed, const std::string& prog) {
  if (!p.is_object()) throw ConfigError("program.params: expected an object");
  for (auto it = p.begin(); it != p.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in program.params for " + prog);
    }
  }
}

double param_number(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  const json& v = p.at(key);
  if (!v.is_number()) throw ValidationError(std::string("program.params.") + key + ": must be a number");
  return v.get<double>();
}

json param_or(const json& p, const char* key, json fallback) {
  return p.contains(key) ? p.at(key) : fallback;
}

ProxSpec parse_prox(const json& p) {
  if (!p.contains("prox")) return ProxSpec::zero();
  const json& j = p.at("prox");
  std::string kind;
  double lambda = 0.0;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else {
    check_params(j, {"kind", "lambda"}, "prox");
    kind = j.value("kind", std::string("zero"));
    lambda = j.value("lambda", 0.0);
  }
  if (!(lambda >= 0.0)) throw ValidationError("program.params.prox.lambda: must be >= 0");
  if (kind == "zero") return ProxSpec::zero();
  if (kind == "ridge") return ProxSpec::ridge(lambda);
  if (kind == "lasso") return ProxSpec::lasso(lambda);
  throw ConfigError("unknown prox kind '" + kind + "'");
}

Loss parse_loss(const json& p) {
  if (!p.contains("loss")) return Loss::squared();
  if (!p.at("loss").is_string()) throw ValidationError("program.params.loss: must be a string");
  return Loss::parse(p.at("loss").get<std::string>());
}

std::vector<Eigen::VectorXd> gd_masks(const ExperimentConfig& c, double mask_p,
                                      std::uint64_t seed) {
  if (mask_p >= 1.0) return {};
  return bernoulli_masks(c.rows(), c.T, mask_p, derive_seed(seed, stream_tag("masks")));
}

Trajectory run_instance(const ProgramInstance& inst, const Eigen::MatrixXd& A) {
  return inst.symmetric ? run_symmetric(A, inst.sym) : run_asymmetric(A, inst.asym);
}

std::size_t horizon(const ProgramInstance& inst) {
  return inst.symmetric ? inst.sym.T : inst.asym.T;
}

// (1/rows) sum_k psi(z_k^{(t)}), or the (m + n)-normalized sum over u and v.
double averaged(const Trajectory& tr, std::size_t t, const TestFunction& psi) {
  double acc = 0.0;
  if (tr.symmetric()) {
    const auto& z = tr.z[t];
    for (Eigen::Index k = 0; k < z.size(); ++k) acc += psi(z(k));
    return acc / static_cast<double>(z.size());
  }
  const auto& u = tr.u[t];
  const auto& v = tr.v[t];
  for (Eigen::Index k = 0; k < u.size(); ++k) acc += psi(u(k));
  for (Eigen::Index k = 0; k < v.size(); ++k) acc += psi(v(k));
  return acc / static_cast<double>(u.size() + v.size());
}

const Eigen::VectorXd& track_at(const Trajectory& tr, Track track, std::size_t t) {
  switch (track) {
    case Track::z:
      return tr.z.at(t);
    case Track::u:
      return tr.u.at(t);
    case Track::v:
      break;
  }
  return tr.v.at(t);
}

// Values of one replicate; empty when the run diverged.
struct Outcome {
  bool diverged = false;
  std::vector<double> values;
};

std::vector<Outcome> replicate_map(std::size_t R, std::size_t threads,
                                   const std::function<std::vector<double>(std::size_t)>& body) {
  std::vector<Outcome> out(R);
  parallel_for(
      R,
      [&](std::size_t r) {
        try {
          out[r].values = body(r);
        } catch (const DivergenceError&) {
          out[r].diverged = true;
        }
      },
      threads);
  return out;
}

// Column `i` of the non-divergent outcomes, in replicate order.
std::vector<double> column(const std::vector<Outcome>& o, std::size_t i) {
  std::vector<double> out;
  for (const auto& x : o) {
    if (!x.diverged) out.push_back(x.values.at(i));
  }
  return out;
}

std::size_t divergent(const std::vector<Outcome>& o) {
  return static_cast<std::size_t>(
      std::count_if(o.begin(), o.end(), [](const Outcome& x) { return x.diverged; }));
}

void require_replicates(const ExperimentConfig& c) {
  if (c.replicates < 2) {
    throw ValidationError("replicates: must be >= 2 for statistics with standard errors");
  }
}

void require_usable(std::size_t valid, const std::string& what) {
  if (valid < 2) throw NumericalError(what + ": fewer than two convergent replicates");
}

void plot_gaps(ComparisonReport& r) {
  for (const auto& s : r.stats) {
    r.plot.push_back({s.series.empty() ? s.name : s.name + ":" + s.series, s.x, s.gap,
                      s.combined_se});
  }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

Eigen::VectorXd make_vector(const json& spec, std::size_t len, std::uint64_t seed,
                            const std::string& tag) {
  std::string kind;
  double scale = 1.0;
  if (spec.is_string()) {
    kind = spec.get<std::string>();
  } else {
    check_params(spec, {"kind", "scale"}, tag);
    if (!spec.contains("kind") || !spec.at("kind").is_string()) {
      throw ValidationError(tag + ".kind: must be a string");
    }
    kind = spec.at("kind").get<std::string>();
    scale = param_number(spec, "scale", 1.0);
  }
  const auto n = static_cast<Eigen::Index>(len);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  const std::uint64_t key = derive_seed(seed, stream_tag(tag));
  if (kind == "zero") return v;
  if (kind == "ones" || kind == "constant") return Eigen::VectorXd::Constant(n, scale);
  if (kind == "e1") {
    if (n > 0) v(0) = scale;
    return v;
  }
  if (kind == "gaussian" || kind == "rademacher") {
    EntrySampler draw(kind == "gaussian" ? EntryLaw::gaussian() : EntryLaw::rademacher(), key);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * draw();
    return v;
  }
  if (kind == "logistic") {
    CounterEngine eng(key);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = uniform_open01(eng);
      v(i) = scale * std::log(u / (1.0 - u));
    }
    return v;
  }
  throw ConfigError("unknown vector kind '" + kind + "' for " + tag);
}

bool program_is_symmetric(const std::string& key) {
  for (const auto& info : program_registry()) {
    if (info.key == key) return info.kind == "symmetric";
  }
  throw ConfigError("unknown program '" + key + "'");
}

EnsembleSpec ensemble_for(const ExperimentConfig& c) {
  const bool sym = program_is_symmetric(c.program);
  if (c.ensemble.symmetric && *c.ensemble.symmetric != sym) {
    throw ConfigError("ensemble.symmetric disagrees with program '" + c.program + "'");
  }
  return c.ensemble.build(sym, c.rows(), c.n);
}

ProgramInstance build_program(const ExperimentConfig& c, const EnsembleSpec& spec) {
  const json& P = c.params;
  ProgramInstance inst;
  const std::size_t n = c.n;
  const std::size_t m = c.rows();
  if (c.program == "power_iteration" || c.program == "tanh_amp") {
    check_params(P, {"z0"}, c.program);
    const Eigen::VectorXd z0 = make_vector(param_or(P, "z0", "ones"), n, c.seed, "z0");
    inst.symmetric = true;
    if (c.program == "power_iteration") {
      inst.sym = build_power_iteration(c.T, z0);
    } else {
      SeOptions opt;
      opt.mc_samples = c.mc_samples;
      opt.seed = derive_seed(c.seed, stream_tag("se.onsager"));
      opt.threads = c.threads;
      inst.sym = build_tanh_amp(c.T, z0, tanh_amp_onsager(spec.second_moments(), z0, c.T, opt));
    }
    return inst;
  }
  inst.symmetric = false;
  if (c.program == "pgd_linear") {
    check_params(P, {"loss", "prox", "eta", "mu0", "xi"}, c.program);
    PgdLinearParams p;
    p.loss = parse_loss(P);
    p.prox = parse_prox(P);
    p.eta = param_number(P, "eta", 0.1);
    p.mu0 = make_vector(param_or(P, "mu0", "gaussian"), n, c.seed, "mu0");
    p.xi = make_vector(param_or(P, "xi", "gaussian"), m, c.seed, "xi");
    p.T = c.T;
    inst.asym = build_pgd_linear(p);
    inst.pgd = p;
    return inst;
  }
  if (c.program == "gd") {
    check_params(P, {"loss", "eta", "lambda", "beta", "mask_p", "resample_masks", "mu0", "xi"},
                 c.program);
    GdParams p;
    p.loss = parse_loss(P);
    p.eta = param_number(P, "eta", 0.1);
    p.lambda = param_number(P, "lambda", 0.0);
    p.beta = param_number(P, "beta", 0.0);
    const double mask_p = param_number(P, "mask_p", 1.0);
    if (!(mask_p > 0.0 && mask_p <= 1.0)) {
      throw ValidationError("program.params.mask_p: must lie in (0, 1]");
    }
    p.mu0 = make_vector(param_or(P, "mu0", "gaussian"), n, c.seed, "mu0");
    p.xi = make_vector(param_or(P, "xi", "gaussian"), m, c.seed, "xi");
    p.masks = gd_masks(c, mask_p, c.seed);
    p.T = c.T;
    if (P.contains("resample_masks")) {
      if (!P.at("resample_masks").is_boolean()) {
        throw ValidationError("program.params.resample_masks: must be a bool");
      }
      inst.resample_masks = P.at("resample_masks").get<bool>();
    }
    inst.mask_p = mask_p;
    inst.asym = build_gd(p);
    inst.gd = p;
    return inst;
  }
  if (c.program == "logistic") {
    check_params(P, {"prox", "eta", "sigma", "clamp", "mu0", "xi"}, c.program);
    LogisticParams p;
    p.prox = parse_prox(P);
    p.eta = param_number(P, "eta", 0.1);
    p.sigma = param_number(P, "sigma", 0.0);
    if (P.contains("clamp")) p.clamp = param_number(P, "clamp", 0.0);
    p.mu0 = make_vector(param_or(P, "mu0", "gaussian"), n, c.seed, "mu0");
    p.xi = make_vector(param_or(P, "xi", "logistic"), m, c.seed, "xi");
    p.T = c.T;
    inst.asym = build_logistic(p);
    inst.logistic = p;
    return inst;
  }
  throw ConfigError("unknown program '" + c.program + "'");
}

ProgramInstance replicate_instance(const ProgramInstance& base, const ExperimentConfig& c,
                                   std::size_t r) {
  if (!base.gd || !base.resample_masks || base.mask_p >= 1.0) return base;
  ProgramInstance out = base;
  out.gd->masks = gd_masks(c, base.mask_p, replicate_seed(c.seed, r));
  out.asym = build_gd(*out.gd);
  return out;
}

ErmProblem build_erm_problem(const ExperimentConfig& c, const Eigen::MatrixXd& A) {
  const json& P = c.params;
  ErmProblem p;
  p.A = A;
  const std::size_t n = static_cast<std::size_t>(A.cols());
  const std::size_t m = static_cast<std::size_t>(A.rows());
  if (c.program == "pgd_linear") {
    check_params(P, {"loss", "prox", "eta", "mu0", "xi"}, c.program);
    p.model = ErmProblem::Model::linear;
    p.loss = parse_loss(P);
    p.xi = make_vector(param_or(P, "xi", "gaussian"), m, c.seed, "xi");
  } else if (c.program == "logistic") {
    check_params(P, {"prox", "eta", "sigma", "clamp", "mu0", "xi"}, c.program);
    p.model = ErmProblem::Model::logistic;
    p.sigma = param_number(P, "sigma", 0.0);
    if (P.contains("clamp")) p.clamp = param_number(P, "clamp", 0.0);
    p.xi = make_vector(param_or(P, "xi", "logistic"), m, c.seed, "xi");
  } else {
    throw ConfigError("ERM experiments need program pgd_linear or logistic");
  }
  p.prox = parse_prox(P);
  p.eta = param_number(P, "eta", 0.0);
  p.mu0 = make_vector(param_or(P, "mu0", "gaussian"), n, c.seed, "mu0");
  p.validate();
  return p;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t r) {
  return derive_seed(seed, {stream_tag("replicate"), static_cast<std::uint64_t>(r)});
}

// ---------------------------------------------------------------------------
// Universality

ComparisonReport universality_averaged(const ExperimentConfig& c) {
  const auto start = Clock::now();
  require_replicates(c);
  const EnsembleSpec spec = ensemble_for(c);
  const EntryLaw law_b = c.law_b ? EntryLaw::parse(*c.law_b, c.law_b_p) : spec.law;
  const ProgramInstance inst = build_program(c, spec);
  const TestFunction psi = make_test_function(c.test_function);
  const std::size_t H = horizon(inst);
  const std::size_t m = c.rows(), n = c.n;

  std::vector<Outcome> oa(c.replicates), ob(c.replicates);
  parallel_for(
      c.replicates,
      [&](std::size_t r) {
        const auto [A, B] = matched_pair(spec, law_b, m, n, replicate_seed(c.seed, r));
        const ProgramInstance ri = replicate_instance(inst, c, r);
        for (int side = 0; side < 2; ++side) {
          Outcome& o = side == 0 ? oa[r] : ob[r];
          try {
            const Trajectory tr = run_instance(ri, side == 0 ? A : B);
            for (std::size_t t = 1; t <= H; ++t) o.values.push_back(averaged(tr, t, psi));
          } catch (const DivergenceError&) {
            o.diverged = true;
          }
        }
      },
      c.threads);

  ComparisonReport rep;
  rep.experiment = "universality_averaged";
  rep.replicates = c.replicates;
  rep.divergent_a = divergent(oa);
  rep.divergent_b = divergent(ob);
  for (std::size_t t = 1; t <= H; ++t) {
    const auto a = column(oa, t - 1);
    const auto b = column(ob, t - 1);
    require_usable(std::min(a.size(), b.size()), rep.experiment);
    const MeanSe sa = mean_se(a), sb = mean_se(b);
    const double cse = std::hypot(sa.se, sb.se);
    rep.stats.push_back(make_statistic("avg_" + psi.name, "t", static_cast<double>(t), sa.mean,
                                       sb.mean, sa.se, sb.se, se_tolerance(c.tolerance, cse)));
  }
  rep.details = {{"law_a", spec.law.name()},
                 {"law_b", law_b.name()},
                 {"test_function", psi.name},
                 {"psi_order", psi.order},
                 {"n", n},
                 {"m", m}};
  plot_gaps(rep);
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

ComparisonReport universality_entrywise(const ExperimentConfig& c) {
  const auto start = Clock::now();
  require_replicates(c);
  const EnsembleSpec spec = ensemble_for(c);
  const EntryLaw law_b = c.law_b ? EntryLaw::parse(*c.law_b, c.law_b_p) : spec.law;
  const ProgramInstance inst = build_program(c, spec);
  const TestFunction psi = make_test_function(c.test_function);
  const std::size_t H = horizon(inst);
  const Track track = inst.symmetric ? Track::z : Track::v;
  const std::vector<std::size_t> S = c.coordinates.empty() ? std::vector<std::size_t>{0}
                                                           : c.coordinates;
  if (S.size() > 10) throw ValidationError("coordinates: at most 10 for entrywise comparisons");
  for (auto k : S) {
    if (k >= c.n) throw ValidationError("coordinates: index out of range");
  }

  std::vector<Outcome> oa(c.replicates), ob(c.replicates);
  parallel_for(
      c.replicates,
      [&](std::size_t r) {
        const auto [A, B] = matched_pair(spec, law_b, c.rows(), c.n, replicate_seed(c.seed, r));
        const ProgramInstance ri = replicate_instance(inst, c, r);
        for (int side = 0; side < 2; ++side) {
          Outcome& o = side == 0 ? oa[r] : ob[r];
          try {
            const Trajectory tr = run_instance(ri, side == 0 ? A : B);
            const Eigen::VectorXd& w = track_at(tr, track, H);
            for (auto k : S) o.values.push_back(psi(w(static_cast<Eigen::Index>(k))));
          } catch (const DivergenceError&) {
            o.diverged = true;
          }
        }
      },
      c.threads);

  ComparisonReport rep;
  rep.experiment = "universality_entrywise";
  rep.replicates = c.replicates;
  rep.divergent_a = divergent(oa);
  rep.divergent_b = divergent(ob);
  for (std::size_t i = 0; i < S.size(); ++i) {
    const auto a = column(oa, i);
    const auto b = column(ob, i);
    require_usable(std::min(a.size(), b.size()), rep.experiment);
    const MeanSe sa = mean_se(a), sb = mean_se(b);
    rep.stats.push_back(make_statistic("entry_" + psi.name, "k", static_cast<double>(S[i]),
                                       sa.mean, sb.mean, sa.se, sb.se,
                                       se_tolerance(c.tolerance, std::hypot(sa.se, sb.se))));
  }
  rep.details = {{"law_a", spec.law.name()},
                 {"law_b", law_b.name()},
                 {"t", H},
                 {"track", inst.symmetric ? "z" : "v"}};
  plot_gaps(rep);
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

ComparisonReport universality_sweep(const ExperimentConfig& c) {
  const auto start = Clock::now();
  if (c.sweep_n.empty()) throw ConfigError("universality_sweep: sweep_n is empty");
  ComparisonReport rep;
  rep.experiment = "universality_sweep";
  rep.replicates = c.replicates;
  const TestFunction psi = make_test_function(c.test_function);
  json per_n = json::array();
  for (std::size_t n : c.sweep_n) {
    ExperimentConfig ci = c;
    ci.n = n;
    if (c.m) {
      ci.m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(static_cast<double>(*c.m) *
                                                   static_cast<double>(n) /
                                                   static_cast<double>(c.n))));
    }
    const ComparisonReport r = universality_averaged(ci);
    Statistic s = r.stats.back();
    s.name = "avg_" + psi.name;
    s.series = "n";
    s.x = static_cast<double>(n);
    rep.stats.push_back(s);
    rep.plot.push_back({psi.name, s.x, s.gap, s.combined_se});
    rep.divergent_a += r.divergent_a;
    rep.divergent_b += r.divergent_b;
    per_n.push_back({{"n", n}, {"m", ci.rows()}, {"passed", r.passed()}});
  }
  rep.details = {{"sweep", per_n}, {"t", c.T}};
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

// ---------------------------------------------------------------------------
// State evolution against simulation

ComparisonReport se_vs_simulation(const ExperimentConfig& c) {
  const auto start = Clock::now();
  require_replicates(c);
  const EnsembleSpec spec = ensemble_for(c);
  const ProgramInstance inst = build_program(c, spec);
  const TestFunction psi = make_test_function(c.test_function);
  const std::size_t H = horizon(inst);

  SeOptions opt;
  opt.mc_samples = c.mc_samples;
  opt.seed = derive_seed(c.seed, stream_tag("se"));
  opt.threads = c.threads;
  const SeRecord se = inst.symmetric ? se_symmetric(inst.sym, spec.second_moments(), H, opt)
                                     : se_asymmetric(inst.asym, spec.second_moments(), H, opt);
  const std::vector<Track> tracks =
      inst.symmetric ? std::vector<Track>{Track::z} : std::vector<Track>{Track::u, Track::v};

  const auto outcomes = replicate_map(c.replicates, c.threads, [&](std::size_t r) {
    const Eigen::MatrixXd A = sample_matrix(spec, c.rows(), c.n, replicate_seed(c.seed, r));
    const Trajectory tr = run_instance(replicate_instance(inst, c, r), A);
    std::vector<double> vals;
    for (Track tk : tracks) {
      for (std::size_t t = 1; t <= H; ++t) {
        const Eigen::VectorXd& w = track_at(tr, tk, t);
        double acc = 0.0;
        for (Eigen::Index k = 0; k < w.size(); ++k) acc += psi(w(k));
        vals.push_back(acc / static_cast<double>(w.size()));
      }
    }
    return vals;
  });

  ComparisonReport rep;
  rep.experiment = "se_vs_simulation";
  rep.replicates = c.replicates;
  rep.divergent_a = divergent(outcomes);
  std::size_t col = 0;
  for (Track tk : tracks) {
    const char* name = tk == Track::z ? "z" : (tk == Track::u ? "u" : "v");
    for (std::size_t t = 1; t <= H; ++t, ++col) {
      const auto a = column(outcomes, col);
      require_usable(a.size(), rep.experiment);
      const MeanSe sa = mean_se(a);
      const AveragedPrediction pred = predict_averaged(
          se, tk, t, psi.psi, c.mc_samples,
          derive_seed(c.seed, {stream_tag("se.predict"), static_cast<std::uint64_t>(col)}));
      rep.stats.push_back(make_statistic("avg_" + psi.name, name, static_cast<double>(t),
                                         sa.mean, pred.mean, sa.se, pred.se,
                                         se_tolerance(c.tolerance, std::hypot(sa.se, pred.se))));
    }
  }
  rep.details = {{"mc_samples", c.mc_samples},
                 {"fast_path", se.symmetric ? se.fast_path : (se.fast_u && se.fast_v)},
                 {"test_function", psi.name}};
  plot_gaps(rep);
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient descent Gaussianity

ComparisonReport gd_gaussianity_test(const ExperimentConfig& c) {
  const auto start = Clock::now();
  require_replicates(c);
  if (c.program != "gd") throw ConfigError("gd_gaussianity needs program 'gd'");
  const EnsembleSpec spec = ensemble_for(c);
  const ProgramInstance inst = build_program(c, spec);
  if (inst.resample_masks) {
    throw ConfigError("gd_gaussianity holds masks fixed; resample_masks must be false");
  }
  const GdParams& gp = *inst.gd;
  if (gp.beta != 0.0) throw ConfigError("gd_gaussianity: momentum is not covered by the GD law");
  const std::size_t m = c.rows(), n = c.n, T = c.T;
  std::vector<std::size_t> L = c.coordinates;
  if (L.empty()) {
    for (std::size_t l = 0; l < std::min<std::size_t>(5, n); ++l) L.push_back(l);
  }
  for (auto l : L) {
    if (l >= n) throw ValidationError("coordinates: index out of range");
  }

  const VarianceProfile P = spec.second_moments();
  GdSeOptions opt;
  opt.mc_samples = c.mc_samples;
  opt.seed = derive_seed(c.seed, stream_tag("gd_se"));
  opt.threads = c.threads;
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool homogeneous = P.is_constant() && gp.masks.empty() &&
                           std::abs(P.constant_value() - inv_n) <= 1e-12 * inv_n;
  GdSeState state;
  if (homogeneous) {
    state = gd_se_homogeneous(gp.loss, gp.eta, gp.lambda, gp.mu0.squaredNorm(), gp.xi,
                              static_cast<double>(m) / static_cast<double>(n), T, opt);
  } else {
    GdSeProblem prob;
    prob.loss = gp.loss;
    prob.eta = gp.eta;
    prob.lambda = gp.lambda;
    prob.mu0 = gp.mu0;
    prob.xi = gp.xi;
    prob.masks = gp.masks;
    prob.profile = P;
    prob.T = T;
    state = gd_se(prob, opt);
  }
  const GdLaw law = gd_key_params(state, T);

  const auto outcomes = replicate_map(c.replicates, c.threads, [&](std::size_t r) {
    const Eigen::MatrixXd A = sample_asymmetric(spec, m, n, replicate_seed(c.seed, r));
    const Trajectory tr = run_asymmetric(A, inst.asym);
    std::vector<double> vals;
    for (auto l : L) vals.push_back(tr.v[T](static_cast<Eigen::Index>(l)));
    return vals;
  });

  ComparisonReport rep;
  rep.experiment = "gd_gaussianity";
  rep.replicates = c.replicates;
  rep.divergent_a = divergent(outcomes);
  json laws = json::array();
  for (std::size_t i = 0; i < L.size(); ++i) {
    const auto li = static_cast<Eigen::Index>(homogeneous ? 0 : L[i]);
    const double mu0 = gp.mu0(static_cast<Eigen::Index>(L[i]));
    const double b = law.b(li), s2 = law.sigma2(li);
    const double mean = b * mu0;
    const auto x = column(outcomes, i);
    require_usable(x.size(), rep.experiment);
    const MeanSe sx = mean_se(x);
    const double lx = static_cast<double>(L[i]);
    rep.stats.push_back(make_statistic("mean", "l", lx, sx.mean, mean, sx.se,
                                       law.b_se(li) * std::abs(mu0),
                                       se_tolerance(c.tolerance,
                                                    std::hypot(sx.se, law.b_se(li) * mu0))));
    if (s2 > 0.0) {
      std::vector<double> zs(x.size());
      const double sd = std::sqrt(s2);
      for (std::size_t j = 0; j < x.size(); ++j) zs[j] = (x[j] - mean) / sd;
      rep.stats.push_back(make_statistic("ks", "l", lx, ks_distance_normal(zs), 0.0, 0.0, 0.0,
                                         c.tolerance.ks, Statistic::Check::at_most));
      const double var_se = sx.variance * std::sqrt(2.0 / (static_cast<double>(x.size()) - 1.0));
      rep.stats.push_back(make_statistic("variance", "l", lx, sx.variance, s2, var_se,
                                         law.sigma2_se(li), c.tolerance.variance_rel * s2));
    }
    laws.push_back({{"l", L[i]}, {"b", b}, {"sigma2", s2}, {"mu0", mu0}});
  }
  rep.details = {{"homogeneous", homogeneous}, {"t", T}, {"laws", laws}};
  plot_gaps(rep);
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

// ---------------------------------------------------------------------------
// Pathwise identities

ComparisonReport correspondence_check(const ExperimentConfig& c) {
  const auto start = Clock::now();
  const EnsembleSpec spec = ensemble_for(c);
  const ProgramInstance inst = build_program(c, spec);
  const std::size_t H = horizon(inst);
  const Eigen::MatrixXd A = sample_matrix(spec, c.rows(), c.n, replicate_seed(c.seed, 0));
  SeOptions opt;
  opt.mc_samples = c.mc_samples;
  opt.seed = derive_seed(c.seed, stream_tag("se"));
  opt.threads = c.threads;

  ComparisonReport rep;
  rep.experiment = "correspondence";
  rep.replicates = 1;
  auto add = [&](const char* series, std::size_t t, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& b) {
    const double dev = (a - b).cwiseAbs().maxCoeff();
    rep.stats.push_back(make_statistic("max_abs_deviation", series, static_cast<double>(t), dev,
                                       0.0, 0.0, 0.0, c.tolerance.exact));
  };
  if (inst.symmetric) {
    const SeRecord se = se_symmetric(inst.sym, spec.second_moments(), H, opt);
    const InducedAmp amp = gfom_to_amp(inst.sym, se);
    const Trajectory g = run_symmetric(A, inst.sym);
    const Trajectory a = run_amp_symmetric(A, amp.Fr, amp.onsager, inst.sym.z0);
    const auto w = amp.theta.apply(a.z, H);
    for (std::size_t t = 1; t <= H; ++t) add("z", t, g.z[t], w[t]);
  } else {
    const SeRecord se = se_asymmetric(inst.asym, spec.second_moments(), H, opt);
    const InducedAmpAsym amp = gfom_to_amp(inst.asym, se);
    const Trajectory g = run_asymmetric(A, inst.asym);
    const Trajectory a = run_amp_asymmetric(A, amp.Fr, amp.Gr, amp.bF, amp.bG, inst.asym.u0,
                                            inst.asym.v0);
    const auto wu = amp.phi.apply(a.u, H);
    const auto wv = amp.xi.apply(a.v, H);
    for (std::size_t t = 1; t <= H; ++t) add("u", t, g.u[t], wu[t]);
    for (std::size_t t = 1; t <= H; ++t) add("v", t, g.v[t], wv[t]);
  }
  plot_gaps(rep);
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

ComparisonReport embedding_check(const ExperimentConfig& c) {
  const auto start = Clock::now();
  const EnsembleSpec spec = ensemble_for(c);
  const ProgramInstance inst = build_program(c, spec);
  if (inst.symmetric) throw ConfigError("embedding needs an asymmetric program");
  const std::size_t m = c.rows(), n = c.n, H = horizon(inst);
  const Eigen::MatrixXd A = sample_asymmetric(spec, m, n, replicate_seed(c.seed, 0));
  const Trajectory direct = run_asymmetric(A, inst.asym);
  const Trajectory emb = run_symmetric(embed_matrix(A), symmetrize(inst.asym));
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n);

  ComparisonReport rep;
  rep.experiment = "embedding";
  rep.replicates = 1;
  for (std::size_t t = 1; t <= H; ++t) {
    const Eigen::VectorXd& odd = emb.z[2 * t - 1];
    const Eigen::VectorXd& even = emb.z[2 * t];
    const double du = std::max((odd.head(mi) - direct.u[t]).cwiseAbs().maxCoeff(),
                               odd.tail(ni).cwiseAbs().maxCoeff());
    const double dv = std::max((even.tail(ni) - direct.v[t]).cwiseAbs().maxCoeff(),
                               even.head(mi).cwiseAbs().maxCoeff());
    rep.stats.push_back(make_statistic("max_abs_deviation", "u", static_cast<double>(t), du, 0.0,
                                       0.0, 0.0, c.tolerance.exact));
    rep.stats.push_back(make_statistic("max_abs_deviation", "v", static_cast<double>(t), dv, 0.0,
                                       0.0, 0.0, c.tolerance.exact));
  }
  plot_gaps(rep);
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

// ---------------------------------------------------------------------------
// Diagnostics

DecayTable decay_table(const ErmProblem& problem, std::size_t T, double fp_tol) {
  const FixedPointResult fp = solve_fixed_point(problem, fp_tol);
  const auto hist = pgd(problem, T);
  DecayTable out;
  out.converged = fp.converged;
  out.fixed_point_residual = fp.residual;
  const double sqrt_n = std::sqrt(static_cast<double>(problem.n()));
  for (const auto& mu : hist) {
    const Eigen::VectorXd d = mu - fp.mu;
    out.l2.push_back(d.norm() / sqrt_n);
    out.linf.push_back(d.size() ? d.cwiseAbs().maxCoeff() : 0.0);
  }
  if (!out.converged) return out;
  const double floor = std::max(1e-12, 100.0 * fp.residual);
  std::vector<double> ts, ys;
  for (std::size_t t = 1; t <= T; ++t) {
    if (out.l2[t] > floor) {
      ts.push_back(static_cast<double>(t));
      ys.push_back(std::log(out.l2[t]));
    }
  }
  if (ts.size() >= 3) out.fit = linear_fit(ts, ys);
  return out;
}

ComparisonReport convergence_decay_report(const ErmProblem& problem, std::size_t T,
                                          const Tolerances& tol) {
  const auto start = Clock::now();
  const DecayTable d = decay_table(problem, T);
  ComparisonReport rep;
  rep.experiment = "convergence_decay";
  rep.replicates = 1;
  for (std::size_t t = 0; t < d.l2.size(); ++t) {
    rep.plot.push_back({"l2", static_cast<double>(t), d.l2[t], 0.0});
    rep.plot.push_back({"linf", static_cast<double>(t), d.linf[t], 0.0});
  }
  if (!d.converged) {
    rep.stats.push_back(make_statistic("fixed_point_residual", "", 0.0, d.fixed_point_residual,
                                       0.0, 0.0, 0.0, tol.exact, Statistic::Check::at_most));
  } else if (d.fit) {
    rep.stats.push_back(make_statistic("slope", "log_l2", 0.0, d.fit->slope, 0.0, 0.0, 0.0, 0.0,
                                       Statistic::Check::at_most));
    rep.stats.push_back(make_statistic("r2", "log_l2", 0.0, d.fit->r2, tol.r2, 0.0, 0.0, 0.0,
                                       Statistic::Check::at_least));
  } else {
    const double worst = *std::max_element(d.l2.begin() + (d.l2.size() > 1 ? 1 : 0), d.l2.end());
    rep.stats.push_back(make_statistic("max_l2", "", 0.0, worst, 0.0, 0.0, 0.0, tol.exact,
                                       Statistic::Check::at_most));
  }
  const FixedPointResult fp = solve_fixed_point(problem, 1e-13);
  const double zeros = static_cast<double>((fp.mu.array() == 0.0).count());
  rep.details = {{"converged", d.converged},
                 {"fixed_point_residual", d.fixed_point_residual},
                 {"fixed_point_iterations", fp.iterations},
                 {"eta", fp.eta},
                 {"solution_sparsity", zeros / static_cast<double>(std::max<Eigen::Index>(
                                                   fp.mu.size(), 1))}};
  if (d.fit) {
    rep.details["slope"] = d.fit->slope;
    rep.details["rate"] = std::exp(d.fit->slope);
    rep.details["r2"] = d.fit->r2;
  }
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

ComparisonReport convergence_decay(const ExperimentConfig& c) {
  if (program_is_symmetric(c.program)) {
    throw ConfigError("convergence_decay needs program pgd_linear or logistic");
  }
  const EnsembleSpec spec = ensemble_for(c);
  const Eigen::MatrixXd A =
      sample_asymmetric(spec, c.rows(), c.n, derive_seed(c.seed, stream_tag("design")));
  return convergence_decay_report(build_erm_problem(c, A), c.T, c.tolerance);
}

ComparisonReport delocalization_report(const Trajectory& traj, const std::vector<Trajectory>& loo,
                                       const Tolerances& tol) {
  const auto start = Clock::now();
  ComparisonReport rep;
  rep.experiment = "delocalization";
  rep.replicates = 1;
  const std::size_t H = traj.steps();
  auto bound = [&](std::size_t len, std::size_t t) {
    if (tol.ratio) return *tol.ratio;
    const double L = std::log(static_cast<double>(std::max<std::size_t>(len, 2)));
    return 10.0 * std::pow(L, 2.0 * static_cast<double>(t));
  };
  const std::vector<std::pair<const char*, Track>> tracks =
      traj.symmetric()
          ? std::vector<std::pair<const char*, Track>>{{"z", Track::z}}
          : std::vector<std::pair<const char*, Track>>{{"u", Track::u}, {"v", Track::v}};
  for (const auto& [name, tk] : tracks) {
    for (std::size_t t = 1; t <= H; ++t) {
      const Eigen::VectorXd& w = track_at(traj, tk, t);
      const double ratio = delocalization_ratio(w);
      rep.stats.push_back(make_statistic("ratio", name, static_cast<double>(t), ratio,
                                         bound(static_cast<std::size_t>(w.size()), t), 0.0, 0.0,
                                         0.0, Statistic::Check::at_most));
      rep.plot.push_back({std::string("ratio:") + name, static_cast<double>(t), ratio, 0.0});
      rep.plot.push_back({std::string("linf:") + name, static_cast<double>(t),
                          w.size() ? w.cwiseAbs().maxCoeff() : 0.0, 0.0});
      rep.plot.push_back({std::string("l2:") + name, static_cast<double>(t),
                          w.norm() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(w.size(), 1))),
                          0.0});
    }
  }
  json gaps = json::array();
  for (std::size_t i = 0; i < loo.size(); ++i) {
    json row = json::array();
    for (const auto& [name, tk] : tracks) {
      for (std::size_t t = 1; t <= std::min(H, loo[i].steps()); ++t) {
        const double g = (track_at(traj, tk, t) - track_at(loo[i], tk, t)).cwiseAbs().maxCoeff();
        row.push_back({{"track", name}, {"t", t}, {"gap", g}});
        rep.plot.push_back({std::string("loo_gap:") + name, static_cast<double>(t), g, 0.0});
      }
    }
    gaps.push_back(row);
  }
  rep.details = {{"leave_one_out", gaps}};
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

ComparisonReport delocalization(const ExperimentConfig& c) {
  const auto start = Clock::now();
  const EnsembleSpec spec = ensemble_for(c);
  const ProgramInstance inst = build_program(c, spec);
  const std::vector<std::size_t> S = c.coordinates.empty() ? std::vector<std::size_t>{0}
                                                           : c.coordinates;
  for (auto k : S) {
    if (k >= c.n) throw ValidationError("coordinates: index out of range");
  }
  const std::size_t m = c.rows();

  std::vector<ComparisonReport> reps(c.replicates);
  std::vector<char> diverged(c.replicates, 0);
  parallel_for(
      c.replicates,
      [&](std::size_t r) {
        try {
          const Eigen::MatrixXd A = sample_matrix(spec, m, c.n, replicate_seed(c.seed, r));
          const Trajectory tr = run_instance(replicate_instance(inst, c, r), A);
          std::vector<Trajectory> loo;
          if (r == 0) {
            for (auto k : S) {
              if (inst.symmetric) {
                loo.push_back(run_leave_k_out(A, inst.sym, {k}));
                continue;
              }
              // Predictor k dropped through the symmetric embedding.
              const Trajectory e =
                  run_leave_k_out(embed_matrix(A), symmetrize(inst.asym), {m + k});
              Trajectory back;
              const auto mi = static_cast<Eigen::Index>(m);
              const auto ni = static_cast<Eigen::Index>(c.n);
              back.u.push_back(inst.asym.u0);
              back.v.push_back(inst.asym.v0);
              for (std::size_t t = 1; 2 * t < e.z.size(); ++t) {
                back.u.push_back(e.z[2 * t - 1].head(mi));
                back.v.push_back(e.z[2 * t].tail(ni));
              }
              loo.push_back(std::move(back));
            }
          }
          reps[r] = delocalization_report(tr, loo, c.tolerance);
        } catch (const DivergenceError&) {
          diverged[r] = 1;
        }
      },
      c.threads);

  ComparisonReport rep;
  rep.experiment = "delocalization";
  rep.replicates = c.replicates;
  rep.divergent_a = static_cast<std::size_t>(std::count(diverged.begin(), diverged.end(), 1));
  // Worst replicate per (track, t).
  for (std::size_t r = 0; r < c.replicates; ++r) {
    if (diverged[r]) continue;
    if (rep.stats.empty()) {
      rep.stats = reps[r].stats;
      rep.details = reps[r].details;
      continue;
    }
    for (std::size_t i = 0; i < rep.stats.size(); ++i) {
      if (reps[r].stats[i].estimate_a > rep.stats[i].estimate_a) rep.stats[i] = reps[r].stats[i];
    }
  }
  for (const auto& s : rep.stats) {
    rep.plot.push_back({"max_ratio:" + s.series, s.x, s.estimate_a, 0.0});
  }
  if (!diverged.empty() && !diverged[0]) {
    for (const auto& p : reps[0].plot) {
      if (p.series.rfind("loo_gap", 0) == 0) rep.plot.push_back(p);
    }
  }
  rep.runtime_seconds = seconds_since(start);
  return rep;
}

}  // namespace gfom
