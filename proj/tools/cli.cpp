#include "cli.hpp"

#include <omp.h>
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "vfest/errors.hpp"
#include "vfest/hypothesis.hpp"
#include "vfest/intervals.hpp"
#include "vfest/io.hpp"
#include "vfest/macl.hpp"
#include "vfest/mixture_em.hpp"
#include "vfest/model.hpp"
#include "vfest/rng.hpp"
#include "vfest/simulate.hpp"

#ifndef VFEST_VERSION
#define VFEST_VERSION "0.0.0"
#endif

namespace vfest::cli {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kDefaultA = 7.3;
constexpr double kDefaultB = 13.9;
constexpr double kDefaultD = 0.25;
constexpr double kDefaultAlpha = 0.05;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join(const std::vector<double>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s.push_back(sep);
    s += format_double(v[i]);
  }
  return s;
}

Json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

enum class Format { Csv, Json };

// Options shared by every subcommand.
struct Global {
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "auto";
  int threads = 0;
  bool quiet = false;
};

struct Context {
  Global global;
  CLI::Option* seed_opt = nullptr;
  RunManifest manifest;
  std::ostringstream body;
  std::ostream* err = nullptr;
  Format format = Format::Json;

  void config(const std::string& key, const std::string& value) {
    manifest.config.emplace_back(key, value);
  }
  void config(const std::string& key, double value) { config(key, format_double(value)); }
  void input(const std::string& path) { manifest.inputs.emplace_back(path, sha256_file(path)); }
  void warn(const std::string& msg) const {
    if (!global.quiet) *err << "warning: " << msg << '\n';
  }
};

Format resolve_format(const std::string& requested, Format fallback) {
  if (requested == "auto") return fallback;
  if (requested == "csv") return Format::Csv;
  if (requested == "json" || requested == "jsonl") return Format::Json;
  throw ArgumentError("--format must be csv or json");
}

VarianceModel make_model(const std::string& form, const std::string& theta) {
  return VarianceModel(parse_variance_form(form), parse_double_list(theta));
}

Bounds make_bounds(double a, double b) {
  Bounds bounds{a, b};
  validate(bounds);
  return bounds;
}

ReadResult load(Context& ctx, const std::string& path, bool raw, bool drop_ties, Bounds bounds) {
  ReadOptions opt;
  opt.raw = raw;
  opt.drop_ties = drop_ties;
  opt.bounds = bounds;
  ReadResult r = read_pairs_csv(path, opt);
  ctx.input(path);
  if (r.dropped_ties > 0) {
    ctx.warn(path + ": dropped " + std::to_string(r.dropped_ties) + " pair(s) with y1 == y2");
  }
  return r;
}

Interval rescale(const Interval& iv, bool ratio) { return ratio ? to_ratio(iv) : iv; }

// ---------------------------------------------------------------- fit-macl

struct FitMaclArgs {
  std::string input;
  std::string form = "exp-linear";
  std::string init;
  double tol = 1e-9;
  int max_iter = 200;
  bool raw = false;
};

void cmd_fit_macl(Context& ctx, const FitMaclArgs& a) {
  ctx.config("input", a.input);
  ctx.config("form", a.form);
  ctx.config("init", a.init.empty() ? "default" : a.init);
  ctx.config("tol", a.tol);
  ctx.config("max_iter", std::to_string(a.max_iter));
  ctx.config("raw", a.raw ? "true" : "false");
  const VarianceForm form = parse_variance_form(a.form);
  const ReadResult data = load(ctx, a.input, a.raw, true, Bounds{});
  MaclOptions opt;
  opt.tol = a.tol;
  opt.max_iter = a.max_iter;
  if (!a.init.empty()) opt.init = parse_double_list(a.init);
  const FitResult fit = macl_fit(data.data, form, opt);

  if (ctx.format == Format::Json) {
    Json rec;
    rec["form"] = std::string(to_string(fit.form));
    rec["theta_hat"] = numbers(fit.theta_hat);
    rec["converged"] = fit.converged;
    rec["iterations"] = fit.iterations;
    rec["residual_norm"] = number(fit.residual_norm);
    rec["n"] = data.data.size();
    rec["dropped_ties"] = data.dropped_ties;
    ctx.body << rec.dump() << '\n';
  } else {
    ctx.body << "form";
    for (std::size_t j = 0; j < fit.theta_hat.size(); ++j) ctx.body << ",theta" << j + 1;
    ctx.body << ",converged,iterations,residual_norm,n,dropped_ties\n";
    ctx.body << to_string(fit.form);
    for (double t : fit.theta_hat) ctx.body << ',' << format_double(t);
    ctx.body << ',' << (fit.converged ? 1 : 0) << ',' << fit.iterations << ','
             << format_double(fit.residual_norm) << ',' << data.data.size() << ','
             << data.dropped_ties << '\n';
  }
}

// ------------------------------------------------------------- fit-mixture

struct FitMixtureArgs {
  std::string input;
  std::string form = "exp-linear";
  double d = kDefaultD;
  double a = kDefaultA;
  double b = kDefaultB;
  double tol = 1e-8;
  int max_iter = 2000;
  bool no_weights = false;
  bool raw = false;
};

void cmd_fit_mixture(Context& ctx, const FitMixtureArgs& a) {
  ctx.config("input", a.input);
  ctx.config("form", a.form);
  ctx.config("d", a.d);
  ctx.config("a", a.a);
  ctx.config("b", a.b);
  ctx.config("tol", a.tol);
  ctx.config("max_iter", std::to_string(a.max_iter));
  ctx.config("raw", a.raw ? "true" : "false");
  const VarianceForm form = parse_variance_form(a.form);
  const ReadResult data = load(ctx, a.input, a.raw, true, make_bounds(a.a, a.b));
  EmOptions em;
  em.tol = a.tol;
  em.max_iter = a.max_iter;
  const MixtureFit fit = fit_mixture(data.data, form, a.d, em);
  const MixtureEstimate& est = fit.estimate;
  if (!est.converged) {
    ctx.warn("EM stopped at max_iter = " + std::to_string(a.max_iter) + " before converging");
  }

  if (ctx.format == Format::Json) {
    Json rec;
    rec["form"] = std::string(to_string(est.form));
    rec["theta_hat"] = numbers(est.theta_hat);
    rec["J"] = fit.grid.size();
    rec["log_lik"] = number(est.log_lik);
    rec["iterations"] = est.iterations;
    rec["converged"] = est.converged;
    rec["init_theta"] = numbers(fit.init_theta);
    rec["n"] = data.data.size();
    rec["dropped_ties"] = data.dropped_ties;
    if (!a.no_weights) {
      rec["support"] = numbers(fit.grid.points);
      rec["pi_hat"] = numbers(est.pi_hat);
    }
    ctx.body << rec.dump() << '\n';
  } else {
    // Summary row; weights follow as a second table.
    ctx.body << "form";
    for (std::size_t j = 0; j < est.theta_hat.size(); ++j) ctx.body << ",theta" << j + 1;
    ctx.body << ",J,log_lik,iterations,converged,n,dropped_ties\n";
    ctx.body << to_string(est.form);
    for (double t : est.theta_hat) ctx.body << ',' << format_double(t);
    ctx.body << ',' << fit.grid.size() << ',' << format_double(est.log_lik) << ','
             << est.iterations << ',' << (est.converged ? 1 : 0) << ',' << data.data.size()
             << ',' << data.dropped_ties << '\n';
    if (!a.no_weights) {
      ctx.body << "\nmu,pi\n";
      for (std::size_t j = 0; j < fit.grid.size(); ++j) {
        ctx.body << format_double(fit.grid.points[j]) << ',' << format_double(est.pi_hat[j])
                 << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------- ci

struct CiArgs {
  std::string theta;
  std::string form = "exp-linear";
  std::optional<double> y1;
  std::optional<double> y2;
  std::string input;
  double alpha = kDefaultAlpha;
  std::string method = "exact";
  double a = kDefaultA;
  double b = kDefaultB;
  std::string scale = "log";
  double grid_res = kDefaultGridRes;
  bool unbounded = false;
  bool raw = false;
};

struct CiOutcome {
  std::vector<Interval> components;
  Interval hull;
  bool disconnected = false;
};

CiOutcome compute_ci(const CiArgs& a, const VarianceModel& model, const Bounds& bounds, double y1,
                     std::optional<double> y2) {
  CiOutcome o;
  auto from_set = [&](const ConfidenceSet& set) {
    if (set.empty()) throw NumericalError("confidence set is empty");
    o.components = set.components;
    o.hull = set.hull;
    o.disconnected = set.disconnected;
  };
  auto from_interval = [&](const Interval& iv) {
    o.components = {iv};
    o.hull = iv;
  };
  if (!y2) {
    if (a.method == "exact") {
      from_set(ci_mu_exact(y1, model, a.alpha,
                           a.unbounded ? std::nullopt : std::optional<Bounds>(bounds)));
    } else if (a.method == "naive") {
      from_interval(ci_mu_naive(y1, model, a.alpha));
    } else {
      throw ArgumentError("--method " + a.method + " needs --y2");
    }
  } else {
    if (a.method == "region") {
      from_set(ci_diff_region(y1, *y2, model, a.alpha, bounds, a.grid_res));
    } else if (a.method == "bonferroni") {
      from_interval(ci_diff_bonferroni(y1, *y2, model, a.alpha, bounds));
    } else if (a.method == "naive") {
      from_interval(ci_diff_naive(y1, *y2, model, a.alpha));
    } else {
      throw ArgumentError("--method exact takes a single observation (omit --y2)");
    }
  }
  return o;
}

void cmd_ci(Context& ctx, const CiArgs& a) {
  if (a.method != "exact" && a.method != "naive" && a.method != "region" &&
      a.method != "bonferroni") {
    throw ArgumentError("--method must be exact, naive, region or bonferroni");
  }
  if (a.scale != "log" && a.scale != "ratio") throw ArgumentError("--scale must be log or ratio");
  if (a.input.empty() == !a.y1.has_value()) {
    throw ArgumentError("give either --y1 [--y2] or --input");
  }
  if (!(a.grid_res > 0.0)) throw ArgumentError("--grid-res must be positive");
  const VarianceModel model = make_model(a.form, a.theta);
  const Bounds bounds = make_bounds(a.a, a.b);
  const bool ratio = a.scale == "ratio";
  ctx.config("theta", a.theta);
  ctx.config("form", a.form);
  ctx.config("method", a.method);
  ctx.config("alpha", a.alpha);
  ctx.config("a", a.a);
  ctx.config("b", a.b);
  ctx.config("scale", a.scale);
  ctx.config("grid_res", a.grid_res);
  ctx.config("unbounded", a.unbounded ? "true" : "false");

  if (a.y1) {
    ctx.config("y1", *a.y1);
    if (a.y2) ctx.config("y2", *a.y2);
    const CiOutcome o = compute_ci(a, model, bounds, *a.y1, a.y2);
    const Interval hull = rescale(o.hull, ratio);
    if (ctx.format == Format::Json) {
      Json rec;
      rec["method"] = a.method;
      rec["y1"] = *a.y1;
      if (a.y2) rec["y2"] = *a.y2;
      rec["level"] = 1.0 - a.alpha;
      rec["scale"] = a.scale;
      rec["lo"] = number(hull.lo);
      rec["hi"] = number(hull.hi);
      rec["disconnected"] = o.disconnected;
      Json comps = Json::array();
      for (const auto& c : o.components) {
        const Interval r = rescale(c, ratio);
        comps.push_back(Json::array({number(r.lo), number(r.hi)}));
      }
      rec["components"] = comps;
      ctx.body << rec.dump() << '\n';
    } else {
      ctx.body << "y1,y2,lo,hi,disconnected,method\n";
      ctx.body << format_double(*a.y1) << ',' << (a.y2 ? format_double(*a.y2) : "") << ','
               << format_double(hull.lo) << ',' << format_double(hull.hi) << ','
               << (o.disconnected ? 1 : 0) << ',' << a.method << '\n';
    }
    return;
  }

  ctx.config("input", a.input);
  ctx.config("raw", a.raw ? "true" : "false");
  const ReadResult data = load(ctx, a.input, a.raw, false, bounds);
  if (ctx.format == Format::Csv) ctx.body << "id,y1,y2,lo,hi,disconnected,method\n";
  for (const auto& p : data.data.pairs()) {
    const std::optional<double> y2 =
        a.method == "exact" ? std::nullopt : std::optional<double>(p.y2);
    const CiOutcome o = compute_ci(a, model, bounds, p.y1, y2);
    const Interval hull = rescale(o.hull, ratio);
    if (ctx.format == Format::Json) {
      Json rec;
      rec["id"] = p.id;
      rec["y1"] = p.y1;
      rec["y2"] = p.y2;
      rec["lo"] = number(hull.lo);
      rec["hi"] = number(hull.hi);
      rec["disconnected"] = o.disconnected;
      rec["method"] = a.method;
      ctx.body << rec.dump() << '\n';
    } else {
      ctx.body << csv_escape(p.id) << ',' << format_double(p.y1) << ',' << format_double(p.y2)
               << ',' << format_double(hull.lo) << ',' << format_double(hull.hi) << ','
               << (o.disconnected ? 1 : 0) << ',' << a.method << '\n';
    }
  }
}

// ------------------------------------------------------------------ pvalue

struct PvalueArgs {
  std::string theta;
  std::string form = "exp-linear";
  std::string input;
  std::string method = "berger-boos";
  double beta = kDefaultBetaAnalysis;
  double a = kDefaultA;
  double b = kDefaultB;
  bool bonferroni = false;
  double level = 0.05;
  std::string cbeta_pivot = "pair-mean";
  bool raw = false;
};

CBetaPivot parse_cbeta_pivot(const std::string& s) {
  if (s == "pair-mean") return CBetaPivot::PairMean;
  if (s == "two-observation") return CBetaPivot::TwoObservation;
  throw ArgumentError("--cbeta-pivot must be pair-mean or two-observation");
}

TestResult run_test(TestMethod m, double y1, double y2, const VarianceModel& model,
                    const Bounds& bounds, double beta, CBetaPivot pivot) {
  switch (m) {
    case TestMethod::Naive:
      return pvalue_naive(y1, y2, model);
    case TestMethod::Conservative:
      return pvalue_conservative(y1, y2, model, bounds);
    case TestMethod::BergerBoos:
      return pvalue_berger_boos(y1, y2, model, bounds, beta, pivot);
  }
  throw ArgumentError("unknown test method");
}

void cmd_pvalue(Context& ctx, const PvalueArgs& a) {
  const TestMethod method = parse_test_method(a.method);
  const CBetaPivot pivot = parse_cbeta_pivot(a.cbeta_pivot);
  if (!(a.beta > 0.0 && a.beta < 1.0)) throw ArgumentError("--beta must lie in (0,1)");
  const VarianceModel model = make_model(a.form, a.theta);
  const Bounds bounds = make_bounds(a.a, a.b);
  ctx.config("theta", a.theta);
  ctx.config("form", a.form);
  ctx.config("input", a.input);
  ctx.config("method", a.method);
  ctx.config("beta", a.beta);
  ctx.config("a", a.a);
  ctx.config("b", a.b);
  ctx.config("cbeta_pivot", a.cbeta_pivot);
  ctx.config("bonferroni", a.bonferroni ? "true" : "false");
  ctx.config("level", a.level);
  ctx.config("raw", a.raw ? "true" : "false");
  const ReadResult data = load(ctx, a.input, a.raw, false, bounds);
  const std::size_t n = data.data.size();
  const double threshold = a.level / static_cast<double>(n);
  std::size_t significant = 0;
  if (ctx.format == Format::Csv) {
    ctx.body << "id,y1,y2,statistic,p_value,mu_sup";
    if (a.bonferroni) ctx.body << ",significant";
    ctx.body << '\n';
  }
  for (const auto& p : data.data.pairs()) {
    const TestResult r = run_test(method, p.y1, p.y2, model, bounds, a.beta, pivot);
    const bool sig = r.p_value < threshold;
    significant += sig;
    if (r.empty_nuisance_set) ctx.warn("pair " + p.id + ": nuisance set missed [a,b]");
    if (ctx.format == Format::Json) {
      Json rec;
      rec["id"] = p.id;
      rec["y1"] = p.y1;
      rec["y2"] = p.y2;
      rec["statistic"] = r.statistic ? number(*r.statistic) : Json(nullptr);
      rec["p_value"] = r.p_value;
      rec["mu_sup"] = number(r.mu_sup);
      if (a.bonferroni) rec["significant"] = sig;
      ctx.body << rec.dump() << '\n';
    } else {
      ctx.body << csv_escape(p.id) << ',' << format_double(p.y1) << ',' << format_double(p.y2)
               << ',' << (r.statistic ? format_double(*r.statistic) : "") << ','
               << format_double(r.p_value) << ','
               << (std::isnan(r.mu_sup) ? "" : format_double(r.mu_sup));
      if (a.bonferroni) ctx.body << ',' << (sig ? 1 : 0);
      ctx.body << '\n';
    }
  }
  if (a.bonferroni) {
    Json s;
    s["n"] = n;
    s["threshold"] = threshold;
    s["significant"] = significant;
    ctx.manifest.summary = s;
    if (!ctx.global.quiet) {
      *ctx.err << significant << " of " << n << " p-values below " << a.level << "/N = "
               << format_double(threshold) << '\n';
    }
  }
}

// ---------------------------------------------------------------- simulate

using KeyValues = std::map<std::string, std::string>;

KeyValues read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  KeyValues kv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line is not key=value", row);
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

std::vector<double> read_means_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open means file '" + path + "'");
  std::vector<double> means;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.empty() || fields[0].find_first_not_of(" \t\r") == std::string::npos) continue;
    double x = 0.0;
    try {
      x = parse_double(fields[0]);
    } catch (const ArgumentError&) {
      if (row == 1) continue;  // header
      throw DataError("mean is not a number", row);
    }
    if (!std::isfinite(x)) throw DataError("mean is not finite", row);
    means.push_back(x);
  }
  if (means.empty()) throw DataError("means file '" + path + "' is empty");
  return means;
}

struct SimulateArgs {
  std::string study;
  std::string config;
};

void cmd_simulate(Context& ctx, const SimulateArgs& a) {
  KeyValues kv = read_config(a.config);
  ctx.input(a.config);
  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"estimator",
       {"theta", "form", "scenario", "n", "reps", "seed", "estimator", "means_file", "a", "b",
        "d", "em_tol", "em_max_iter"}},
      {"coverage",
       {"theta", "theta_fit", "form", "reps", "seed", "alpha", "mu_grid", "methods", "a", "b",
        "grid_res"}},
      {"power",
       {"theta", "form", "reps", "seed", "alpha", "beta", "mu_grid", "k_grid", "a", "b"}},
  };
  const auto it = allowed.find(a.study);
  if (it == allowed.end()) throw ArgumentError("--study must be estimator, coverage or power");
  for (const auto& [key, value] : kv) {
    if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
      throw ArgumentError("config key '" + key + "' is not used by the " + a.study + " study");
    }
  }
  auto get = [&](const std::string& key, const std::string& fallback) {
    const auto f = kv.find(key);
    return f == kv.end() ? fallback : f->second;
  };
  auto get_size = [&](const std::string& key, std::size_t fallback) -> std::size_t {
    const auto f = kv.find(key);
    if (f == kv.end()) return fallback;
    const double x = parse_double(f->second);
    if (!(x >= 0.0) || x != std::floor(x)) throw ArgumentError(key + " must be a whole number");
    return static_cast<std::size_t>(x);
  };

  std::uint64_t seed = get_size("seed", 1);
  if (ctx.seed_opt && ctx.seed_opt->count()) seed = ctx.global.seed;
  ctx.manifest.seed = seed;
  const std::string form = get("form", "exp-linear");
  const std::string theta_text = get("theta", "5,-1");
  const VarianceModel theta = make_model(form, theta_text);
  const double a_bound = parse_double(get("a", format_double(kDefaultA)));
  const double b_bound = parse_double(get("b", format_double(kDefaultB)));
  ctx.config("study", a.study);
  ctx.config("form", form);
  ctx.config("theta", theta_text);
  ctx.config("seed", std::to_string(seed));

  if (a.study == "estimator") {
    const Estimator est = parse_estimator(get("estimator", "macl"));
    Scenario s = parse_scenario(get("scenario", "uniform:8,12"));
    s.n = get_size("n", 2000);
    s.seed = seed;
    if (kv.count("means_file")) {
      s.source_means = read_means_file(kv["means_file"]);
      ctx.input(kv["means_file"]);
    }
    if (kv.count("a") || kv.count("b")) s.bounds = make_bounds(a_bound, b_bound);
    EstimatorOptions opt;
    opt.d = parse_double(get("d", format_double(kDefaultD)));
    opt.em_tol = parse_double(get("em_tol", "1e-8"));
    opt.em_max_iter = static_cast<int>(get_size("em_max_iter", 2000));
    const std::size_t reps = get_size("reps", est == Estimator::MACL ? 1000 : 200);
    const Bounds used = scenario_bounds(s);
    ctx.config("estimator", std::string(to_string(est)));
    ctx.config("scenario", describe(s));
    ctx.config("n", std::to_string(s.n));
    ctx.config("reps", std::to_string(reps));
    ctx.config("a", used.a);
    ctx.config("b", used.b);
    ctx.config("d", opt.d);
    ctx.config("em_tol", opt.em_tol);
    ctx.config("em_max_iter", std::to_string(opt.em_max_iter));
    const EstimatorReport r = estimator_study(s, theta, reps, est, opt);
    if (r.failures) ctx.warn(std::to_string(r.failures) + " replicate fit(s) failed");
    if (r.nonconverged) ctx.warn(std::to_string(r.nonconverged) + " EM fit(s) hit max_iter");
    ctx.body << to_csv(r);
  } else if (a.study == "coverage") {
    CoverageConfig c;
    c.theta_true = theta;
    c.theta_fit = make_model(form, get("theta_fit", theta_text));
    c.mu_grid = parse_double_list(get("mu_grid", "7.5,9,11,13"));
    c.alpha = parse_double(get("alpha", format_double(kDefaultAlpha)));
    c.reps = get_size("reps", 100000);
    c.seed = seed;
    c.bounds = make_bounds(a_bound, b_bound);
    c.grid_res = parse_double(get("grid_res", format_double(kDefaultGridRes)));
    c.methods.clear();
    const std::string methods = get("methods", "exact,naive");
    std::stringstream ss(methods);
    for (std::string m; std::getline(ss, m, ',');) c.methods.push_back(parse_coverage_method(m));
    ctx.config("theta_fit", get("theta_fit", theta_text));
    ctx.config("mu_grid", join(c.mu_grid));
    ctx.config("alpha", c.alpha);
    ctx.config("reps", std::to_string(c.reps));
    ctx.config("methods", methods);
    ctx.config("a", c.bounds.a);
    ctx.config("b", c.bounds.b);
    ctx.config("grid_res", c.grid_res);
    ctx.body << to_csv(coverage_study(c));
  } else {
    PowerConfig c;
    c.theta = theta;
    c.mu_grid = parse_double_list(get("mu_grid", "8,10,12"));
    c.k_grid = parse_double_list(get("k_grid", "0,1,2,3"));
    c.reps = get_size("reps", 10000);
    c.beta = parse_double(get("beta", format_double(kDefaultBetaSimulation)));
    c.level = parse_double(get("alpha", format_double(kDefaultAlpha)));
    c.bounds = make_bounds(a_bound, b_bound);
    c.seed = seed;
    ctx.config("mu_grid", join(c.mu_grid));
    ctx.config("k_grid", join(c.k_grid));
    ctx.config("reps", std::to_string(c.reps));
    ctx.config("beta", c.beta);
    ctx.config("alpha", c.level);
    ctx.config("a", c.bounds.a);
    ctx.config("b", c.bounds.b);
    ctx.body << to_csv(power_study(c));
  }
}

// ------------------------------------------------------------- bias-oracle

struct BiasArgs {
  std::string theta;
  std::string mus;
  std::string means_file;
};

void cmd_bias_oracle(Context& ctx, const BiasArgs& a) {
  if (a.mus.empty() == a.means_file.empty()) throw ArgumentError("give either --mus or --means");
  const VarianceModel model = make_model("exp-linear", a.theta);
  std::vector<double> mus;
  if (!a.mus.empty()) {
    mus = parse_double_list(a.mus);
    ctx.config("mus", a.mus);
  } else {
    mus = read_means_file(a.means_file);
    ctx.config("means", a.means_file);
    ctx.input(a.means_file);
  }
  ctx.config("theta", a.theta);
  const EquationBias bias = estimating_equation_bias(model, mus);
  if (ctx.format == Format::Json) {
    Json rec;
    rec["theta"] = numbers(model.theta());
    rec["n"] = mus.size();
    rec["first"] = number(bias.first);
    rec["second"] = number(bias.second);
    ctx.body << rec.dump() << '\n';
  } else {
    ctx.body << "theta1,theta2,n,first,second\n"
             << format_double(model.theta()[0]) << ',' << format_double(model.theta()[1]) << ','
             << mus.size() << ',' << format_double(bias.first) << ','
             << format_double(bias.second) << '\n';
  }
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
  std::string control;
  std::string experiment;
  std::string form = "exp-linear";
  std::string config;
  double d = kDefaultD;
  double a = kDefaultA;
  double b = kDefaultB;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBetaAnalysis;
  double level = 0.05;
  double tol = 1e-8;
  int max_iter = 2000;
  double grid_res = kDefaultGridRes;
  bool no_region = false;
  std::string scale = "log";
  bool raw = false;
};

void apply_pipeline_config(PipelineArgs& a, const std::string& path) {
  for (const auto& [key, value] : read_config(path)) {
    if (key == "form") a.form = value;
    else if (key == "d") a.d = parse_double(value);
    else if (key == "a") a.a = parse_double(value);
    else if (key == "b") a.b = parse_double(value);
    else if (key == "alpha") a.alpha = parse_double(value);
    else if (key == "beta") a.beta = parse_double(value);
    else if (key == "level") a.level = parse_double(value);
    else if (key == "tol") a.tol = parse_double(value);
    else if (key == "max_iter") a.max_iter = static_cast<int>(parse_double(value));
    else if (key == "grid_res") a.grid_res = parse_double(value);
    else if (key == "scale") a.scale = value;
    else throw ArgumentError("config key '" + key + "' is not used by pipeline");
  }
}

void cmd_pipeline(Context& ctx, PipelineArgs a) {
  if (!a.config.empty()) {
    apply_pipeline_config(a, a.config);
    ctx.input(a.config);
  }
  if (a.scale != "log" && a.scale != "ratio") throw ArgumentError("scale must be log or ratio");
  const VarianceForm form = parse_variance_form(a.form);
  if (form != VarianceForm::ExpLinear && !a.no_region) {
    throw ArgumentError("region intervals need the exp-linear form (or --no-region)");
  }
  const Bounds bounds = make_bounds(a.a, a.b);
  ctx.config("control", a.control);
  ctx.config("experiment", a.experiment);
  ctx.config("form", a.form);
  ctx.config("d", a.d);
  ctx.config("a", a.a);
  ctx.config("b", a.b);
  ctx.config("alpha", a.alpha);
  ctx.config("beta", a.beta);
  ctx.config("level", a.level);
  ctx.config("tol", a.tol);
  ctx.config("max_iter", std::to_string(a.max_iter));
  ctx.config("grid_res", a.grid_res);
  ctx.config("region", a.no_region ? "false" : "true");
  ctx.config("scale", a.scale);
  ctx.config("raw", a.raw ? "true" : "false");

  const ReadResult control = load(ctx, a.control, a.raw, true, bounds);
  const ReadResult experiment = load(ctx, a.experiment, a.raw, false, bounds);
  EmOptions em;
  em.tol = a.tol;
  em.max_iter = a.max_iter;
  const MixtureFit fit = fit_mixture(control.data, form, a.d, em);
  if (!fit.estimate.converged) ctx.warn("control EM fit hit max_iter");
  const VarianceModel model = fit.estimate.model();
  const bool ratio = a.scale == "ratio";

  const std::size_t n = experiment.data.size();
  const double threshold = a.level / static_cast<double>(n);
  constexpr TestMethod kMethods[] = {TestMethod::Naive, TestMethod::Conservative,
                                     TestMethod::BergerBoos};
  std::size_t counts[3] = {0, 0, 0};
  if (ctx.format == Format::Csv) {
    ctx.body << "id,y1,y2,region_lo,region_hi,region_disconnected,naive_lo,naive_hi,"
                "p_naive,p_conservative,p_berger_boos,sig_naive,sig_conservative,"
                "sig_berger_boos\n";
  }
  for (const auto& p : experiment.data.pairs()) {
    Interval region;
    bool disconnected = false;
    if (!a.no_region) {
      const ConfidenceSet set = ci_diff_region(p.y1, p.y2, model, a.alpha, bounds, a.grid_res);
      region = rescale(set.hull, ratio);
      disconnected = set.disconnected;
    }
    const Interval naive = rescale(ci_diff_naive(p.y1, p.y2, model, a.alpha), ratio);
    double pv[3];
    bool sig[3];
    for (int m = 0; m < 3; ++m) {
      pv[m] = run_test(kMethods[m], p.y1, p.y2, model, bounds, a.beta, CBetaPivot::PairMean)
                  .p_value;
      sig[m] = pv[m] < threshold;
      counts[m] += sig[m];
    }
    if (ctx.format == Format::Json) {
      Json rec;
      rec["id"] = p.id;
      rec["y1"] = p.y1;
      rec["y2"] = p.y2;
      rec["region_lo"] = number(region.lo);
      rec["region_hi"] = number(region.hi);
      rec["region_disconnected"] = disconnected;
      rec["naive_lo"] = number(naive.lo);
      rec["naive_hi"] = number(naive.hi);
      for (int m = 0; m < 3; ++m) {
        rec["p_" + std::string(to_string(kMethods[m]))] = pv[m];
      }
      for (int m = 0; m < 3; ++m) {
        rec["sig_" + std::string(to_string(kMethods[m]))] = sig[m];
      }
      ctx.body << rec.dump() << '\n';
    } else {
      auto opt = [](double x) { return std::isnan(x) ? std::string() : format_double(x); };
      ctx.body << csv_escape(p.id) << ',' << format_double(p.y1) << ',' << format_double(p.y2)
               << ',' << opt(region.lo) << ',' << opt(region.hi) << ','
               << (disconnected ? 1 : 0) << ',' << format_double(naive.lo) << ','
               << format_double(naive.hi) << ',' << format_double(pv[0]) << ','
               << format_double(pv[1]) << ',' << format_double(pv[2]) << ',' << sig[0] << ','
               << sig[1] << ',' << sig[2] << '\n';
    }
  }

  Json s;
  s["theta_hat"] = numbers(fit.estimate.theta_hat);
  s["J"] = fit.grid.size();
  s["em_iterations"] = fit.estimate.iterations;
  s["em_converged"] = fit.estimate.converged;
  s["control_n"] = control.data.size();
  s["experiment_n"] = n;
  s["threshold"] = threshold;
  Json sig;
  for (int m = 0; m < 3; ++m) sig[std::string(to_string(kMethods[m]))] = counts[m];
  s["significant"] = sig;
  ctx.manifest.summary = s;
  if (ctx.format == Format::Json) {
    Json rec;
    rec["summary"] = s;
    ctx.body << rec.dump() << '\n';
  } else if (!ctx.global.quiet) {
    *ctx.err << "significant at " << a.level << "/N: naive " << counts[0] << ", conservative "
             << counts[1] << ", berger-boos " << counts[2] << " of " << n << '\n';
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write '" + path + "'");
  f << text;
  if (!f) throw ArgumentError("error writing '" + path + "'");
}

}  // namespace

Json RunManifest::to_json() const {
  Json j;
  j["subcommand"] = subcommand;
  Json cfg;
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = seed;
  j["version"] = version;
  Json in = Json::array();
  for (const auto& [path, digest] : inputs) {
    Json e;
    e["path"] = path;
    e["sha256"] = digest;
    in.push_back(e);
  }
  j["inputs"] = in;
  j["timestamp"] = timestamp;
  if (!summary.is_null()) j["summary"] = summary;
  return j;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  EVP_MD_CTX* md = EVP_MD_CTX_new();
  if (!md) throw NumericalError("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(md, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(md, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md, digest, &len);
  EVP_MD_CTX_free(md);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string library_version() { return VFEST_VERSION; }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variance-function estimation, confidence sets and p-values for paired replicates",
               "vfest"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  ctx.err = &err;
  ctx.seed_opt = app.add_option("--seed", ctx.global.seed, "Random seed (simulate)");
  app.add_option("--out", ctx.global.out, "Write results here instead of standard output");
  app.add_option("--format", ctx.global.format, "csv | json (line-delimited)")
      ->check(CLI::IsMember({"auto", "csv", "json", "jsonl"}));
  app.add_option("--threads", ctx.global.threads, "OpenMP worker count (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", ctx.global.quiet, "Suppress warnings and summaries on stderr");

  FitMaclArgs macl;
  auto* s_macl = app.add_subcommand("fit-macl", "MACL fit of the variance function");
  s_macl->add_option("--input", macl.input, "CSV with id,y1,y2")->required();
  s_macl->add_option("--form", macl.form, "exp-linear | power | exp-linear-const");
  s_macl->add_option("--init", macl.init, "Starting values t1,t2[,t3]");
  s_macl->add_option("--tol", macl.tol);
  s_macl->add_option("--max-iter", macl.max_iter);
  s_macl->add_flag("--raw", macl.raw, "Inputs are raw intensities; take natural logs");

  FitMixtureArgs mix;
  auto* s_mix = app.add_subcommand("fit-mixture", "Mixture-model (NPMLE) fit by EM");
  s_mix->add_option("--input", mix.input)->required();
  s_mix->add_option("--form", mix.form);
  s_mix->add_option("--d", mix.d, "Grid spacing in standard deviations");
  s_mix->add_option("--a", mix.a);
  s_mix->add_option("--b", mix.b);
  s_mix->add_option("--tol", mix.tol);
  s_mix->add_option("--max-iter", mix.max_iter);
  s_mix->add_flag("--no-weights", mix.no_weights, "Omit support points and weights");
  s_mix->add_flag("--raw", mix.raw);

  CiArgs ci;
  auto* s_ci = app.add_subcommand("ci", "Confidence intervals for a mean or a difference");
  s_ci->add_option("--theta", ci.theta)->required();
  s_ci->add_option("--form", ci.form);
  s_ci->add_option("--y1", ci.y1);
  s_ci->add_option("--y2", ci.y2);
  s_ci->add_option("--input", ci.input, "Batch mode: CSV with id,y1,y2");
  s_ci->add_option("--alpha", ci.alpha);
  s_ci->add_option("--method", ci.method, "exact | naive | region | bonferroni");
  s_ci->add_option("--a", ci.a);
  s_ci->add_option("--b", ci.b);
  s_ci->add_option("--scale", ci.scale, "log | ratio");
  s_ci->add_option("--grid-res", ci.grid_res);
  s_ci->add_flag("--unbounded", ci.unbounded, "Exact method without the [a,b] restriction");
  s_ci->add_flag("--raw", ci.raw);

  PvalueArgs pv;
  auto* s_pv = app.add_subcommand("pvalue", "P-values for equal means within each pair");
  s_pv->add_option("--theta", pv.theta)->required();
  s_pv->add_option("--form", pv.form);
  s_pv->add_option("--input", pv.input)->required();
  s_pv->add_option("--method", pv.method, "naive | conservative | berger-boos");
  s_pv->add_option("--beta", pv.beta);
  s_pv->add_option("--a", pv.a);
  s_pv->add_option("--b", pv.b);
  s_pv->add_flag("--bonferroni", pv.bonferroni, "Flag p-values below level/N");
  s_pv->add_option("--level", pv.level);
  s_pv->add_option("--cbeta-pivot", pv.cbeta_pivot, "pair-mean | two-observation");
  s_pv->add_flag("--raw", pv.raw);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Bias, coverage and power studies");
  s_sim->add_option("--study", sim.study, "estimator | coverage | power")->required();
  s_sim->add_option("--config", sim.config, "key=value file")->required();

  BiasArgs bias;
  auto* s_bias = app.add_subcommand("bias-oracle", "Exact bias of the MACL estimating equations");
  s_bias->add_option("--theta", bias.theta)->required();
  s_bias->add_option("--mus", bias.mus, "Comma-separated true means");
  s_bias->add_option("--means", bias.means_file, "File with one mean per line");

  PipelineArgs pipe;
  auto* s_pipe = app.add_subcommand("pipeline", "Fit on control pairs, test experiment pairs");
  s_pipe->add_option("--control", pipe.control)->required();
  s_pipe->add_option("--experiment", pipe.experiment)->required();
  s_pipe->add_option("--config", pipe.config, "Optional key=value file");
  s_pipe->add_option("--form", pipe.form);
  s_pipe->add_option("--d", pipe.d);
  s_pipe->add_option("--a", pipe.a);
  s_pipe->add_option("--b", pipe.b);
  s_pipe->add_option("--alpha", pipe.alpha);
  s_pipe->add_option("--beta", pipe.beta);
  s_pipe->add_option("--level", pipe.level);
  s_pipe->add_option("--tol", pipe.tol);
  s_pipe->add_option("--max-iter", pipe.max_iter);
  s_pipe->add_option("--grid-res", pipe.grid_res);
  s_pipe->add_flag("--no-region", pipe.no_region, "Skip region intervals");
  s_pipe->add_option("--scale", pipe.scale);
  s_pipe->add_flag("--raw", pipe.raw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ctx.global.threads > 0) omp_set_num_threads(ctx.global.threads);
    CLI::App* sub = app.get_subcommands().front();
    ctx.manifest.subcommand = sub->get_name();
    ctx.manifest.seed = ctx.global.seed;
    ctx.manifest.version = library_version();
    const std::string name = sub->get_name();
    const bool fit_like = name == "fit-macl" || name == "fit-mixture" || name == "bias-oracle" ||
                          (name == "ci" && ci.input.empty());
    ctx.format = resolve_format(ctx.global.format, fit_like ? Format::Json : Format::Csv);

    if (name == "fit-macl") cmd_fit_macl(ctx, macl);
    else if (name == "fit-mixture") cmd_fit_mixture(ctx, mix);
    else if (name == "ci") cmd_ci(ctx, ci);
    else if (name == "pvalue") cmd_pvalue(ctx, pv);
    else if (name == "simulate") cmd_simulate(ctx, sim);
    else if (name == "bias-oracle") cmd_bias_oracle(ctx, bias);
    else if (name == "pipeline") cmd_pipeline(ctx, pipe);

    ctx.manifest.config.emplace_back("format", ctx.format == Format::Csv ? "csv" : "json");
    ctx.manifest.timestamp = utc_timestamp();
    const std::string manifest = ctx.manifest.to_json().dump(2) + "\n";
    if (!ctx.global.out.empty()) {
      write_text(ctx.global.out, ctx.body.str());
      write_text(ctx.global.out + ".manifest.json", manifest);
    } else {
      if (ctx.format == Format::Json) {
        Json rec;
        rec["manifest"] = ctx.manifest.to_json();
        out << rec.dump() << '\n';
      } else if (!ctx.global.quiet) {
        err << "manifest: " << ctx.manifest.to_json().dump() << '\n';
      }
      out << ctx.body.str();
    }
    out.flush();
    return kExitOk;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << " (residual " << e.residual() << ", best iterate";
    for (double t : e.best_iterate()) err << ' ' << t;
    err << ")\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace vfest::cli
