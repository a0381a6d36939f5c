#pragma once

#include "additive.hpp"
#include "branching.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "generators.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "product_htransform.hpp"
#include "stats.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lookdown {

struct ExperimentOutput {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  TestReport report;
  std::vector<std::pair<std::string, std::string>> files;  // CSV name, contents
};

struct Tolerances {
  double sigmas = 3.0;
  double ks_p = 0.01;
  double residual = 1e-8;
  double relative = 0.05;
  double asymptotic = 0.05;
  double closed_form = 1e-6;
};

struct RunContext {
  std::uint64_t seed = 0;
  std::size_t replicas = 0;
  unsigned workers = 1;
  Tolerances tol;

  // Independent master seed for the k-th sub-ensemble.
  std::uint64_t sub_seed(std::uint64_t k) const {
    Rng g = make_rng(seed, 1000003ULL + k);
    return g();
  }
};

// Shortest round-trip formatting, so CSV bytes depend only on the values.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void merge_report(TestReport& into, const TestReport& from) {
  into.estimates.insert(into.estimates.end(), from.estimates.begin(), from.estimates.end());
  into.verdicts.insert(into.verdicts.end(), from.verdicts.begin(), from.verdicts.end());
}

inline RunContext read_common(Obj& root, std::size_t default_replicas) {
  RunContext c;
  c.seed = root.seed("seed");
  const long reps = root.integer("replicas", static_cast<long>(default_replicas));
  root.require(reps >= 2, "replicas", "must be at least 2");
  c.replicas = static_cast<std::size_t>(std::max(reps, 2L));
  const long w = root.integer("workers", static_cast<long>(default_workers()));
  root.require(w >= 1, "workers", "must be at least 1");
  c.workers = static_cast<unsigned>(std::max(w, 1L));
  root.string("out", "");
  root.string("description", "");
  if (auto t = root.object("tolerances")) {
    c.tol.sigmas = t->number("sigmas", c.tol.sigmas);
    c.tol.ks_p = t->number("ks_p", c.tol.ks_p);
    c.tol.residual = t->number("residual", c.tol.residual);
    c.tol.relative = t->number("relative", c.tol.relative);
    c.tol.asymptotic = t->number("asymptotic", c.tol.asymptotic);
    c.tol.closed_form = t->number("closed_form", c.tol.closed_form);
    t->require(c.tol.sigmas > 0.0, "sigmas", "must be positive");
    t->require(c.tol.ks_p > 0.0 && c.tol.ks_p < 1.0, "ks_p", "must lie in (0,1)");
    t->finish();
  }
  return c;
}

inline LambdaSpec lambda_or(Obj& root, const std::string& key, std::optional<LambdaSpec> def) {
  if (auto o = root.object(key, !def.has_value())) return parse_lambda(*o);
  return def.value_or(LambdaSpec{});
}

inline InitialLaw initial_or(Obj& root, const InitialLaw& def) {
  if (auto o = root.object("initial")) return parse_initial(*o);
  return def;
}

inline MutationModel mutation_or_none(Obj& root) {
  if (auto o = root.object("mutation")) return parse_mutation(*o);
  return NoMutation{};
}

inline std::vector<double> sorted_times(Obj& root, const std::string& key, std::vector<double> def) {
  auto v = root.numbers(key, def);
  root.require(!v.empty(), key, "must not be empty");
  for (double t : v) root.require(t >= 0.0, key, "times must be nonnegative");
  std::sort(v.begin(), v.end());
  return v;
}

inline void require_alphabet_match(Obj& root, const MutationModel& m, const InitialLaw& R0) {
  if (const auto* fc = std::get_if<FiniteChain>(&m))
    root.require(fc->Q.size() == R0.alphabet(), "mutation", "rate matrix size must equal the alphabet size");
  root.require(!std::holds_alternative<BrownianMotion>(m), "mutation",
               "Brownian mutation needs the scalar type space of verify-additive");
}

inline void done(Obj& root, Issues& is) {
  root.finish();
  is.raise_if_any();
}

inline std::string estimates_csv(const TestReport& rep) {
  std::ostringstream os;
  os << "name,value,stderr\n";
  for (const auto& e : rep.estimates) os << '"' << e.name << "\"," << fmt(e.value) << ',' << fmt(e.stderr_) << '\n';
  return os.str();
}

// Candidate events on ordered pairs i < j, with the remaining levels marked
// independently at the event frequency; a candidate counts iff i and j are
// its two lowest marked levels, so each state-changing event is counted once.
inline std::vector<double> brute_force_event_rates(const LambdaSpec& spec, long N, double horizon,
                                                   std::size_t streams, std::uint64_t seed, unsigned workers) {
  if (spec.nu.kind == NuKind::Atoms) throw ConfigError("the independent rate generator supports Kingman and Beta specs");
  const double m2 = spec.nu.second_moment();
  const double per_pair = spec.c + m2;
  const double total = choose2(static_cast<double>(N)) * per_pair;
  return parallel_replicas(streams, workers, [&](std::size_t r) {
    Rng g = make_rng(seed, r);
    long count = 0;
    for (double t = exponential(g, total); t <= horizon; t += exponential(g, total)) {
      long i = uniform_int(g, 1, N), j = uniform_int(g, 1, N - 1);
      if (j >= i) ++j;
      if (i > j) std::swap(i, j);
      const bool kingman = bernoulli(g, spec.c / per_pair);
      const double y = kingman ? 0.0 : beta_draw(g, 2.0 - spec.nu.alpha, spec.nu.alpha);
      bool lowest = true;
      for (long k = 1; k < j && lowest && y > 0.0; ++k)
        if (k != i && bernoulli(g, y)) lowest = false;
      count += lowest;
    }
    return static_cast<double>(count) / horizon;
  });
}

// ---------------------------------------------------------------- rates

inline void run_rates(Obj& root, Issues& is, ExperimentOutput& out) {
  const LambdaSpec spec = lambda_or(root, "lambda", std::nullopt);
  const long imax = root.integer("imax", 20);
  root.require(imax >= 2, "imax", "must be at least 2");
  const long level = root.integer("asymptotic_level", 500);
  root.require(level >= 2, "asymptotic_level", "must be at least 2");
  long mcN = 0;
  double mc_horizon = 0.0;
  if (auto m = root.object("mc")) {
    mcN = m->integer("N", 50);
    mc_horizon = m->number("horizon", 10.0);
    m->require(mcN >= 2, "N", "must be at least 2");
    m->require(mc_horizon > 0.0, "horizon", "must be positive");
    m->finish();
  }
  const RunContext ctx = read_common(root, 200);
  done(root, is);
  out.seed = ctx.seed;
  TestReport& rep = out.report;

  std::vector<double> r(imax + 1, 0.0);
  std::ostringstream csv;
  csv << "i,r_i,increment\n";
  for (long i = 1; i <= imax; ++i) r[i] = pushing_rate(spec, i);
  bool increasing = r[1] == 0.0;
  double worst_increment = 0.0, worst_kingman = 0.0, worst_closed = 0.0;
  for (long i = 1; i <= imax; ++i) {
    const double inc = pushing_rate_increment(spec, i);
    csv << i << ',' << fmt(r[i]) << ',' << fmt(inc) << '\n';
    rep.add("r_" + std::to_string(i), r[i]);
    if (i < imax) {
      increasing = increasing && r[i + 1] > r[i];
      worst_increment = std::max(worst_increment, std::abs(r[i + 1] - r[i] - inc) / std::max(1.0, inc));
    }
    if (spec.nu.is_null())
      worst_kingman = std::max(worst_kingman, std::abs(r[i] - spec.c * choose2(static_cast<double>(i))));
    if (spec.nu.kind == NuKind::Beta) {
      const double closed = spec.c * static_cast<double>(i) + beta_increment_closed(spec.nu.alpha, i);
      worst_closed = std::max(worst_closed, std::abs(inc - closed) / closed);
    }
  }
  out.files.emplace_back("rates.csv", csv.str());
  rep.verdicts.push_back({"r_1 = 0 and r_i strictly increasing", increasing, 0.0, 0.0, "pushing-rates-increase"});
  rep.verdicts.push_back({"r_(i+1) - r_i matches the separately integrated increment", worst_increment <= ctx.tol.residual,
                          worst_increment, ctx.tol.residual, "pushing-rates-increase"});
  if (spec.nu.is_null())
    rep.verdicts.push_back({"Kingman rates equal c i(i-1)/2", worst_kingman <= 1e-9, worst_kingman, 1e-9,
                            "kingman-rates-count-pairs"});
  if (spec.nu.kind == NuKind::Beta) {
    rep.verdicts.push_back({"Beta increments match closed form", worst_closed <= ctx.tol.residual, worst_closed,
                            ctx.tol.residual, "beta-rate-increments-closed-form"});
    if (spec.c == 0.0) {
      const double rl = pushing_rate(spec, level);
      const double dev = std::abs(rl / beta_rate_asymptote(spec.nu.alpha, level) - 1.0);
      rep.add("r_" + std::to_string(level), rl);
      rep.add("relative deviation from Gamma(2-alpha) j^alpha / alpha", dev);
      rep.verdicts.push_back({"Beta asymptote at j=" + std::to_string(level), dev < ctx.tol.asymptotic, dev,
                              ctx.tol.asymptotic, "beta-rates-grow-like-j-to-alpha"});
    }
  }
  if (mcN > 0) {
    const auto rates = brute_force_event_rates(spec, mcN, mc_horizon, ctx.replicas, ctx.sub_seed(1), ctx.workers);
    const MCEstimate e = mc_estimate(rates);
    const double target = pushing_rate(spec, mcN);
    rep.add("simulated event rate N=" + std::to_string(mcN), e);
    rep.add("r_" + std::to_string(mcN), target);
    rep.verdicts.push_back(within_sigma("simulated state-changing rate vs r_N", e, target, ctx.tol.sigmas,
                                        "pushing-rate-is-event-rate-at-truncation"));
  }
}

// ---------------------------------------------------------------- gfv-simulate

inline void run_gfv_simulate(Obj& root, Issues& is, ExperimentOutput& out) {
  const LambdaSpec spec = lambda_or(root, "lambda", std::nullopt);
  const InitialLaw R0 = initial_or(root, InitialLaw::deterministic({0.5, 0.5}));
  const MutationModel mut = mutation_or_none(root);
  require_alphabet_match(root, mut, R0);
  const long N = root.integer("N", 100);
  const long K = root.integer("K", 0);
  const double horizon = root.number("horizon", 1.0);
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(horizon * i / 10.0);
  const auto times = sorted_times(root, "times", grid);
  root.require(N >= 2, "N", "must be at least 2");
  root.require(K >= 0 && K <= N && K <= static_cast<long>(R0.alphabet()), "K",
               "must satisfy 0 <= K <= min(N, alphabet size)");
  root.require(horizon > 0.0 && times.back() <= horizon, "horizon", "must be positive and cover the sample times");
  const RunContext ctx = read_common(root, 2);
  done(root, is);
  out.seed = ctx.seed;

  RecordOptions ro;
  ro.alphabet = R0.alphabet();
  ro.designated_K = K;
  const auto recs = parallel_replicas(ctx.replicas, ctx.workers, [&](std::size_t r) {
    Rng g = make_rng(ctx.seed, r);
    auto init = K > 0 ? init_product_h(K, R0, N, g) : init_exchangeable(R0, N, g);
    return run_gfv<Alphabet>(spec, mut, std::move(init), horizon, times, K, g, ro);
  });
  std::ostringstream csv;
  csv << "replica,time,L1,x1";
  if (K > 0) csv << ",L";
  for (std::size_t a = 1; a <= R0.alphabet(); ++a) csv << ",count_" << a;
  csv << '\n';
  for (std::size_t r = 0; r < recs.size(); ++r)
    for (const auto& s : recs[r].snaps) {
      csv << r << ',' << fmt(s.time) << ',' << s.L1 << ',' << s.x1;
      if (K > 0) csv << ',' << s.L;
      for (std::size_t a = 1; a < s.counts.size(); ++a) csv << ',' << s.counts[a];
      csv << '\n';
    }
  out.files.emplace_back("trajectory.csv", csv.str());
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> f;
    for (const auto& rec : recs) f.push_back(rec.snaps[k].freq(1));
    out.report.add("R{1} at t=" + fmt(times[k]), mc_estimate(f));
  }
}

// ---------------------------------------------------------------- verify-product-h

inline void run_verify_product_h(Obj& root, Issues& is, ExperimentOutput& out) {
  const LambdaSpec spec = lambda_or(root, "lambda", std::nullopt);
  const InitialLaw R0 = initial_or(root, InitialLaw::deterministic({0.5, 0.5}));
  const long K = root.integer("K", 2);
  const long N = root.integer("N", 100);
  const auto times = sorted_times(root, "times", {0.25, 0.5, 1.0});
  const double s = root.number("s", 0.5);
  root.require(K >= 1 && K <= static_cast<long>(R0.alphabet()) && K <= N, "K", "must satisfy 1 <= K <= min(N, alphabet size)");
  root.require(s >= 0.0, "s", "must be nonnegative");
  const bool do_martingale = root.boolean("martingale", true);
  const bool do_equality = root.boolean("equality", true);
  std::vector<double> co_times;
  long co_N = 0;
  if (auto c = root.object("coexistence")) {
    co_times = sorted_times(*c, "times", {0.5, 1.0, 2.0});
    co_N = c->integer("N", N);
    c->require(co_N > K, "N", "must exceed K");
    c->finish();
  }
  const RunContext ctx = read_common(root, 10000);
  done(root, is);
  out.seed = ctx.seed;

  HtransformOptions opt;
  opt.replicas = ctx.replicas;
  opt.N = N;
  opt.workers = ctx.workers;
  opt.sigmas = ctx.tol.sigmas;
  opt.seed = ctx.sub_seed(1);
  if (do_martingale) merge_report(out.report, martingale_check(spec, K, R0, times, opt));
  opt.seed = ctx.sub_seed(2);
  if (do_equality) merge_report(out.report, verify_htransform_equality(spec, K, R0, s, product_test_family(), opt));
  if (co_N > 0) {
    opt.seed = ctx.sub_seed(3);
    opt.N = co_N;
    std::vector<CoexistenceRow> rows;
    merge_report(out.report, coexistence_decay(spec, K, co_times, opt, &rows));
    std::ostringstream csv;
    csv << "t,N,pK,pK_se,pK1,pK1_se,ratio,ratio_se,envelope_shape,exact_stay,coupling_violations\n";
    for (const auto& r : rows)
      csv << fmt(r.t) << ',' << r.N << ',' << fmt(r.pK.mean) << ',' << fmt(r.pK.stderr_) << ',' << fmt(r.pK1.mean)
          << ',' << fmt(r.pK1.stderr_) << ',' << fmt(r.ratio.mean) << ',' << fmt(r.ratio.stderr_) << ','
          << fmt(r.envelope_shape) << ',' << fmt(r.exact_stay) << ',' << r.coupling_violations << '\n';
    out.files.emplace_back("coexistence.csv", csv.str());
  }
  out.files.emplace_back("estimates.csv", estimates_csv(out.report));
}

// ---------------------------------------------------------------- verify-conditioning

inline void run_verify_conditioning(Obj& root, Issues& is, ExperimentOutput& out) {
  const LambdaSpec spec = lambda_or(root, "lambda", std::nullopt);
  const InitialLaw R0 = initial_or(root, InitialLaw::deterministic({0.5, 0.5}));
  const long K = root.integer("K", 2);
  const long N = root.integer("N", 100);
  const double s = root.number("s", 0.5);
  const auto ts = sorted_times(root, "t", {1.0, 2.0, 4.0});
  const double floor = root.number("acceptance_floor", 1e-4);
  const long ref_reps = root.integer("reference_replicas", 0);
  root.require(K >= 1 && K <= static_cast<long>(R0.alphabet()) && K <= N, "K", "must satisfy 1 <= K <= min(N, alphabet size)");
  root.require(s >= 0.0 && s <= ts.front(), "s", "must lie in [0, min t]");
  root.require(floor > 0.0 && floor < 1.0, "acceptance_floor", "must lie in (0,1)");
  root.require(ref_reps == 0 || ref_reps >= 2, "reference_replicas", "must be at least 2");
  const RunContext ctx = read_common(root, 2000);
  done(root, is);
  out.seed = ctx.seed;

  HtransformOptions opt;
  opt.N = N;
  opt.workers = ctx.workers;
  opt.sigmas = ctx.tol.sigmas;
  opt.replicas = ref_reps > 0 ? static_cast<std::size_t>(ref_reps) : ctx.replicas;
  opt.seed = ctx.sub_seed(0);
  const auto ref = restricted_marginal(spec, K, R0, s, opt);
  TestReport& rep = out.report;
  rep.add("restricted R_s{1}", mc_estimate(ref));
  const std::string st = "conditioned-law-converges-to-product-h-transform";
  std::ostringstream csv;
  csv << "t,ks_D,ks_p,acceptance,mean\n";
  std::vector<double> D;
  std::vector<double> band;
  opt.replicas = ctx.replicas;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    opt.seed = ctx.sub_seed(1 + i);
    const std::string tag = "t=" + fmt(ts[i]);
    ConditionedEnsemble ens;
    try {
      ens = conditioned_ensemble(spec, K, R0, ts[i], s, opt, floor);
    } catch (const InfeasibleConditioning& e) {
      rep.verdicts.push_back({std::string("conditioning feasible at ") + tag, false, 0.0, floor, st});
      return;
    }
    const KsResult ks = two_sample_ks(ens.values, ref);
    const double n1 = static_cast<double>(ens.values.size()), n2 = static_cast<double>(ref.size());
    D.push_back(ks.statistic);
    // 5% critical value of the two-sample KS statistic
    band.push_back(1.358 * std::sqrt((n1 + n2) / (n1 * n2)));
    rep.add("conditioned R_s{1} " + tag, mc_estimate(ens.values));
    rep.add("KS distance " + tag, ks.statistic);
    rep.add("KS p-value " + tag, ks.p_value);
    rep.add("acceptance " + tag, ens.acceptance);
    csv << fmt(ts[i]) << ',' << fmt(ks.statistic) << ',' << fmt(ks.p_value) << ',' << fmt(ens.acceptance) << ','
        << fmt(mc_estimate(ens.values).mean) << '\n';
    if (i + 1 == ts.size())
      rep.verdicts.push_back({"KS p-value at largest t", ks.p_value > ctx.tol.ks_p, ks.p_value, ctx.tol.ks_p, st});
  }
  for (std::size_t i = 1; i < D.size(); ++i) {
    const double excess = D[i] - D[i - 1];
    rep.verdicts.push_back({"KS distance nonincreasing from t=" + fmt(ts[i - 1]) + " to t=" + fmt(ts[i]),
                            excess <= band[i], excess, band[i], st});
  }
  out.files.emplace_back("conditioning.csv", csv.str());
}

// ---------------------------------------------------------------- verify-generators

inline WfKind parse_wf_kind(Obj& o, const std::string& key) {
  const std::string k = o.string(key);
  if (k == "G") return WfKind::PlainG;
  if (k == "G0+G1") return WfKind::G0G1;
  if (k == "I0+I1") return WfKind::I0I1;
  o.issues().add(o.key_path(key), "expected one of G, G0+G1, I0+I1");
  return WfKind::PlainG;
}

inline const char* wf_name(WfKind k) {
  switch (k) {
    case WfKind::PlainG:
      return "G";
    case WfKind::G0G1:
      return "G0+G1";
    case WfKind::I0I1:
      return "I0+I1";
  }
  return "?";
}

inline std::optional<TestFn> find_poly(const std::string& id) {
  for (auto& f : default_poly_family())
    if (f.id == id) return f;
  return std::nullopt;
}

struct ConsistencyCase {
  WfKind kind;
  TestFn f;
  double x;
};

inline void run_verify_generators(Obj& root, Issues& is, ExperimentOutput& out) {
  const LambdaSpec spec = lambda_or(root, "lambda", std::nullopt);
  const auto grid = root.numbers("grid", interior_grid());
  for (double x : grid) root.require(x > 0.0 && x < 1.0, "grid", "points must lie in (0,1)");
  const double t = root.number("t", 1.0);

  const LambdaSpec kingman1{1.0, NuSpec::none()};
  bool consistency = false;
  LambdaSpec sde_spec = kingman1;
  double dt = 1e-3;
  std::vector<double> deltas{0.04, 0.02, 0.01};
  long samples = 400000;
  std::vector<ConsistencyCase> cases;
  if (auto c = root.object("consistency")) {
    consistency = true;
    sde_spec = lambda_or(*c, "lambda", kingman1);
    dt = c->number("dt", dt);
    deltas = c->numbers("deltas", deltas);
    samples = c->integer("samples", samples);
    c->require(dt > 0.0, "dt", "must be positive");
    c->require(deltas.size() >= 2, "deltas", "needs at least two values");
    c->require(samples >= 2, "samples", "must be at least 2");
    c->require(sde_spec.nu.kind != NuKind::Beta, "lambda", "the diffusion simulator needs atoms or a pure Kingman part");
    cases = {{WfKind::PlainG, *find_poly("x(1-x)"), 0.5},
             {WfKind::I0I1, *find_poly("x"), 0.5},
             {WfKind::G0G1, *find_poly("one"), 0.5}};
    if (auto list = c->objects("cases")) {
      cases.clear();
      for (auto& o : *list) {
        const WfKind kind = parse_wf_kind(o, "operator");
        const std::string id = o.string("f");
        const double x = o.number("x");
        o.require(x > 0.0 && x < 1.0, "x", "must lie in (0,1)");
        const auto f = find_poly(id);
        if (!f) o.issues().add(o.key_path("f"), "unknown test function '" + id + "'");
        o.finish();
        if (f) cases.push_back({kind, *f, x});
      }
    }
    c->finish();
  }
  bool cross = false;
  LambdaSpec cross_spec = kingman1;
  double cx0 = 0.5, ct = 0.5, cdt = 1e-3;
  long cN = 200, csamples = 10000;
  if (auto c = root.object("cross_check")) {
    cross = true;
    cross_spec = lambda_or(*c, "lambda", kingman1);
    cx0 = c->number("x0", cx0);
    ct = c->number("t", ct);
    cdt = c->number("dt", cdt);
    cN = c->integer("N", cN);
    csamples = c->integer("samples", csamples);
    c->require(cx0 > 0.0 && cx0 < 1.0, "x0", "must lie in (0,1)");
    c->require(ct > 0.0, "t", "must be positive");
    c->require(cN >= 3, "N", "must be at least 3");
    c->require(csamples >= 2, "samples", "must be at least 2");
    c->require(cross_spec.nu.kind != NuKind::Beta, "lambda", "the diffusion simulator needs atoms or a pure Kingman part");
    c->finish();
  }
  const RunContext ctx = read_common(root, 2);
  done(root, is);
  out.seed = ctx.seed;
  TestReport& rep = out.report;

  std::ostringstream csv;
  csv << "f,x,Gh_K2,G0_plus_G1,Gh_K1,I0_plus_I1\n";
  double worst2 = 0.0, worst1 = 0.0;
  for (const auto& f : default_poly_family())
    for (double x : grid) {
      const double gh2 = apply_Gh_via_H(f, x, t, 2, spec), g01 = apply_G0_G1(f, x, spec).sum();
      const double gh1 = apply_Gh_via_H(f, x, t, 1, spec), i01 = apply_I0_I1(f, x, spec).sum();
      worst2 = std::max(worst2, std::abs(gh2 - g01));
      worst1 = std::max(worst1, std::abs(gh1 - i01));
      csv << '"' << f.id << "\"," << fmt(x) << ',' << fmt(gh2) << ',' << fmt(g01) << ',' << fmt(gh1) << ','
          << fmt(i01) << '\n';
    }
  out.files.emplace_back("generators.csv", csv.str());
  rep.add("max |Gh f - (G0+G1) f|, K=2", worst2);
  rep.add("max |Gh f - (I0+I1) f|, K=1", worst1);
  rep.verdicts.push_back({"K=2 h-generator equals G0+G1", worst2 < ctx.tol.residual, worst2, ctx.tol.residual,
                          "h-generator-splits-into-immigration-and-reproduction"});
  rep.verdicts.push_back({"K=1 h-generator equals I0+I1", worst1 < ctx.tol.residual, worst1, ctx.tol.residual,
                          "h-generator-splits-into-immigration-and-reproduction"});

  for (std::size_t ci = 0; consistency && ci < cases.size(); ++ci) {
    const auto& cs = cases[ci];
    std::size_t di = 0;
    const auto sampler = [&](double delta) {
      const double mean = wf_linear_mean(cs.kind, sde_spec, cs.x, delta);
      // for linear f the control variate would replace the simulation by the closed-form mean
      const double slope = cs.f.p.degree() >= 2 ? cs.f.jet(cs.x).d1 : 0.0;
      const std::uint64_t seed = ctx.sub_seed(100 + 16 * ci + di++);
      const auto vals = parallel_replicas(static_cast<std::size_t>(samples), ctx.workers, [&](std::size_t r) {
        Rng g = make_rng(seed, r);
        const double x = simulate_wf_immigration(cs.kind, sde_spec, cs.x, {delta}, dt, g)[0];
        // control variate with the exact linear mean
        return cs.f(x) - cs.f(cs.x) - slope * (x - mean);
      });
      return mc_estimate(vals);
    };
    const double target = apply_wf_kind(cs.kind, cs.f, cs.x, sde_spec);
    TestReport g = generator_consistency(sampler, target, deltas, ctx.tol.relative, "simulators-match-their-generators");
    const std::string tag = std::string(wf_name(cs.kind)) + " f=" + cs.f.id + " x=" + fmt(cs.x);
    for (auto& e : g.estimates) e.name = tag + " " + e.name;
    for (auto& v : g.verdicts) v.check = tag + " " + v.check;
    merge_report(rep, g);
  }

  if (cross) {
    HtransformOptions opt;
    opt.N = cN;
    opt.replicas = static_cast<std::size_t>(csamples);
    opt.workers = ctx.workers;
    opt.seed = ctx.sub_seed(1);
    const InitialLaw R0 = InitialLaw::deterministic({cx0, 1.0 - cx0});
    const auto engine = restricted_marginal(cross_spec, 2, R0, ct, opt);
    const std::uint64_t seed = ctx.sub_seed(2);
    const auto sde = parallel_replicas(static_cast<std::size_t>(csamples), ctx.workers, [&](std::size_t r) {
      Rng g = make_rng(seed, r);
      const double x = simulate_wf_immigration(WfKind::G0G1, cross_spec, cx0, {ct}, cdt, g)[0];
      // levels 3..N are iid given the limiting frequency
      return static_cast<double>(1 + binomial_draw(g, cN - 2, x)) / static_cast<double>(cN);
    });
    const KsResult ks = two_sample_ks(sde, engine);
    rep.add("restricted engine R{1}", mc_estimate(engine));
    rep.add("G0+G1 diffusion mapped to N levels", mc_estimate(sde));
    rep.add("cross-simulator KS distance", ks.statistic);
    rep.verdicts.push_back({"G0+G1 diffusion vs restricted lookdown KS p", ks.p_value > ctx.tol.ks_p, ks.p_value,
                            ctx.tol.ks_p, "immigration-diffusion-is-restricted-first-frequency"});
  }
}

// ---------------------------------------------------------------- verify-intertwining

inline void run_verify_intertwining(Obj& root, Issues& is, ExperimentOutput& out) {
  const double c = root.number("c", 1.0);
  root.require(c > 0.0, "c", "must be positive");
  const auto grid = root.numbers("grid", interior_grid());
  for (double x : grid) root.require(x > 0.0 && x < 1.0, "grid", "points must lie in (0,1)");
  const RunContext ctx = read_common(root, 2);
  done(root, is);
  out.seed = ctx.seed;

  std::ostringstream csv;
  csv << "f,x,khat_ghat,wf_generator_of_khat,residual\n";
  double worst = 0.0;
  for (const auto& f : default_two_var_family())
    for (double x : grid) {
      const double lhs = khat_ghat(f, x, c);
      const double rhs = 0.5 * c * x * (1.0 - x) * khat_jet(f, x).d2;
      const double res = intertwining_residual(f, x, c);
      worst = std::max(worst, res);
      csv << '"' << f.id << "\"," << fmt(x) << ',' << fmt(lhs) << ',' << fmt(rhs) << ',' << fmt(res) << '\n';
    }
  out.files.emplace_back("intertwining.csv", csv.str());
  out.report.add("max intertwining residual", worst);
  out.report.verdicts.push_back({"max residual of Khat Ghat f - G Khat f", worst < ctx.tol.residual, worst,
                                 ctx.tol.residual, "kernel-intertwines-generators"});
}

// ---------------------------------------------------------------- verify-decomposition

inline void run_verify_decomposition(Obj& root, Issues& is, ExperimentOutput& out) {
  const double c = root.number("c", 1.0);
  const double x0 = root.number("x0", 0.5);
  const double t = root.number("t", 0.5);
  const long N = root.integer("N", 200);
  const double dt = root.number("dt", 1e-3);
  const auto edges = root.numbers("band_edges", std::vector<double>{1, 2, 3, 5});
  root.require(c > 0.0, "c", "must be positive");
  root.require(x0 > 0.0 && x0 < 1.0, "x0", "must lie in (0,1)");
  root.require(t > 0.0, "t", "must be positive");
  root.require(N >= 2, "N", "must be at least 2");
  root.require(dt > 0.0, "dt", "must be positive");
  root.require(!edges.empty() && edges.front() == 1.0 && std::is_sorted(edges.begin(), edges.end()), "band_edges",
               "must be increasing and start at 1");
  const RunContext ctx = read_common(root, 10000);
  done(root, is);
  out.seed = ctx.seed;

  struct Pt {
    double freq;
    long level;  // -1: no type-1 particle among the first N levels
  };
  const LambdaSpec spec{c, NuSpec::none()};
  const InitialLaw R0 = InitialLaw::deterministic({x0, 1.0 - x0});
  RecordOptions ro;
  ro.alphabet = 2;
  const std::uint64_t s1 = ctx.sub_seed(1), s2 = ctx.sub_seed(2);
  const auto engine = parallel_replicas(ctx.replicas, ctx.workers, [&](std::size_t r) {
    Rng g = make_rng(s1, r);
    const auto snap = run_gfv<Alphabet>(spec, NoMutation{}, init_exchangeable(R0, N, g), t, {t}, 0, g, ro).snaps[0];
    return Pt{snap.freq(1), snap.L1 == kOverCap ? -1 : snap.L1};
  });
  const auto decomp = parallel_replicas(ctx.replicas, ctx.workers, [&](std::size_t r) {
    Rng g = make_rng(s2, r);
    const auto d = pathwise_decomposition_sim(c, x0, t, dt, g, N);
    if (d.L1 < 0 || d.L1 > N) return Pt{0.0, -1};
    // level L1 carries type 1; levels above it are iid given R
    return Pt{static_cast<double>(1 + binomial_draw(g, N - d.L1, d.R)) / static_cast<double>(N), d.L1};
  });
  const auto band_of = [&](long level) {
    if (level < 0) return edges.size() - 1;
    std::size_t b = 0;
    while (b + 1 < edges.size() && static_cast<double>(level) >= edges[b + 1]) ++b;
    return b;
  };
  TestReport& rep = out.report;
  const std::string st = "first-level-decomposition-matches-lookdown";
  std::ostringstream csv;
  csv << "band,n_engine,n_decomposition,ks_D,ks_p,mean_engine,mean_decomposition\n";
  for (std::size_t b = 0; b < edges.size(); ++b) {
    std::vector<double> a, d;
    for (const auto& p : engine)
      if (band_of(p.level) == b) a.push_back(p.freq);
    for (const auto& p : decomp)
      if (band_of(p.level) == b) d.push_back(p.freq);
    const std::string tag = "L1 in [" + fmt(edges[b]) + "," + (b + 1 < edges.size() ? fmt(edges[b + 1]) : "inf") + ")";
    const double n = static_cast<double>(ctx.replicas);
    const double pa = a.size() / n, pd = d.size() / n;
    const MCEstimate ea{pa, std::sqrt(pa * (1 - pa) / n), ctx.replicas}, ed{pd, std::sqrt(pd * (1 - pd) / n), ctx.replicas};
    rep.add("P(" + tag + ") engine", ea);
    rep.add("P(" + tag + ") decomposition", ed);
    rep.verdicts.push_back(within_sigma("band probability " + tag, ea, ed, ctx.tol.sigmas, st));
    if (a.size() < 20 || d.size() < 20) {
      csv << '"' << tag << "\"," << a.size() << ',' << d.size() << ",nan,nan,nan,nan\n";
      continue;
    }
    const KsResult ks = two_sample_ks(a, d);
    const double ma = mc_estimate(a).mean, md = mc_estimate(d).mean;
    rep.add("KS distance " + tag, ks.statistic);
    rep.verdicts.push_back({"R_t KS p-value " + tag, ks.p_value > ctx.tol.ks_p, ks.p_value, ctx.tol.ks_p, st});
    csv << '"' << tag << "\"," << a.size() << ',' << d.size() << ',' << fmt(ks.statistic) << ',' << fmt(ks.p_value)
        << ',' << fmt(ma) << ',' << fmt(md) << '\n';
  }
  out.files.emplace_back("decomposition.csv", csv.str());
}

// ---------------------------------------------------------------- verify-cbi

// u(lambda, t) for psi(l) = sigma2 l^2 / 2 + beta l.
inline double feller_u(const BranchingMechanism& bm, double lambda, double t) {
  if (bm.beta == 0.0) return lambda / (1.0 + 0.5 * bm.sigma2 * lambda * t);
  const double e = std::exp(-bm.beta * t);
  return lambda * e / (1.0 + 0.5 * bm.sigma2 * lambda * -std::expm1(-bm.beta * t) / bm.beta);
}

inline BranchingMechanism branching_required(Obj& root) {
  if (auto o = root.object("branching", true)) return parse_branching(*o);
  return {};
}

inline void run_verify_cbi(Obj& root, Issues& is, ExperimentOutput& out) {
  const BranchingMechanism bm = branching_required(root);
  const double x0 = root.number("x0", 1.0);
  const double t = root.number("t", 1.0);
  const auto lambdas = root.numbers("lambdas", std::vector<double>{0.5, 1.0, 2.0});
  const auto horizons = root.numbers("horizons", std::vector<double>{0.5, 1.0, 2.0});
  const auto flow = root.pairs("flow", std::vector<Atom>{{0.3, 0.7}, {1.0, 1.0}});
  const double step = root.number("step", 0.0);
  const double dt = root.number("dt", 1e-3);
  const bool simulate = root.boolean("simulate", true);
  root.require(x0 > 0.0, "x0", "must be positive");
  root.require(t > 0.0, "t", "must be positive");
  root.require(step >= 0.0, "step", "must be nonnegative (0 picks the default)");
  root.require(dt > 0.0, "dt", "must be positive");
  for (double l : lambdas) root.require(l > 0.0, "lambdas", "must be positive");
  for (double h : horizons) root.require(h > 0.0, "horizons", "must be positive");
  for (const auto& f : flow) root.require(f.x > 0.0 && f.w > 0.0, "flow", "times must be positive");
  const RunContext ctx = read_common(root, 10000);
  done(root, is);
  out.seed = ctx.seed;
  TestReport& rep = out.report;
  const auto h_of = [&](double T) { return step > 0.0 ? step : default_ode_step(T); };
  const bool closed = bm.nuY.empty();
  const std::string st = "cumulant-equation-solved";

  std::ostringstream csv;
  csv << "lambda,T,u,closed_form,max_residual\n";
  double worst_res = 0.0, worst_closed = 0.0;
  for (double l : lambdas)
    for (double T : horizons) {
      const CumulantSolution sol = solve_u(bm, l, T, h_of(T), ctx.tol.residual);
      worst_res = std::max(worst_res, sol.max_residual);
      const double cf = closed ? feller_u(bm, l, T) : NAN;
      if (closed) worst_closed = std::max(worst_closed, std::abs(sol.final() - cf));
      csv << fmt(l) << ',' << fmt(T) << ',' << fmt(sol.final()) << ',' << fmt(cf) << ',' << fmt(sol.max_residual) << '\n';
    }
  out.files.emplace_back("cumulant.csv", csv.str());
  rep.add("max solver residual", worst_res);
  rep.verdicts.push_back({"solver residual on all nodes", worst_res < ctx.tol.residual, worst_res, ctx.tol.residual, st});
  if (closed) {
    rep.add("max deviation from closed form", worst_closed);
    rep.verdicts.push_back({"u matches the closed form", worst_closed < ctx.tol.closed_form, worst_closed,
                            ctx.tol.closed_form, st});
  }
  double worst_flow = 0.0;
  for (double l : lambdas)
    for (const auto& f : flow) {
      const double direct = solve_u(bm, l, f.x + f.w, h_of(f.x + f.w)).final();
      const double inner = solve_u(bm, l, f.w, h_of(f.w)).final();
      const double composed = solve_u(bm, inner, f.x, h_of(f.x)).final();
      worst_flow = std::max(worst_flow, std::abs(direct - composed));
    }
  rep.add("max flow defect", worst_flow);
  rep.verdicts.push_back({"u(l, s+t) = u(u(l, t), s)", worst_flow < ctx.tol.residual, worst_flow, ctx.tol.residual, st});

  const SubordinatorExponent phi = phi_tilde(bm);
  if (closed && bm.beta == 0.0) {
    double worst = 0.0;
    for (double l : lambdas) {
      const double a = 1.0 + 0.5 * bm.sigma2 * l * t;
      const double exact = std::exp(-x0 * l / a) * std::pow(a, -2.0);
      worst = std::max(worst, std::abs(cbi_laplace(x0, l, t, bm, phi) - exact));
    }
    rep.add("max analytic CBI Laplace deviation from Feller formula", worst);
    rep.verdicts.push_back({"analytic CBI Laplace matches Feller formula", worst < ctx.tol.closed_form, worst,
                            ctx.tol.closed_form, "size-biased-cb-is-cbi-with-phi-tilde"});
  }
  BranchingRunOptions bo;
  bo.seed = ctx.sub_seed(1);
  bo.replicas = ctx.replicas;
  bo.dt = dt;
  bo.workers = ctx.workers;
  bo.sigmas = ctx.tol.sigmas;
  if (simulate) merge_report(rep, size_bias_check(bm, x0, t, lambdas, bo));
  out.files.emplace_back("estimates.csv", estimates_csv(rep));
}

// ---------------------------------------------------------------- verify-tagged-jumps

inline void run_verify_tagged(Obj& root, Issues& is, ExperimentOutput& out) {
  const BranchingMechanism bm = branching_required(root);
  const double x0 = root.number("x0", 1.0);
  const double t = root.number("t", 1.0);
  const auto lambdas = root.numbers("lambdas", std::vector<double>{0.5, 1.0, 2.0});
  const double dt = root.number("dt", 1e-3);
  root.require(x0 > 0.0, "x0", "must be positive");
  root.require(t > 0.0, "t", "must be positive");
  root.require(dt > 0.0, "dt", "must be positive");
  for (double l : lambdas) root.require(l > 0.0, "lambdas", "must be positive");
  const RunContext ctx = read_common(root, 10000);
  done(root, is);
  out.seed = ctx.seed;

  BranchingRunOptions bo;
  bo.seed = ctx.sub_seed(1);
  bo.replicas = ctx.replicas;
  bo.dt = dt;
  bo.workers = ctx.workers;
  bo.sigmas = ctx.tol.sigmas;
  merge_report(out.report, tagged_jump_test(bm, x0, t, lambdas, bo));
  Rng g = make_rng(bo.seed, 0);
  std::ostringstream csv;
  write_mass_path_csv(csv, simulate_cbi(bm, x0, t, dt, g));
  out.files.emplace_back("cbi_path.csv", csv.str());
}

// ---------------------------------------------------------------- verify-additive

template <class Symbol>
void additive_checks(const AdditiveConfig& cfg, const std::vector<double>& times, double t,
                     const std::vector<MeasureFunctional<Symbol>>& family, const RunContext& ctx, TestReport& rep) {
  AdditiveOptions opt;
  opt.replicas = ctx.replicas;
  opt.workers = ctx.workers;
  opt.sigmas = ctx.tol.sigmas;
  opt.seed = ctx.sub_seed(1);
  merge_report(rep, additive_martingale_check<Symbol>(cfg, times, opt));
  opt.seed = ctx.sub_seed(2);
  merge_report(rep, verify_additive_equality<Symbol>(cfg, family, t, opt));
}

inline void run_verify_additive(Obj& root, Issues& is, ExperimentOutput& out) {
  AdditiveConfig cfg;
  const bool cb = root.has("branching");
  if (cb) {
    cfg.cb = branching_required(root);
    cfg.x0 = root.number("x0", 1.0);
    root.require(cfg.x0 > 0.0, "x0", "must be positive");
    cfg.dt = root.number("dt", 1e-3);
    root.require(cfg.dt > 0.0, "dt", "must be positive");
  } else {
    cfg.spec = lambda_or(root, "lambda", std::nullopt);
  }
  cfg.mutation = mutation_or_none(root);
  const bool scalar = std::holds_alternative<BrownianMotion>(cfg.mutation);
  if (scalar) {
    if (auto g = root.object("gaussian")) {
      cfg.gauss.mean = g->number("mean", 0.0);
      cfg.gauss.sd = g->number("sd", 1.0);
      g->require(cfg.gauss.sd > 0.0, "sd", "must be positive");
      g->finish();
    }
  } else {
    cfg.R0 = initial_or(root, InitialLaw::deterministic({0.5, 0.5}));
    if (const auto* fc = std::get_if<FiniteChain>(&cfg.mutation))
      root.require(fc->Q.size() == cfg.R0.alphabet(), "mutation", "rate matrix size must equal the alphabet size");
  }
  if (auto h = root.object("h")) cfg.h = parse_harmonic(*h, cfg.mutation);
  cfg.N = root.integer("N", 100);
  root.require(cfg.N >= 2, "N", "must be at least 2");
  const auto times = sorted_times(root, "times", {0.5, 1.0});
  const double t = root.number("t", 0.5);
  root.require(t > 0.0, "t", "must be positive");
  checked(is, "h", [&] {
    cfg.h.check_time(std::max(times.back(), t));
    if (scalar)
      expected_initial_h<double>(cfg);
    else
      expected_initial_h<Alphabet>(cfg);
  });
  const RunContext ctx = read_common(root, 10000);
  done(root, is);
  out.seed = ctx.seed;
  TestReport& rep = out.report;

  if (scalar) {
    std::vector<MeasureFunctional<double>> fam;
    fam.push_back({"Z(1)", [](const Snapshot<double>& s, long) { return s.Y; }});
    fam.push_back({"exp(-Z(1))", [](const Snapshot<double>& s, long) { return std::exp(-s.Y); }});
    fam.push_back({"Z(x>0)", [](const Snapshot<double>& s, long N) {
                     long k = 0;
                     for (double x : s.types) k += x > 0.0;
                     return s.Y * static_cast<double>(k) / static_cast<double>(N);
                   }});
    additive_checks<double>(cfg, times, t, fam, ctx, rep);
    return;
  }
  additive_checks<Alphabet>(cfg, times, t, additive_test_family(cfg.R0.alphabet()), ctx, rep);
  AdditiveOptions opt;
  opt.replicas = ctx.replicas;
  opt.workers = ctx.workers;
  opt.sigmas = ctx.tol.sigmas;
  opt.seed = ctx.sub_seed(3);
  merge_report(rep, first_level_bias_check(cfg, t, opt));
  if (cb) {
    opt.seed = ctx.sub_seed(4);
    const auto built = additive_ensemble<Alphabet>(cfg, true, {t}, opt, 0);
    long nonpositive = 0;
    Accumulator lap;
    for (const auto& r : built) {
      nonpositive += !(r.snaps[0].Y > 0.0);
      lap.add(std::exp(-r.snaps[0].Y));
    }
    rep.add("built runs with Y_t <= 0", static_cast<double>(nonpositive));
    rep.verdicts.push_back({"built mass never absorbed", nonpositive == 0, static_cast<double>(nonpositive), 0.0,
                            "size-biased-mass-is-cbi"});
    if (cfg.h.trivial()) {
      const double target = cbi_laplace(cfg.x0, 1.0, t, *cfg.cb, phi_tilde(*cfg.cb));
      rep.add("built E[exp(-Z_t(1))]", lap.estimate());
      rep.add("analytic CBI Laplace at 1", target);
      rep.verdicts.push_back(within_sigma("built mass Laplace vs analytic CBI", lap.estimate(), target,
                                          ctx.tol.sigmas, "size-biased-mass-is-cbi"));
    }
  }
  out.files.emplace_back("estimates.csv", estimates_csv(rep));
}

}  // namespace detail

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> statements;
  std::function<void(Obj&, Issues&, ExperimentOutput&)> run;
};

inline const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> list{
      {"rates", "pushing-rate table, closed forms, Beta asymptote, simulated event rate",
       {"pushing-rates-increase", "kingman-rates-count-pairs", "beta-rate-increments-closed-form",
        "beta-rates-grow-like-j-to-alpha", "pushing-rate-is-event-rate-at-truncation"},
       detail::run_rates},
      {"gfv-simulate", "lookdown trajectories (optionally restricted) as CSV", {}, detail::run_gfv_simulate},
      {"verify-product-h", "product weights are martingales; restricted lookdown is their h-transform",
       {"weights-are-mean-one-martingales", "M-is-projection-of-Q", "restricted-lookdown-is-product-h-transform",
        "persistence-orders-first-appearance"},
       detail::run_verify_product_h},
      {"verify-conditioning", "conditioning on coexistence converges to the product h-transform",
       {"conditioned-law-converges-to-product-h-transform"},
       detail::run_verify_conditioning},
      {"verify-generators", "h-generator decompositions, simulator consistency, cross-simulator agreement",
       {"h-generator-splits-into-immigration-and-reproduction", "simulators-match-their-generators",
        "immigration-diffusion-is-restricted-first-frequency"},
       detail::run_verify_generators},
      {"verify-intertwining", "kernel intertwining of the two-variable and Wright-Fisher generators",
       {"kernel-intertwines-generators"},
       detail::run_verify_intertwining},
      {"verify-decomposition", "three-stage construction of (R_t, L1_t) against the lookdown engine",
       {"first-level-decomposition-matches-lookdown"},
       detail::run_verify_decomposition},
      {"verify-additive", "additive h-transform construction, its weights and the first-level bias",
       {"additive-weights-are-mean-one-martingales", "T-is-projection-of-S", "additive-construction-is-h-transform",
        "first-level-is-h-biased-sample", "higher-levels-are-exchangeable", "size-biased-mass-is-cbi"},
       detail::run_verify_additive},
      {"verify-cbi", "cumulant equation and the size-biased CB as a CBI",
       {"cumulant-equation-solved", "size-biased-cb-is-cbi-with-phi-tilde"},
       detail::run_verify_cbi},
      {"verify-tagged-jumps", "first-level jumps form a subordinator",
       {"tagged-jumps-form-subordinator-u-nuY"},
       detail::run_verify_tagged},
  };
  return list;
}

// Parses and runs one configuration. Throws ConfigError listing every
// violation before any simulation starts.
inline ExperimentOutput run_experiment(const json& cfg) {
  Issues is;
  Obj root(cfg, "", is);
  const std::string name = root.string("experiment");
  is.raise_if_any();
  for (const auto& e : experiments()) {
    if (e.name != name) continue;
    ExperimentOutput out;
    out.experiment = name;
    out.config_hash = config_hash(cfg);
    e.run(root, is, out);
    out.report.experiment = name;
    out.report.config_hash = out.config_hash;
    return out;
  }
  is.add("experiment", "unknown experiment '" + name + "'");
  is.raise_if_any();
  return {};
}

inline json report_json(const ExperimentOutput& out) {
  json j;
  j["experiment"] = out.experiment;
  j["config_hash"] = out.config_hash;
  j["seed"] = out.seed;
  j["all_pass"] = out.report.all_pass();
  j["estimates"] = json::array();
  for (const auto& e : out.report.estimates)
    j["estimates"].push_back({{"name", e.name}, {"value", e.value}, {"stderr", e.stderr_}});
  j["verdicts"] = json::array();
  for (const auto& v : out.report.verdicts)
    j["verdicts"].push_back({{"check", v.check},
                             {"pass", v.pass},
                             {"statistic", v.statistic},
                             {"tolerance", v.tolerance},
                             {"statement", v.statement}});
  return j;
}

// report.json plus the experiment's CSV files.
inline void write_outputs(const ExperimentOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.json") << report_json(out).dump(2) << '\n';
  for (const auto& [name, text] : out.files) std::ofstream(dir / name) << text;
}

}  // namespace lookdown
