#pragma once

#include "numerics.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace lookdown {

struct MCEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

// Streaming mean/variance; merge is exact (pairwise update).
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const Accumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_of_mean() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }
  MCEstimate estimate() const {
    if (n_ < 2) throw DomainError("an estimate needs at least two samples");
    return {mean_, stderr_of_mean(), n_};
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline MCEstimate mc_estimate(const std::vector<double>& xs) {
  Accumulator a;
  for (double x : xs) {
    if (!std::isfinite(x)) throw DomainError("samples must be finite");
    a.add(x);
  }
  return a.estimate();
}

// Asymptotic Kolmogorov distribution tail P(K > lambda).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov; ties are handled by stepping over equal values.
inline KsResult two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  const double p = d < 1e-15 ? 1.0 : kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
  return {d, p};
}

inline double chi_square_p(double chi2, double dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * chi2);
}

struct Verdict {
  std::string check;
  bool pass = false;
  double statistic = 0.0;
  double tolerance = 0.0;
  std::string statement;  // identifier of the verified claim
};

struct NamedEstimate {
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct TestReport {
  std::string experiment;
  std::string config_hash;
  std::vector<NamedEstimate> estimates;
  std::vector<Verdict> verdicts;

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
  void add(const std::string& name, const MCEstimate& e) { estimates.push_back({name, e.mean, e.stderr_}); }
  void add(const std::string& name, double value) { estimates.push_back({name, value, 0.0}); }
};

// |a - b| within sigmas * combined standard error.
inline Verdict within_sigma(const std::string& check, const MCEstimate& a, const MCEstimate& b,
                            double sigmas, const std::string& statement) {
  const double se = std::hypot(a.stderr_, b.stderr_);
  const double z = se > 0.0 ? std::abs(a.mean - b.mean) / se : (a.mean == b.mean ? 0.0 : INFINITY);
  return {check, z <= sigmas, z, sigmas, statement};
}

inline Verdict within_sigma(const std::string& check, const MCEstimate& a, double target,
                            double sigmas, const std::string& statement) {
  return within_sigma(check, a, MCEstimate{target, 0.0, 0}, sigmas, statement);
}

// weights[k][r]: weight of replica r at time k; checks |mean - 1| <= sigmas * se.
inline TestReport martingale_flatness(const std::vector<std::vector<double>>& weights,
                                      const std::vector<double>& times, double sigmas = 3.0,
                                      const std::string& name = "weight",
                                      const std::string& statement = "") {
  TestReport rep;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (double w : weights[k])
      if (w < 0.0) throw DomainError("martingale weights must be nonnegative");
    const MCEstimate e = mc_estimate(weights[k]);
    const std::string tag = name + "@t=" + std::to_string(times[k]);
    rep.add(tag, e);
    rep.verdicts.push_back(within_sigma(tag + " mean is 1", e, 1.0, sigmas, statement));
  }
  return rep;
}

struct Extrapolation {
  double value = 0.0;
  double stderr_ = 0.0;
};

// Fits D(delta) = a + b delta by weighted least squares over the ladder and
// returns the intercept a with its standard error. Exact quotients (zero
// standard error) switch the fit to equal weights.
inline Extrapolation richardson_linear(const std::vector<double>& deltas,
                                       const std::vector<MCEstimate>& quotients) {
  if (deltas.size() < 2 || deltas.size() != quotients.size())
    throw DomainError("extrapolation needs at least two quotients");
  const bool exact = std::any_of(quotients.begin(), quotients.end(), [](const MCEstimate& q) { return q.stderr_ <= 0.0; });
  std::vector<double> w(deltas.size());
  double sw = 0, sx = 0, sxx = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    w[i] = exact ? 1.0 : 1.0 / (quotients[i].stderr_ * quotients[i].stderr_);
    sw += w[i];
    sx += w[i] * deltas[i];
    sxx += w[i] * deltas[i] * deltas[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw DomainError("extrapolation needs distinct deltas");
  double a = 0.0, var = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double c = (sxx - sx * deltas[i]) * w[i] / det;
    a += c * quotients[i].mean;
    var += c * c * quotients[i].stderr_ * quotients[i].stderr_;
  }
  return {a, std::sqrt(var)};
}

// sampler(delta) returns the MC estimate of E[f(X_delta)] - f(x).
inline TestReport generator_consistency(const std::function<MCEstimate(double)>& sampler,
                                        double operator_value, const std::vector<double>& deltas,
                                        double rel_tol = 0.05, const std::string& statement = "") {
  std::vector<MCEstimate> q;
  for (double d : deltas) {
    MCEstimate e = sampler(d);
    q.push_back({e.mean / d, e.stderr_ / d, e.n});
  }
  const Extrapolation ex = richardson_linear(deltas, q);
  TestReport rep;
  for (std::size_t i = 0; i < deltas.size(); ++i) rep.add("quotient@delta=" + std::to_string(deltas[i]), q[i]);
  rep.estimates.push_back({"extrapolated", ex.value, ex.stderr_});
  rep.add("operator", operator_value);
  const double scale = std::max(std::abs(operator_value), 1e-12);
  const double err = std::abs(ex.value - operator_value);
  // constant functions have operator value 0: fall back to the MC band
  const bool pass = std::abs(operator_value) > 1e-12 ? err / scale <= rel_tol : err <= 3.0 * ex.stderr_ + 1e-12;
  rep.verdicts.push_back({"extrapolated quotient matches operator", pass,
                          std::abs(operator_value) > 1e-12 ? err / scale : err, rel_tol, statement});
  return rep;
}

}  // namespace lookdown
