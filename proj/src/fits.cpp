#include "kinex/fits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "kinex/error.hpp"

namespace kinex {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kSampleJackknifeGroups = 20;
constexpr double kMinR2 = 0.99;
constexpr double kAgreementSigmas = 2.0;
constexpr double kSensitivityFractions[] = {0.05, 0.1, 0.2};

struct ParetoPair {
  double nu_mle = kNaN;
  double se_mle = kNaN;
  double nu_ls = kNaN;
  double se_ls = kNaN;
  double r2 = kNaN;
  double in_window = 0.0;
};

double jackknife_se(std::span<const double> replicates) {
  const auto g = static_cast<double>(replicates.size());
  if (replicates.size() < 2) return kNaN;
  const double mean = std::accumulate(replicates.begin(), replicates.end(), 0.0) / g;
  double ss = 0.0;
  for (double v : replicates) ss += (v - mean) * (v - mean);
  return std::sqrt((g - 1.0) / g * ss);
}

template <class F>
double maximize_1d(F log_likelihood, double lo, double hi) {
  auto neg = [&](double x) { return -log_likelihood(x); };
  std::uintmax_t iterations = 200;
  const auto [x, fx] = boost::math::tools::brent_find_minima(neg, lo, hi, 40, iterations);
  if (!std::isfinite(fx)) throw AnalysisError("likelihood maximization did not converge");
  return x;
}

template <class F>
double curvature_stderr(F log_likelihood, double x) {
  const double h = 1e-3 * std::max(std::abs(x), 1e-3);
  const double d2 = (log_likelihood(x + h) - 2.0 * log_likelihood(x) + log_likelihood(x - h)) / (h * h);
  return d2 < 0.0 ? 1.0 / std::sqrt(-d2) : kNaN;
}

// ---- Pareto, raw samples -------------------------------------------------

// Root of the truncated-Pareto score: mean log excess equals its expectation.
double truncated_pareto_mle(double mean_log_excess, double range) {
  if (!std::isfinite(range)) return 1.0 / mean_log_excess;
  auto expected = [range](double nu) { return 1.0 / nu - range / std::expm1(nu * range); };
  double lo = 1e-6, hi = 100.0;
  if (expected(lo) <= mean_log_excess) return 0.0;
  if (expected(hi) >= mean_log_excess) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected(mid) > mean_log_excess ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double truncated_pareto_stderr(double nu, double n, double range) {
  double info = 1.0 / (nu * nu);
  if (std::isfinite(range)) {
    const double em1 = std::expm1(nu * range);
    info -= range * range * (em1 + 1.0) / (em1 * em1);
  }
  return info > 0.0 ? 1.0 / std::sqrt(n * info) : kNaN;
}

// `sorted` ascending; samples whose group equals `excluded` are left out.
ParetoPair pareto_from_sorted(std::span<const double> sorted, std::span<const int> group, int excluded,
                              const FitWindow& w) {
  double n = 0.0;
  for (int g : group) n += (g != excluded) ? 1.0 : 0.0;
  ParetoPair out;
  std::vector<double> lx, lq;
  double below = 0.0;
  double log_excess = 0.0;
  const double range = std::log(w.hi / w.lo);
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (group[k] == excluded) continue;
    const double x = sorted[k];
    if (x >= w.lo && x < w.hi) {
      if (lx.empty() || std::log(x) != lx.back()) {
        lx.push_back(std::log(x));
        lq.push_back(std::log((n - below) / n));
      }
      out.in_window += 1.0;
      log_excess += std::log(x / w.lo);
    }
    below += 1.0;
  }
  if (out.in_window < 10.0 || lx.size() < 3) throw AnalysisError("too few observations in the tail window");
  out.nu_mle = truncated_pareto_mle(log_excess / out.in_window, range);
  out.se_mle = truncated_pareto_stderr(out.nu_mle, out.in_window, range);
  const LineFit line = least_squares(lx, lq);
  out.nu_ls = -line.slope;
  out.se_ls = line.slope_stderr;
  out.r2 = line.r2;
  return out;
}

// ---- Pareto, binned ------------------------------------------------------

struct WindowBins {
  std::vector<std::size_t> index;
  double lo = 0.0;
  double hi = 0.0;
};

WindowBins window_bins(const DistributionEstimate& e, const FitWindow& w) {
  WindowBins out{{}, w.lo, w.hi};
  for (std::size_t i = 0; i < e.bins(); ++i) {
    if (e.left(i) >= w.lo * (1.0 - 1e-12) && e.right(i) <= w.hi * (1.0 + 1e-12)) out.index.push_back(i);
  }
  return out;
}

ParetoPair pareto_from_hist(const DistributionEstimate& e, const FitWindow& w) {
  const WindowBins wb = window_bins(e, w);
  ParetoPair out;
  for (std::size_t i : wb.index) out.in_window += e.counts[i];
  if (wb.index.size() < 3 || out.in_window < 10.0) throw AnalysisError("too few observations in the tail window");

  const double range = std::log(w.hi / w.lo);
  auto loglik = [&](double nu) {
    double ll = 0.0;
    for (std::size_t i : wb.index) {
      if (e.counts[i] <= 0.0) continue;
      const double u = std::log(e.left(i) / w.lo);
      const double v = std::log(e.right(i) / w.lo);
      ll += e.counts[i] * (-nu * u + std::log1p(-std::exp(-nu * (v - u))));
    }
    return ll - out.in_window * std::log1p(-std::exp(-nu * range));
  };
  out.nu_mle = maximize_1d(loglik, 1e-4, 30.0);
  out.se_mle = curvature_stderr(loglik, out.nu_mle);

  const double n = e.total();
  std::vector<double> above(e.bins() + 1, 0.0);
  for (std::size_t i = e.bins(); i-- > 0;) above[i] = above[i + 1] + e.counts[i];
  std::vector<double> lx, lq;
  for (std::size_t k = 0; k < wb.index.size(); ++k) {
    const std::size_t i = wb.index[k];
    if (above[i] > 0.0) {
      lx.push_back(std::log(e.left(i)));
      lq.push_back(std::log(above[i] / n));
    }
    if (k + 1 == wb.index.size() && above[i + 1] > 0.0) {
      lx.push_back(std::log(e.right(i)));
      lq.push_back(std::log(above[i + 1] / n));
    }
  }
  const LineFit line = least_squares(lx, lq);
  out.nu_ls = -line.slope;
  out.se_ls = line.slope_stderr;
  out.r2 = line.r2;
  return out;
}

FitWindow hist_window(const DistributionEstimate& e, const TailWindowPolicy& policy) {
  if (!(policy.top_fraction > 0.0 && policy.top_fraction < 1.0) || !(policy.decades > 0.0)) {
    throw ContractViolation("tail window needs 0 < top_fraction < 1 and decades > 0");
  }
  const double lo = e.upper_quantile_edge(policy.top_fraction);
  if (!(lo > 0.0)) throw AnalysisError("tail window would start in the underflow bin");
  const double target = std::log(lo) + policy.decades * std::log(10.0);
  const auto& edges = e.binning.edges();
  double hi = edges.back();
  double best = std::numeric_limits<double>::infinity();
  for (double edge : edges) {
    if (edge <= lo) continue;
    const double d = std::abs(std::log(edge) - target);
    if (d < best) {
      best = d;
      hi = edge;
    }
  }
  return {lo, hi};
}

bool hist_covers(const DistributionEstimate& e, double hi) {
  for (std::size_t i = 0; i < e.bins(); ++i) {
    if (e.left(i) >= hi * (1.0 - 1e-12) && e.counts[i] > 0.0) return true;
  }
  return false;
}

FitResult pareto_result(const ParetoPair& p, const FitWindow& w, bool covered, const std::string& se_kind) {
  FitResult r;
  r.method = "pareto_tail";
  r.window = w;
  r.estimates["nu"] = {p.nu_mle, p.se_mle};
  r.estimates["nu_mle"] = {p.nu_mle, p.se_mle};
  r.estimates["nu_ls"] = {p.nu_ls, p.se_ls};
  r.goodness["r2_loglog"] = p.r2;
  r.goodness["observations_in_window"] = p.in_window;
  const double combined = std::hypot(p.se_mle, p.se_ls);
  const bool agree = std::abs(p.nu_mle - p.nu_ls) <= kAgreementSigmas * combined;
  const bool straight = p.r2 >= kMinR2;
  r.healthy = covered && agree && straight && p.nu_mle > 0.0;
  std::string note = "stderr: " + se_kind;
  if (!covered) note += "; data do not reach the end of the window";
  if (!agree) note += "; estimators disagree";
  if (!straight) note += "; log-log CCDF is not straight";
  r.note = note;
  return r;
}

template <class FitAt>
void add_sensitivity(FitResult& r, const TailWindowPolicy& policy, FitAt fit_at) {
  for (double f : kSensitivityFractions) {
    SensitivityPoint s{f, kNaN, kNaN};
    try {
      const ParetoPair p = fit_at(TailWindowPolicy{f, policy.decades});
      s.nu_mle = p.nu_mle;
      s.nu_ls = p.nu_ls;
    } catch (const AnalysisError&) {
    }
    r.sensitivity.push_back(s);
  }
}

// ---- exponential -----------------------------------------------------------

// Log-likelihood of binned counts for an exponential with scale T shifted to
// start at `origin`; the last bin is open-ended.
// Bins must be contiguous. An infinite `upper` leaves the law untruncated.
double binned_exponential_loglik(const DistributionEstimate& e, std::span<const std::size_t> bins, double origin,
                                 double temperature, double upper = std::numeric_limits<double>::infinity()) {
  const double norm = std::isfinite(upper) ? std::log1p(-std::exp(-(upper - origin) / temperature)) : 0.0;
  double ll = 0.0;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const std::size_t i = bins[k];
    if (e.counts[i] <= 0.0) continue;
    const double a = std::max(0.0, e.left(i) - origin);
    double term = -a / temperature - norm;
    if (i + 1 < e.bins()) term += std::log1p(-std::exp(-(e.right(i) - e.left(i)) / temperature));
    ll += e.counts[i] * term;
  }
  return ll;
}

double binned_mean(const DistributionEstimate& e) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.bins(); ++i) s += e.counts[i] * 0.5 * (e.left(i) + e.right(i));
  return s / e.total();
}

// ---- gamma -----------------------------------------------------------------

FitResult gamma_result(double shape, double scale, double se_shape, double se_scale) {
  FitResult r;
  r.method = "gamma";
  const double alpha = shape - 1.0;
  r.estimates["alpha"] = {alpha, se_shape};
  r.estimates["T"] = {scale, se_scale};
  r.estimates["implied_lambda"] = {implied_lambda(alpha), 3.0 / ((alpha + 3.0) * (alpha + 3.0)) * se_shape};
  r.healthy = std::isfinite(alpha) && std::isfinite(scale) && scale > 0.0;
  return r;
}

// Maximum likelihood from n, sum m and sum ln m (all m > 0).
FitResult gamma_from_sufficient(double n, double mean, double mean_log) {
  if (!(n >= 2.0) || !(mean > 0.0)) throw AnalysisError("gamma fit needs at least two positive observations");
  const double s = std::log(mean) - mean_log;
  if (!(s > 0.0)) throw AnalysisError("gamma fit on degenerate (constant) data");
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(k) - boost::math::digamma(k) - s;
    const double df = 1.0 / k - boost::math::trigamma(k);
    const double next = k - f / df;
    const double step = std::abs(next - k);
    k = next > 0.0 ? next : 0.5 * k;
    if (step < 1e-14 * k) break;
  }
  if (!std::isfinite(k) || !(k > 0.0)) {
    throw AnalysisError("gamma likelihood did not converge (s = " + std::to_string(s) + ")");
  }
  const double theta = mean / k;
  const double psi1 = boost::math::trigamma(k);
  const double denom = n * (k * psi1 - 1.0);
  return gamma_result(k, theta, std::sqrt(k / denom), std::sqrt(theta * theta * psi1 / denom));
}

double gamma_bin_probability(double shape, double scale, double a, double b) {
  using boost::math::gamma_p;
  using boost::math::gamma_q;
  const double xa = a / scale;
  if (!std::isfinite(b)) return gamma_q(shape, xa);
  const double xb = b / scale;
  if (xa > shape) return gamma_q(shape, xa) - gamma_q(shape, xb);
  return gamma_p(shape, xb) - gamma_p(shape, xa);
}

}  // namespace

const ParameterEstimate& FitResult::at(const std::string& name) const {
  auto it = estimates.find(name);
  if (it == estimates.end()) throw AnalysisError("fit has no estimate named " + name);
  return it->second;
}

double implied_lambda(double alpha) { return alpha / (alpha + 3.0); }

double ks_critical_1pct(double n) { return std::sqrt(-0.5 * std::log(0.005)) / std::sqrt(n); }

// ---------------------------------------------------------------------------

FitResult fit_pareto_tail(std::span<const double> samples, const TailWindowPolicy& policy) {
  if (samples.empty()) throw AnalysisError("Pareto fit of an empty sample");
  if (!(policy.top_fraction > 0.0 && policy.top_fraction < 1.0) || !(policy.decades > 0.0)) {
    throw ContractViolation("tail window needs 0 < top_fraction < 1 and decades > 0");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
  std::vector<double> sorted(samples.size());
  std::vector<int> group(samples.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted[k] = samples[order[k]];
    group[k] = static_cast<int>(order[k] % kSampleJackknifeGroups);
  }

  auto window_for = [&](const TailWindowPolicy& p) {
    const auto tail = static_cast<std::size_t>(std::ceil(p.top_fraction * static_cast<double>(sorted.size())));
    const double lo = sorted[sorted.size() - std::max<std::size_t>(tail, 1)];
    if (!(lo > 0.0)) throw AnalysisError("tail window would start at zero");
    return FitWindow{lo, lo * std::pow(10.0, p.decades)};
  };

  const FitWindow w = window_for(policy);
  ParetoPair full = pareto_from_sorted(sorted, group, -1, w);
  std::vector<double> rep_mle, rep_ls;
  for (int g = 0; g < kSampleJackknifeGroups; ++g) {
    const ParetoPair p = pareto_from_sorted(sorted, group, g, w);
    rep_mle.push_back(p.nu_mle);
    rep_ls.push_back(p.nu_ls);
  }
  full.se_mle = jackknife_se(rep_mle);
  full.se_ls = jackknife_se(rep_ls);

  FitResult r = pareto_result(full, w, sorted.back() >= w.hi, "20-group jackknife");
  add_sensitivity(r, policy, [&](const TailWindowPolicy& p) { return pareto_from_sorted(sorted, group, -1, window_for(p)); });
  return r;
}

FitResult fit_pareto_tail(const DistributionEstimate& estimate, const TailWindowPolicy& policy) {
  const FitWindow w = hist_window(estimate, policy);
  const ParetoPair p = pareto_from_hist(estimate, w);
  FitResult r = pareto_result(p, w, hist_covers(estimate, w.hi), "likelihood curvature / regression residuals");
  add_sensitivity(r, policy, [&](const TailWindowPolicy& q) { return pareto_from_hist(estimate, hist_window(estimate, q)); });
  return r;
}

FitResult fit_pareto_tail(const DistributionEstimate& pooled, std::span<const DistributionEstimate> groups,
                          const TailWindowPolicy& policy) {
  if (groups.size() < 2) return fit_pareto_tail(pooled, policy);
  const FitWindow w = hist_window(pooled, policy);
  ParetoPair p = pareto_from_hist(pooled, w);
  std::vector<double> rep_mle, rep_ls;
  for (const auto& g : groups) {
    DistributionEstimate rest = pooled;
    for (std::size_t i = 0; i < rest.bins(); ++i) rest.counts[i] -= g.counts.at(i);
    const ParetoPair q = pareto_from_hist(rest, w);
    rep_mle.push_back(q.nu_mle);
    rep_ls.push_back(q.nu_ls);
  }
  p.se_mle = jackknife_se(rep_mle);
  p.se_ls = jackknife_se(rep_ls);
  FitResult r = pareto_result(p, w, hist_covers(pooled, w.hi),
                              std::to_string(groups.size()) + "-group jackknife");
  add_sensitivity(r, policy, [&](const TailWindowPolicy& q) { return pareto_from_hist(pooled, hist_window(pooled, q)); });
  return r;
}

// ---------------------------------------------------------------------------

FitResult fit_exponential(std::span<const double> samples) {
  if (samples.size() < 2) throw AnalysisError("exponential fit needs at least two observations");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double t = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  if (!(t > 0.0)) throw AnalysisError("exponential fit needs a positive mean");
  double d = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double f = -std::expm1(-sorted[k] / t);
    d = std::max({d, std::abs(static_cast<double>(k + 1) / n - f), std::abs(f - static_cast<double>(k) / n)});
  }
  FitResult r;
  r.method = "exponential";
  r.estimates["T"] = {t, t / std::sqrt(n)};
  r.window = {0.0, sorted.back()};
  r.goodness["ks"] = d;
  r.goodness["ks_critical_1pct"] = ks_critical_1pct(n);
  r.healthy = d < ks_critical_1pct(n);
  return r;
}

FitResult fit_exponential(const DistributionEstimate& e) {
  const double n = e.total();
  if (!(n >= 2.0)) throw AnalysisError("exponential fit needs at least two observations");
  std::vector<std::size_t> all(e.bins());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double guess = binned_mean(e);
  auto loglik = [&](double t) { return binned_exponential_loglik(e, all, 0.0, t); };
  const double t = maximize_1d(loglik, guess / 20.0, guess * 20.0);
  double cum = 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < e.bins(); ++i) {
    cum += e.counts[i];
    d = std::max(d, std::abs(cum / n + std::expm1(-e.right(i) / t)));
  }
  FitResult r;
  r.method = "exponential";
  r.estimates["T"] = {t, curvature_stderr(loglik, t)};
  r.window = {0.0, e.max_support()};
  r.goodness["ks"] = d;
  r.goodness["ks_critical_1pct"] = ks_critical_1pct(n);
  r.healthy = d < ks_critical_1pct(n);
  return r;
}

FitResult fit_exponential_tail(const DistributionEstimate& pooled, std::span<const DistributionEstimate> groups,
                               double top_fraction, double survival_decades) {
  if (!(top_fraction > 0.0 && top_fraction < 1.0) || !(survival_decades > 0.0)) {
    throw ContractViolation("exponential tail window needs 0 < top_fraction < 1 and survival_decades > 0");
  }
  const double lo = pooled.upper_quantile_edge(top_fraction);
  const double hi = pooled.upper_quantile_edge(top_fraction * std::pow(10.0, -survival_decades));
  std::vector<std::size_t> bins;
  for (std::size_t i = 0; i < pooled.bins(); ++i) {
    if (pooled.left(i) >= lo && pooled.right(i) <= hi * (1.0 + 1e-12)) bins.push_back(i);
  }
  if (bins.size() < 3) throw AnalysisError("too few bins in the exponential tail window");

  struct Pair {
    double t_mle, se_mle, t_ls, se_ls, r2;
  };
  auto fit_one = [&](const DistributionEstimate& e) {
    double in_window = 0.0, mean_excess = 0.0;
    for (std::size_t i : bins) {
      in_window += e.counts[i];
      mean_excess += e.counts[i] * (0.5 * (e.left(i) + e.right(i)) - lo);
    }
    if (in_window < 10.0) throw AnalysisError("too few observations in the exponential tail window");
    mean_excess /= in_window;
    auto loglik = [&](double t) { return binned_exponential_loglik(e, bins, lo, t, hi); };
    Pair p{};
    p.t_mle = maximize_1d(loglik, mean_excess / 20.0, mean_excess * 20.0);
    p.se_mle = curvature_stderr(loglik, p.t_mle);
    // Straight line through log Q(m) vs m at the window's bin edges.
    const double n = e.total();
    std::vector<double> xs, ys;
    double above = 0.0;
    for (std::size_t i = e.bins(); i-- > bins.front();) {
      above += e.counts[i];
      if (i <= bins.back() && above > 0.0) {
        xs.push_back(e.left(i));
        ys.push_back(std::log(above / n));
      }
    }
    const LineFit line = least_squares(xs, ys);
    p.t_ls = -1.0 / line.slope;
    p.se_ls = line.slope_stderr / (line.slope * line.slope);
    p.r2 = line.r2;
    return p;
  };

  Pair p = fit_one(pooled);
  std::string se_kind = "likelihood curvature / regression residuals";
  if (groups.size() >= 2) {
    std::vector<double> rep_mle, rep_ls;
    for (const auto& g : groups) {
      DistributionEstimate rest = pooled;
      for (std::size_t i = 0; i < rest.bins(); ++i) rest.counts[i] -= g.counts.at(i);
      const Pair q = fit_one(rest);
      rep_mle.push_back(q.t_mle);
      rep_ls.push_back(q.t_ls);
    }
    p.se_mle = jackknife_se(rep_mle);
    p.se_ls = jackknife_se(rep_ls);
    se_kind = std::to_string(groups.size()) + "-group jackknife";
  }

  FitResult r;
  r.method = "exponential_tail";
  r.window = {lo, hi};
  r.estimates["T"] = {p.t_mle, p.se_mle};
  r.estimates["T_ls"] = {p.t_ls, p.se_ls};
  r.goodness["r2_semilog"] = p.r2;
  const double tolerance = std::max(kAgreementSigmas * std::hypot(p.se_mle, p.se_ls), 0.05 * p.t_mle);
  const bool agree = std::abs(p.t_mle - p.t_ls) <= tolerance;
  const bool straight = p.r2 >= kMinR2;
  r.healthy = agree && straight && p.t_mle > 0.0;
  r.note = "stderr: " + se_kind;
  if (!agree) r.note += "; estimators disagree";
  if (!straight) r.note += "; log Q vs m is not straight";
  return r;
}

// ---------------------------------------------------------------------------

FitResult fit_gamma(std::span<const double> samples) {
  PowerSums sums;
  for (double m : samples) {
    if (!(m >= 0.0)) throw AnalysisError("gamma fit expects non-negative data");
    sums.add(m);
  }
  FitResult r = fit_gamma(sums);
  const double shape = r.value("alpha") + 1.0;
  const double scale = r.value("T");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double f = boost::math::gamma_p(shape, sorted[k] / scale);
    d = std::max({d, std::abs(static_cast<double>(k + 1) / n - f), std::abs(f - static_cast<double>(k) / n)});
  }
  r.goodness["ks"] = d;
  r.goodness["ks_critical_1pct"] = ks_critical_1pct(n);
  r.window = {0.0, sorted.back()};
  return r;
}

FitResult fit_gamma(const PowerSums& sums) {
  if (sums.positive_count < sums.count) {
    FitResult r = gamma_from_sufficient(sums.positive_count, sums.power[0] / sums.positive_count,
                                        sums.log_sum / sums.positive_count);
    r.note = "zero observations excluded";
    return r;
  }
  return gamma_from_sufficient(sums.count, sums.power[0] / sums.count, sums.log_sum / sums.count);
}

FitResult fit_gamma(const DistributionEstimate& e) {
  const double n = e.total();
  if (!(n >= 2.0)) throw AnalysisError("gamma fit needs at least two observations");
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < e.bins(); ++i) {
    const double c = 0.5 * (e.left(i) + e.right(i));
    mean += e.counts[i] * c;
    m2 += e.counts[i] * c * c;
  }
  mean /= n;
  const double var = m2 / n - mean * mean;
  if (!(mean > 0.0) || !(var > 0.0)) throw AnalysisError("gamma fit on degenerate histogram");
  const double k0 = std::max(mean * mean / var, 0.05);

  std::vector<std::size_t> nonempty;
  for (std::size_t i = 0; i < e.bins(); ++i) {
    if (e.counts[i] > 0.0) nonempty.push_back(i);
  }
  auto loglik = [&](double shape, double scale) {
    double ll = 0.0;
    for (std::size_t i : nonempty) {
      const double b = (i + 1 == e.bins()) ? std::numeric_limits<double>::infinity() : e.right(i);
      const double p = gamma_bin_probability(shape, scale, e.left(i), b);
      ll += e.counts[i] * std::log(std::max(p, 1e-300));
    }
    return ll;
  };
  auto best_scale = [&](double shape) {
    return std::exp(maximize_1d([&](double ls) { return loglik(shape, std::exp(ls)); }, std::log(mean / shape) - 2.0,
                                std::log(mean / shape) + 2.0));
  };
  double shape = std::exp(maximize_1d([&](double lk) { return loglik(std::exp(lk), best_scale(std::exp(lk))); },
                                      std::log(k0) - 3.0, std::log(k0) + 3.0));
  double scale = best_scale(shape);
  if (!std::isfinite(shape) || !std::isfinite(scale) || std::abs(std::log(shape / k0)) > 2.99) {
    // Fallback: least squares of log density on (1, log m, m).
    std::vector<double> lm, m, y;
    for (std::size_t i : nonempty) {
      if (e.left(i) <= 0.0) continue;
      const double c = std::sqrt(e.left(i) * e.right(i));
      lm.push_back(std::log(c));
      m.push_back(c);
      y.push_back(std::log(e.density(i)));
    }
    if (lm.size() < 4) throw AnalysisError("gamma fit did not converge and too few bins for the fallback");
    // Normal equations for y = c0 + alpha log m - m / T.
    double a[3][4] = {};
    for (std::size_t k = 0; k < lm.size(); ++k) {
      const double row[3] = {1.0, lm[k], -m[k]};
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) a[r][c] += row[r] * row[c];
        a[r][3] += row[r] * y[k];
      }
    }
    for (int p = 0; p < 3; ++p) {
      for (int r = p + 1; r < 3; ++r) {
        const double f = a[r][p] / a[p][p];
        for (int c = p; c < 4; ++c) a[r][c] -= f * a[p][c];
      }
    }
    double sol[3];
    for (int r = 2; r >= 0; --r) {
      double s = a[r][3];
      for (int c = r + 1; c < 3; ++c) s -= a[r][c] * sol[c];
      sol[r] = s / a[r][r];
    }
    if (!(sol[2] > 0.0)) {
      throw AnalysisError("gamma fit did not converge; log-density residual fit gave 1/T = " + std::to_string(sol[2]));
    }
    FitResult r = gamma_result(sol[1] + 1.0, 1.0 / sol[2], kNaN, kNaN);
    r.note = "least-squares fallback on log density";
    return r;
  }

  // Curvature of the log-likelihood in (shape, scale).
  const double hk = 1e-4 * shape, hs = 1e-4 * scale;
  const double f0 = loglik(shape, scale);
  const double fkk = (loglik(shape + hk, scale) - 2.0 * f0 + loglik(shape - hk, scale)) / (hk * hk);
  const double fss = (loglik(shape, scale + hs) - 2.0 * f0 + loglik(shape, scale - hs)) / (hs * hs);
  const double fks = (loglik(shape + hk, scale + hs) - loglik(shape + hk, scale - hs) - loglik(shape - hk, scale + hs) +
                      loglik(shape - hk, scale - hs)) /
                     (4.0 * hk * hs);
  const double det = fkk * fss - fks * fks;
  const double se_k = det > 0.0 ? std::sqrt(-fss / det) : kNaN;
  const double se_s = det > 0.0 ? std::sqrt(-fkk / det) : kNaN;
  FitResult r = gamma_result(shape, scale, se_k, se_s);
  double cum = 0.0, d = 0.0;
  for (std::size_t i = 0; i < e.bins(); ++i) {
    cum += e.counts[i];
    d = std::max(d, std::abs(cum / n - boost::math::gamma_p(shape, e.right(i) / scale)));
  }
  r.goodness["ks"] = d;
  r.goodness["ks_critical_1pct"] = ks_critical_1pct(n);
  r.window = {0.0, e.max_support()};
  return r;
}

void to_json(nlohmann::json& j, const FitResult& fit) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json est = nlohmann::json::object();
  nlohmann::json se = nlohmann::json::object();
  for (const auto& [name, e] : fit.estimates) {
    est[name] = finite_or_null(e.value);
    se[name] = finite_or_null(e.stderr_);
  }
  nlohmann::json good = nlohmann::json::object();
  for (const auto& [name, v] : fit.goodness) good[name] = finite_or_null(v);
  j = {{"method", fit.method},
       {"estimate", est},
       {"stderr", se},
       {"window", {finite_or_null(fit.window.lo), finite_or_null(fit.window.hi)}},
       {"goodness", good},
       {"healthy", fit.healthy}};
  if (!fit.note.empty()) j["note"] = fit.note;
  if (!fit.sensitivity.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& s : fit.sensitivity) {
      arr.push_back({{"top_fraction", s.top_fraction}, {"nu_mle", finite_or_null(s.nu_mle)}, {"nu_ls", finite_or_null(s.nu_ls)}});
    }
    j["sensitivity"] = arr;
  }
}

}  // namespace kinex
