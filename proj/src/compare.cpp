#include "kinex/compare.hpp"

#include <cmath>

#include "kinex/error.hpp"
#include "kinex/io.hpp"
#include "kinex/theory.hpp"

namespace kinex {

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json quantity(const std::string& name, double simulated, double stderr_, double predicted, double tolerance,
                        bool pass) {
  return {{"quantity", name},
          {"simulated", finite_or_null(simulated)},
          {"stderr", finite_or_null(stderr_)},
          {"predicted", finite_or_null(predicted)},
          {"tolerance", finite_or_null(tolerance)},
          {"pass", pass}};
}

std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* ext : {".csv", ".json"}) {
    const auto p = dir / (stem + ext);
    if (std::filesystem::exists(p)) return p;
  }
  return {};
}

}  // namespace

RunDirectory RunDirectory::load(const std::filesystem::path& dir) {
  RunDirectory r;
  r.path = dir;
  const auto manifest = read_json_file((dir / "manifest.json").string());
  if (!manifest.contains("config")) throw ConfigError((dir / "manifest.json").string() + " has no config");
  r.config = config_from_json(manifest.at("config"));
  r.summary = read_json_file((dir / "summary.json").string());
  return r;
}

bool RunDirectory::has(const std::string& stem) const { return !find_file(path, stem).empty(); }

DistributionEstimate RunDirectory::histogram(const std::string& stem) const {
  const auto p = find_file(path, stem);
  if (p.empty()) throw ConfigError("run directory " + path.string() + " has no " + stem + " histogram");
  return read_histogram(p);
}

std::vector<DistributionEstimate> RunDirectory::groups(const std::string& stem) const {
  const auto p = find_file(path, stem + "_groups");
  if (p.empty()) return {};
  return read_grouped_histograms(p);
}

FitResult fit_histogram(const std::string& kind, const DistributionEstimate& pooled,
                        const std::vector<DistributionEstimate>& groups, const TailWindowPolicy& policy) {
  if (kind == "pareto") return fit_pareto_tail(pooled, groups, policy);
  if (kind == "gamma") return fit_gamma(pooled);
  if (kind == "exponential") return fit_exponential(pooled);
  if (kind == "exponential_tail") return fit_exponential_tail(pooled, groups, policy.top_fraction);
  throw ConfigError("unknown fit kind \"" + kind + "\" (pareto, gamma, exponential, exponential_tail)");
}

nlohmann::json compare_with_theory(const RunDirectory& run, const std::string& theory) {
  const SimConfig& c = run.config;
  nlohmann::json report = {{"theory", theory}, {"model", to_string(c.model)}, {"run", run.path.string()}};
  nlohmann::json rows = nlohmann::json::array();

  const auto colon = theory.find(':');
  const std::string name = theory.substr(0, colon);

  if (name == "gibbs") {
    if (c.model != Model::no_savings) {
      throw ConfigError(std::string("gibbs theory applies to the no_savings model, not ") + to_string(c.model));
    }
    const double t_pred = gibbs_temperature(c.total_money(), c.agents);
    const FitResult fit = fit_exponential(run.histogram("money"));
    const auto& t = fit.at("T");
    const double tol = 0.05 * t_pred;
    rows.push_back(quantity("T", t.value, t.stderr_, t_pred, tol, std::abs(t.value - t_pred) <= tol));
    rows.push_back(quantity("ks", fit.goodness.at("ks"), NAN, 0.0, fit.goodness.at("ks_critical_1pct"), fit.healthy));
  } else if (name == "gamma") {
    if (c.model != Model::uniform_savings) {
      throw ConfigError(std::string("gamma theory applies to the uniform_savings model, not ") + to_string(c.model));
    }
    const double lambda = colon == std::string::npos ? c.lambda->value : std::stod(theory.substr(colon + 1));
    const GammaParams g = gamma_params(lambda);
    const double scale = c.money_per_agent;

    std::vector<PowerSums> sums;
    for (const auto& s : run.summary.at("money_power_sums")) {
      PowerSums p;
      p.count = s.at("count").get<double>();
      p.power = s.at("power").get<std::array<double, 4>>();
      p.log_sum = s.at("log_sum").get<double>();
      p.positive_count = s.at("positive_count").get<double>();
      sums.push_back(p);
    }
    PowerSums pooled;
    for (const auto& s : sums) pooled.merge(s);
    const FitResult fit = fit_gamma(pooled);
    // Jackknife over groups for the shape.
    double alpha_se = fit.at("alpha").stderr_;
    if (sums.size() >= 2) {
      std::vector<double> reps;
      for (std::size_t k = 0; k < sums.size(); ++k) {
        PowerSums rest;
        for (std::size_t q = 0; q < sums.size(); ++q) {
          if (q != k) rest.merge(sums[q]);
        }
        reps.push_back(fit_gamma(rest).value("alpha"));
      }
      double mean = 0.0;
      for (double v : reps) mean += v / static_cast<double>(reps.size());
      double ss = 0.0;
      for (double v : reps) ss += (v - mean) * (v - mean);
      const auto gcount = static_cast<double>(reps.size());
      alpha_se = std::sqrt((gcount - 1.0) / gcount * ss);
    }
    const double alpha = fit.value("alpha");
    const double alpha_tol = 0.1 * g.alpha;
    rows.push_back(quantity("alpha", alpha, alpha_se, g.alpha, alpha_tol,
                            g.alpha == 0.0 ? std::abs(alpha) <= 0.05 : std::abs(alpha - g.alpha) <= alpha_tol));
    const auto ms = moments(sums, 4);
    for (const auto& m : ms) {
      const double pred = g.raw_moment(m.order) * std::pow(scale, m.order);
      const double se = std::isfinite(m.stderr_) ? m.stderr_ : 0.0;
      const double tol = 0.03 * pred + 2.0 * se;
      const bool gated = m.order <= 3;
      auto row = quantity("moment_" + std::to_string(m.order), m.value, m.stderr_, pred, tol,
                          !gated || std::abs(m.value - pred) <= tol);
      if (!gated) {
        row["gated"] = false;
        row["relative_deviation"] = (m.value - pred) / pred;
      }
      rows.push_back(row);
    }
  } else if (name == "pareto") {
    if (!c.uses_lambda() || c.model == Model::uniform_savings) {
      throw ConfigError(std::string("pareto theory applies to distributed saving propensities, not ") +
                        to_string(c.model));
    }
    const TailPrediction pred = predicted_tail_exponent(c.effective_lambda());
    for (const std::string stem : {"money", "wealth"}) {
      if (!run.has(stem)) continue;
      FitResult fit;
      try {
        fit = fit_pareto_tail(run.histogram(stem), run.groups(stem));
      } catch (const AnalysisError& e) {
        rows.push_back(quantity(stem + "_nu", NAN, NAN, pred.power_law ? pred.nu : NAN, 0.1, false));
        rows.back()["note"] = e.what();
        continue;
      }
      const auto& nu = fit.at("nu");
      if (pred.power_law) {
        rows.push_back(quantity(stem + "_nu", nu.value, nu.stderr_, pred.nu, 0.1,
                                fit.healthy && std::abs(nu.value - pred.nu) <= 0.1));
      } else {
        // No power law expected: the comparison passes when the fit is not healthy.
        rows.push_back(quantity(stem + "_nu", nu.value, nu.stderr_, NAN, NAN, !fit.healthy));
      }
      rows.back()["healthy"] = fit.healthy;
    }
  } else {
    throw ConfigError("unknown theory \"" + theory + "\" (gibbs, gamma[:lambda], pareto)");
  }

  bool all = true;
  for (const auto& r : rows) all = all && r.at("pass").get<bool>();
  report["quantities"] = rows;
  report["pass"] = all;
  return report;
}

}  // namespace kinex
