// kinex: run kinetic exchange experiments, fit their outputs, and compare
// them with theory.
//
//   kinex simulate --config run.json --out-dir out/ [--seed 7] [--threads 4]
//   kinex sweep    --config run.json --key lambda.delta --values '[0, 0.5, 1]' --fit pareto
//   kinex fit      --histogram out/money.csv --kind pareto [--groups out/money_groups.csv]
//   kinex compare  --result out/ --theory gamma:0.5
//   kinex theory   --quantity nu --lambda-spec '{"kind": "uniform_interval", "lower": 0, "upper": 1}'
//
// Exit codes: 0 success (an unhealthy fit is still a success), 1 runtime
// failure, 2 usage or configuration error.

#include <algorithm>
#include <chrono>
#include <functional>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kinex/compare.hpp"
#include "kinex/engine.hpp"
#include "kinex/error.hpp"
#include "kinex/io.hpp"
#include "kinex/stats.hpp"
#include "kinex/theory.hpp"

namespace fs = std::filesystem;
using namespace kinex;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct RunFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string format = "csv";
  std::vector<std::string> overrides;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "Experiment description (JSON)")->required();
  cmd->add_option("--out-dir", f.out_dir, "Output directory (default: $KINEX_OUT_DIR, else ./kinex_out)");
  cmd->add_option("--seed", f.seed, "Master seed; overrides the config's seed");
  cmd->add_option("--threads", f.threads, "Worker threads; results do not depend on it")
      ->check(CLI::Range(1u, 1024u));
  cmd->add_option("--format", f.format, "Histogram format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--set", f.overrides, "Override a config key, e.g. --set agents=500 --set lambda.delta=0.5");
}

std::string default_out_dir(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("KINEX_OUT_DIR"); env && *env) return env;
  return "kinex_out";
}

nlohmann::json load_config_doc(const RunFlags& f) {
  nlohmann::json doc = read_json_file(f.config_path);
  for (const auto& o : f.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + o + "\"");
    apply_override(doc, o.substr(0, eq), std::string_view(o).substr(eq + 1));
  }
  if (f.seed) doc["seed"] = *f.seed;
  return doc;
}

OutputFormat parse_format(const std::string& s) { return s == "json" ? OutputFormat::json : OutputFormat::csv; }

// Runs one configuration and writes its outputs; returns the result.
SimResult simulate_into(const SimConfig& config, const fs::path& dir, unsigned threads, OutputFormat format) {
  ManifestInfo info;
  info.started_utc = utc_timestamp();
  info.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  SimResult result = run(config, RunOptions{threads});
  info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  info.finished_utc = utc_timestamp();
  const auto files = render_outputs(result, format);
  write_outputs(dir, files, manifest_json(result, files, info));
  return result;
}

std::string fit_line(const FitResult& fit) {
  std::ostringstream s;
  s << fit.method << ":";
  for (const auto& [name, e] : fit.estimates) s << ' ' << name << '=' << e.value << " +- " << e.stderr_;
  s << " window=[" << fit.window.lo << ", " << fit.window.hi << "]";
  for (const auto& [name, v] : fit.goodness) s << ' ' << name << '=' << v;
  s << " healthy=" << (fit.healthy ? "true" : "false");
  if (!fit.note.empty()) s << " (" << fit.note << ")";
  return s.str();
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunFlags& f) {
  const SimConfig config = config_from_json(load_config_doc(f));
  const fs::path dir = default_out_dir(f.out_dir);
  const SimResult r = simulate_into(config, dir, f.threads, parse_format(f.format));
  std::cout << "wrote " << dir.string() << ": " << r.pooled.money.total() << " money observations, max relative "
            << "conservation deviation " << r.audit.max_money_deviation << "\n";
  return 0;
}

struct SweepFlags {
  std::string key;
  std::string values;
  std::string fit = "none";
  std::string target = "money";
  double top_fraction = 0.1;
};

std::vector<nlohmann::json> parse_values(const std::string& text) {
  nlohmann::json v = nlohmann::json::parse(text, nullptr, false);
  std::vector<nlohmann::json> out;
  if (!v.is_discarded() && v.is_array()) {
    for (auto& x : v) out.push_back(x);
    return out;
  }
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    nlohmann::json x = nlohmann::json::parse(item, nullptr, false);
    out.push_back(x.is_discarded() ? nlohmann::json(item) : x);
  }
  return out;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_') ? ch : '_';
  return out;
}

int cmd_sweep(const RunFlags& f, const SweepFlags& s) {
  const auto values = parse_values(s.values);
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const nlohmann::json base = load_config_doc(f);

  // Validate every point before running any of them.
  std::vector<SimConfig> configs;
  for (const auto& v : values) {
    nlohmann::json doc = base;
    set_config_value(doc, s.key, v);
    configs.push_back(config_from_json(doc));
  }
  const fs::path dir = default_out_dir(f.out_dir);
  const bool richest = s.fit == "richest";
  std::string csv = richest ? "value,agents,mean_lambda_max,long_run_mean,long_run_stderr,relaxation_steps\n"
                            : "value,fit,target,parameter,estimate,stderr,healthy\n";
  nlohmann::json points = nlohmann::json::array();
  std::vector<double> log_x_tau, log_tau, log_n, log_mean;

  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::string label = values[k].is_string() ? values[k].get<std::string>() : values[k].dump();
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%02zu_", k);
    const fs::path sub = dir / (std::string(prefix) + sanitize(s.key + "=" + label));
    const SimResult r = simulate_into(configs[k], sub, f.threads, parse_format(f.format));
    nlohmann::json point = {{"value", values[k]}, {"dir", sub.string()}};

    if (richest) {
      if (!r.richest) throw ConfigError("--fit richest needs track_richest in the config");
      const auto summary = summary_json(r).at("richest");
      const auto& t = *r.richest;
      csv += label + ',' + std::to_string(configs[k].agents) + ',' + format_double(t.mean_lambda_max) + ',' +
             format_double(t.long_run_mean) + ',' +
             (summary["long_run_stderr"].is_null() ? "" : format_double(summary["long_run_stderr"].get<double>())) +
             ',' + (t.relaxation_steps ? std::to_string(*t.relaxation_steps) : "") + '\n';
      point["richest"] = summary;
      if (t.relaxation_steps && *t.relaxation_steps > 0) {
        log_x_tau.push_back(std::log(1.0 - t.mean_lambda_max));
        log_tau.push_back(std::log(static_cast<double>(*t.relaxation_steps)));
      }
      log_n.push_back(std::log(static_cast<double>(configs[k].agents)));
      log_mean.push_back(std::log(t.long_run_mean));
    } else if (s.fit != "none") {
      const Histogram* h = s.target == "money"       ? &r.pooled.money
                           : s.target == "wealth"    ? (r.pooled.wealth ? &*r.pooled.wealth : nullptr)
                           : s.target == "commodity" ? (r.pooled.commodity ? &*r.pooled.commodity : nullptr)
                                                     : (r.pooled.difference ? &*r.pooled.difference : nullptr);
      if (!h) throw ConfigError("sweep target " + s.target + " is not produced by this config");
      std::vector<DistributionEstimate> groups;
      for (const auto& g : r.groups) {
        const Histogram* gh = s.target == "money"       ? &g.money
                              : s.target == "wealth"    ? &*g.wealth
                              : s.target == "commodity" ? &*g.commodity
                                                        : &*g.difference;
        groups.push_back(gh->estimate());
      }
      try {
        const FitResult fit = fit_histogram(s.fit, h->estimate(), groups, TailWindowPolicy{s.top_fraction, 1.0});
        const std::string param = s.fit == "pareto" ? "nu" : s.fit == "gamma" ? "alpha" : "T";
        const auto& e = fit.at(param);
        csv += label + ',' + s.fit + ',' + s.target + ',' + param + ',' + format_double(e.value) + ',' +
               format_double(e.stderr_) + ',' + (fit.healthy ? "true" : "false") + '\n';
        nlohmann::json fj = fit;
        point["fit"] = fj;
      } catch (const AnalysisError& e) {
        csv += label + ',' + s.fit + ',' + s.target + ",,,,false\n";
        point["fit_error"] = e.what();
      }
    }
    points.push_back(point);
  }

  nlohmann::json summary = {{"key", s.key}, {"fit", s.fit}, {"points", points}};
  if (richest) {
    // A slope only makes sense when the swept key actually moved the abscissa.
    auto slope = [&](const char* name, const std::vector<double>& x, const std::vector<double>& y) {
      if (x.size() < 3 || std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) return;
      const LineFit l = least_squares(x, y);
      summary[name] = {{"slope", l.slope}, {"stderr", l.slope_stderr}, {"r2", l.r2}};
    };
    slope("relaxation_vs_one_minus_lambda_max", log_x_tau, log_tau);
    slope("mean_money_vs_agents", log_n, log_mean);
  }
  write_text_file(dir / "summary.csv", csv);
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << csv;
  return 0;
}

struct FitFlags {
  std::string histogram;
  std::string groups;
  std::string kind;
  std::string out;
  double top_fraction = 0.1;
  double decades = 1.0;
};

int cmd_fit(const FitFlags& f) {
  const DistributionEstimate pooled = read_histogram(f.histogram);
  std::vector<DistributionEstimate> groups;
  if (!f.groups.empty()) groups = read_grouped_histograms(f.groups);
  const FitResult fit = fit_histogram(f.kind, pooled, groups, TailWindowPolicy{f.top_fraction, f.decades});
  fs::path out = f.out;
  if (out.empty()) {
    const fs::path h(f.histogram);
    out = h.parent_path() / (h.stem().string() + "_fit_" + f.kind + ".json");
  }
  nlohmann::json j = fit;
  write_text_file(out, j.dump(2) + "\n");
  std::cout << fit_line(fit) << "\n";
  return 0;
}

int cmd_compare(const std::string& result_dir, const std::string& theory, const std::string& out_path) {
  const RunDirectory run = RunDirectory::load(result_dir);
  const nlohmann::json report = compare_with_theory(run, theory);
  const fs::path out = out_path.empty() ? fs::path(result_dir) / ("compare_" + sanitize(theory) + ".json") : fs::path(out_path);
  write_text_file(out, report.dump(2) + "\n");
  for (const auto& q : report.at("quantities")) {
    std::cout << q.at("quantity").get<std::string>() << ": simulated " << q.at("simulated") << ", predicted "
              << q.at("predicted") << ", tolerance " << q.at("tolerance") << " -> "
              << (q.at("pass").get<bool>() ? "pass" : "FAIL") << "\n";
  }
  return 0;
}

struct TheoryFlags {
  std::string quantity;
  std::string lambda_spec;
  double lambda = 0.0;
  double money = 0.0;
  long long agents = 0;
  double c = 0.0;
  std::string grid;
  std::string out;
};

std::vector<double> parse_grid(const std::string& text) {
  // lo:hi:n, logarithmically spaced
  double lo = 0, hi = 0;
  int n = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 2 || !(lo > 0.0) || !(hi > lo)) {
    throw ConfigError("--grid expects lo:hi:n with 0 < lo < hi and n >= 2");
  }
  std::vector<double> g;
  for (int k = 0; k < n; ++k) g.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
  return g;
}

LambdaDistSpec parse_spec(const std::string& text) {
  if (text.empty()) throw ConfigError("--lambda-spec is required for this quantity");
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) j = read_json_file(text);
  LambdaDistSpec spec;
  from_json(j, spec);
  return spec;
}

int cmd_theory(const TheoryFlags& f) {
  TheoryPrediction p;
  if (f.quantity == "gibbs") {
    p = predict_gibbs(f.money, f.agents);
  } else if (f.quantity == "gamma") {
    p = predict_gamma(f.lambda);
  } else if (f.quantity == "nu") {
    p = predict_pareto(parse_spec(f.lambda_spec));
  } else if (f.quantity == "density") {
    const auto grid = parse_grid(f.grid);
    p = predict_density(parse_spec(f.lambda_spec), f.c, grid);
  } else if (f.quantity == "mean_money") {
    std::vector<double> grid;
    for (int k = 0; k < 20; ++k) grid.push_back(0.05 * k);
    p = predict_mean_money_curve(f.c, grid);
  } else {
    throw ConfigError("unknown quantity " + f.quantity);
  }
  nlohmann::json j = p;
  const std::string text = j.dump(2) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(f.out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinex: kinetic wealth exchange simulations, fits and theory checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  RunFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "Run one experiment and write histograms, summary and manifest");
  add_run_flags(simulate, sim_flags);

  RunFlags sweep_flags;
  SweepFlags sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  add_run_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--key", sweep.key, "Dotted config key to vary, e.g. lambda.delta")->required();
  sweep_cmd->add_option("--values", sweep.values, "JSON array or comma-separated list")->required();
  sweep_cmd->add_option("--fit", sweep.fit, "Fit applied to every point")
      ->check(CLI::IsMember({"none", "pareto", "gamma", "exponential", "exponential_tail", "richest"}));
  sweep_cmd->add_option("--target", sweep.target, "Histogram to fit")
      ->check(CLI::IsMember({"money", "wealth", "commodity", "difference"}));
  sweep_cmd->add_option("--top-fraction", sweep.top_fraction, "Tail window start (upper mass fraction)");

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Fit a histogram CSV/JSON and write the FitResult as JSON");
  fit->add_option("--histogram", fit_flags.histogram, "Histogram file")->required();
  fit->add_option("--kind", fit_flags.kind, "Fit kind")
      ->required()
      ->check(CLI::IsMember({"pareto", "gamma", "exponential", "exponential_tail"}));
  fit->add_option("--groups", fit_flags.groups, "Per-group histograms for jackknife errors");
  fit->add_option("--top-fraction", fit_flags.top_fraction, "Tail window start (upper mass fraction)");
  fit->add_option("--decades", fit_flags.decades, "Tail window length in decades");
  fit->add_option("--out", fit_flags.out, "Output JSON (default: next to the histogram)");

  std::string result_dir, theory, compare_out;
  auto* compare = app.add_subcommand("compare", "Compare a run directory with a theoretical prediction");
  compare->add_option("--result", result_dir, "Directory written by simulate")->required();
  compare->add_option("--theory", theory, "gibbs, gamma[:lambda] or pareto")->required();
  compare->add_option("--out", compare_out, "Report path (default: <result>/compare_<theory>.json)");

  TheoryFlags tf;
  auto* theory_cmd = app.add_subcommand("theory", "Export a theoretical prediction as JSON");
  theory_cmd->add_option("--quantity", tf.quantity, "gibbs, gamma, nu, density, mean_money")
      ->required()
      ->check(CLI::IsMember({"gibbs", "gamma", "nu", "density", "mean_money"}));
  theory_cmd->add_option("--lambda-spec", tf.lambda_spec, "Lambda distribution as JSON text or a file");
  theory_cmd->add_option("--lambda", tf.lambda, "Saving propensity for gamma");
  theory_cmd->add_option("--money", tf.money, "Total money M for gibbs");
  theory_cmd->add_option("--agents", tf.agents, "Number of agents N for gibbs");
  theory_cmd->add_option("--c", tf.c, "Mean-field constant c");
  theory_cmd->add_option("--grid", tf.grid, "lo:hi:n, log-spaced money grid for density");
  theory_cmd->add_option("--out", tf.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_flags);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, sweep);
    if (*fit) return cmd_fit(fit_flags);
    if (*compare) return cmd_compare(result_dir, theory, compare_out);
    if (*theory_cmd) return cmd_theory(tf);
  } catch (const ConfigError& e) {
    std::cerr << "kinex: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "kinex: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "kinex: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
