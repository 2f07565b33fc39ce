#include "kinex/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "kinex/error.hpp"
#include "kinex/stats.hpp"

namespace kinex {

#ifndef KINEX_VERSION
#define KINEX_VERSION "0.0.0"
#endif

const char* const kToolVersion = KINEX_VERSION;

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("not a number in CSV: \"" + s + "\"");
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Log binnings are recognized by a constant edge ratio (after an optional
// zero-based underflow bin); anything else is treated as linear.
BinScale infer_scale(const std::vector<double>& edges) {
  const std::size_t first = edges.front() == 0.0 ? 1 : 0;
  if (edges.size() - first < 3 || edges[first] <= 0.0) return first == 1 ? BinScale::logarithmic : BinScale::linear;
  const double ratio = edges[first + 1] / edges[first];
  for (std::size_t k = first + 1; k + 1 < edges.size(); ++k) {
    if (std::abs(edges[k + 1] / edges[k] - ratio) > 1e-6 * ratio) return BinScale::linear;
  }
  return BinScale::logarithmic;
}

DistributionEstimate from_rows(const std::vector<double>& left, const std::vector<double>& right,
                               const std::vector<double>& counts) {
  if (left.empty()) throw ConfigError("histogram has no rows");
  std::vector<double> edges(left);
  edges.push_back(right.back());
  for (std::size_t k = 0; k + 1 < left.size(); ++k) {
    if (right[k] != left[k + 1]) throw ConfigError("histogram rows are not contiguous");
  }
  for (double c : counts) {
    if (!(c >= 0.0)) throw ConfigError("histogram has a negative count");
  }
  DistributionEstimate e;
  try {
    e.binning = Binning::from_edges(edges, infer_scale(edges));
  } catch (const ContractViolation& err) {
    throw ConfigError(std::string("bad histogram edges: ") + err.what());
  }
  e.counts = counts;
  return e;
}

nlohmann::json moments_json(std::span<const PowerSums> groups) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : moments(groups, 4)) {
    arr.push_back({{"order", m.order}, {"value", finite_or_null(m.value)}, {"stderr", finite_or_null(m.stderr_)}});
  }
  return arr;
}

template <class T>
nlohmann::json range_json(const std::vector<T>& v) {
  if (v.empty()) return nullptr;
  double sum = 0.0;
  for (T x : v) sum += static_cast<double>(x);
  return {{"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())},
          {"mean", sum / static_cast<double>(v.size())}};
}

std::string lambda_conditional_csv(const LambdaConditional& acc) {
  std::string out = "lambda_lo,lambda_hi,count,mean_lambda,mean_money,unsaved_product,most_probable\n";
  const auto rows = conditional_money_by_lambda(acc);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    out += format_double(acc.lambda_edges()[b]) + ',' + format_double(acc.lambda_edges()[b + 1]);
    if (rows[b]) {
      const auto& r = *rows[b];
      out += ',' + format_double(r.count) + ',' + format_double(r.mean_lambda) + ',' + format_double(r.mean_money) +
             ',' + format_double(r.unsaved_product) + ',' + format_double(r.most_probable);
    } else {
      out += ",0,,,,";
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string histogram_csv(const DistributionEstimate& e) {
  std::string out = "bin_left,bin_right,density,count\n";
  const double total = e.total();
  for (std::size_t i = 0; i < e.bins(); ++i) {
    const double density = total > 0.0 ? e.counts[i] / (total * e.width(i)) : 0.0;
    out += format_double(e.left(i)) + ',' + format_double(e.right(i)) + ',' + format_double(density) + ',' +
           format_double(e.counts[i]) + '\n';
  }
  return out;
}

std::string grouped_histogram_csv(const std::vector<DistributionEstimate>& groups) {
  std::string out = "group,bin_left,bin_right,count\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& e = groups[g];
    for (std::size_t i = 0; i < e.bins(); ++i) {
      out += std::to_string(g) + ',' + format_double(e.left(i)) + ',' + format_double(e.right(i)) + ',' +
             format_double(e.counts[i]) + '\n';
    }
  }
  return out;
}

nlohmann::json histogram_json(const DistributionEstimate& e) {
  std::vector<double> left, right, density;
  const double total = e.total();
  for (std::size_t i = 0; i < e.bins(); ++i) {
    left.push_back(e.left(i));
    right.push_back(e.right(i));
    density.push_back(total > 0.0 ? e.counts[i] / (total * e.width(i)) : 0.0);
  }
  return {{"bin_left", left}, {"bin_right", right}, {"density", density}, {"count", e.counts}};
}

DistributionEstimate parse_histogram_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front() != "bin_left,bin_right,density,count") {
    throw ConfigError("histogram CSV must start with the header bin_left,bin_right,density,count");
  }
  std::vector<double> left, right, counts;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto f = split_line(lines[k]);
    if (f.size() != 4) throw ConfigError("histogram CSV row " + std::to_string(k) + " does not have 4 fields");
    left.push_back(parse_double(f[0]));
    right.push_back(parse_double(f[1]));
    counts.push_back(parse_double(f[3]));
  }
  return from_rows(left, right, counts);
}

std::vector<DistributionEstimate> parse_grouped_histogram_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front() != "group,bin_left,bin_right,count") {
    throw ConfigError("grouped histogram CSV must start with the header group,bin_left,bin_right,count");
  }
  std::vector<DistributionEstimate> out;
  std::vector<double> left, right, counts;
  long current = -1;
  auto flush = [&] {
    if (!left.empty()) out.push_back(from_rows(left, right, counts));
    left.clear();
    right.clear();
    counts.clear();
  };
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto f = split_line(lines[k]);
    if (f.size() != 4) throw ConfigError("grouped CSV row " + std::to_string(k) + " does not have 4 fields");
    const long g = std::stol(f[0]);
    if (g != current) {
      if (g != current + 1) throw ConfigError("grouped CSV groups must be numbered 0, 1, 2, ... in order");
      flush();
      current = g;
    }
    left.push_back(parse_double(f[1]));
    right.push_back(parse_double(f[2]));
    counts.push_back(parse_double(f[3]));
  }
  flush();
  return out;
}

DistributionEstimate histogram_from_json(const nlohmann::json& j) {
  try {
    return from_rows(j.at("bin_left").get<std::vector<double>>(), j.at("bin_right").get<std::vector<double>>(),
                     j.at("count").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad histogram JSON: ") + e.what());
  }
}

DistributionEstimate read_histogram(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".json") {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
    return histogram_from_json(j);
  }
  return parse_histogram_csv(text);
}

std::vector<DistributionEstimate> read_grouped_histograms(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".json") {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ConfigError(path.string() + " is not a JSON array of histograms");
    std::vector<DistributionEstimate> out;
    for (const auto& h : j) out.push_back(histogram_from_json(h));
    return out;
  }
  return parse_grouped_histogram_csv(text);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SimulationError("cannot write " + path.string());
  out << content;
  if (!out) throw SimulationError("failed writing " + path.string());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw SimulationError("SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

nlohmann::json summary_json(const SimResult& r) {
  const SimConfig& c = r.config;
  nlohmann::json j;
  j["model"] = to_string(c.model);
  j["agents"] = c.agents;
  j["ensembles"] = c.ensembles;
  j["sample_ticks_per_ensemble"] = r.sample_ticks;
  j["observations"] = r.pooled.money.total();
  j["jackknife_groups"] = r.groups.size();

  std::vector<PowerSums> sums;
  for (const auto& g : r.groups) sums.push_back(g.money_sums);
  j["money_moments"] = moments_json(sums);
  nlohmann::json gs = nlohmann::json::array();
  for (const auto& s : sums) {
    gs.push_back({{"count", s.count}, {"power", s.power}, {"log_sum", s.log_sum}, {"positive_count", s.positive_count}});
  }
  j["money_power_sums"] = gs;

  j["conservation"] = {{"checks", r.audit.checks},
                       {"max_money_deviation", r.audit.max_money_deviation},
                       {"max_commodity_deviation", r.audit.max_commodity_deviation},
                       {"tolerance", kConservationTolerance}};
  j["trades"] = {{"attempted", r.trades.attempted},
                 {"rejected", r.trades.rejected},
                 {"max_consecutive_rejections", r.trades.max_consecutive_rejections}};
  j["burn_in"] = {{"automatic", r.burn_in.automatic},
                  {"detected", range_json(r.burn_in.detected)},
                  {"performed", range_json(r.burn_in.performed)}};

  if (r.pooled.by_lambda) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : conditional_money_by_lambda(*r.pooled.by_lambda)) {
      if (!row) {
        rows.push_back(nullptr);
        continue;
      }
      rows.push_back({{"lambda_lo", row->lambda_lo},
                      {"lambda_hi", row->lambda_hi},
                      {"count", row->count},
                      {"mean_lambda", row->mean_lambda},
                      {"mean_money", row->mean_money},
                      {"unsaved_product", row->unsaved_product},
                      {"most_probable", row->most_probable}});
    }
    j["lambda_conditional"] = rows;
  }
  if (r.richest) {
    const auto& t = *r.richest;
    double se = std::numeric_limits<double>::quiet_NaN();
    if (t.ensemble_means.size() > 1) {
      double ss = 0.0;
      for (double v : t.ensemble_means) ss += (v - t.long_run_mean) * (v - t.long_run_mean);
      const auto n = static_cast<double>(t.ensemble_means.size());
      se = std::sqrt(ss / (n - 1.0) / n);
    }
    j["richest"] = {{"stride", t.stride},
                    {"mean_lambda_max", t.mean_lambda_max},
                    {"long_run_mean", t.long_run_mean},
                    {"long_run_stderr", finite_or_null(se)},
                    {"relaxation_steps", t.relaxation_steps ? nlohmann::json(*t.relaxation_steps) : nlohmann::json(nullptr)}};
  }
  if (r.condensation) {
    const auto& t = *r.condensation;
    std::size_t reached = 0;
    for (auto s : t.first_passage) reached += s >= 0 ? 1 : 0;
    j["condensation"] = {{"threshold", t.threshold},
                         {"reached", reached},
                         {"fraction_reached", static_cast<double>(reached) / static_cast<double>(t.first_passage.size())},
                         {"first_passage", t.first_passage},
                         {"final_max_share", range_json(t.final_max_share)}};
  }
  return j;
}

std::map<std::string, std::string> render_outputs(const SimResult& r, OutputFormat format) {
  std::map<std::string, std::string> files;
  auto add = [&](const std::string& stem, const Histogram& pooled, auto member) {
    std::vector<DistributionEstimate> groups;
    for (const auto& g : r.groups) groups.push_back((g.*member)->estimate());
    if (format == OutputFormat::csv) {
      files[stem + ".csv"] = histogram_csv(pooled.estimate());
      files[stem + "_groups.csv"] = grouped_histogram_csv(groups);
    } else {
      files[stem + ".json"] = histogram_json(pooled.estimate()).dump(1) + "\n";
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& g : groups) arr.push_back(histogram_json(g));
      files[stem + "_groups.json"] = arr.dump(1) + "\n";
    }
  };
  {
    std::vector<DistributionEstimate> groups;
    for (const auto& g : r.groups) groups.push_back(g.money.estimate());
    if (format == OutputFormat::csv) {
      files["money.csv"] = histogram_csv(r.pooled.money.estimate());
      files["money_groups.csv"] = grouped_histogram_csv(groups);
    } else {
      files["money.json"] = histogram_json(r.pooled.money.estimate()).dump(1) + "\n";
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& g : groups) arr.push_back(histogram_json(g));
      files["money_groups.json"] = arr.dump(1) + "\n";
    }
  }
  if (r.pooled.commodity) {
    add("commodity", *r.pooled.commodity, &Accumulators::commodity);
    add("wealth", *r.pooled.wealth, &Accumulators::wealth);
  }
  if (r.pooled.difference) add("difference", *r.pooled.difference, &Accumulators::difference);
  if (r.pooled.by_lambda) files["lambda_conditional.csv"] = lambda_conditional_csv(*r.pooled.by_lambda);
  if (r.richest) {
    std::string out = "step,mean_money\n";
    for (std::size_t k = 0; k < r.richest->mean_money.size(); ++k) {
      out += std::to_string(static_cast<std::int64_t>(k) * r.richest->stride) + ',' +
             format_double(r.richest->mean_money[k]) + '\n';
    }
    files["richest.csv"] = out;
  }
  files["summary.json"] = summary_json(r).dump(2) + "\n";
  return files;
}

nlohmann::json manifest_json(const SimResult& r, const std::map<std::string, std::string>& files,
                             const ManifestInfo& info) {
  nlohmann::json inventory = nlohmann::json::array();
  for (const auto& [name, content] : files) {
    inventory.push_back({{"name", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }
  return {{"tool", "kinex"},
          {"version", kToolVersion},
          {"config", config_to_json(r.config)},
          {"seed", r.config.seed},
          {"started_utc", info.started_utc},
          {"finished_utc", info.finished_utc},
          {"wall_seconds", info.wall_seconds},
          {"threads", info.threads},
          {"conservation",
           {{"checks", r.audit.checks},
            {"max_money_deviation", r.audit.max_money_deviation},
            {"max_commodity_deviation", r.audit.max_commodity_deviation},
            {"tolerance", kConservationTolerance},
            {"passed", true}}},
          {"files", inventory}};
}

void write_outputs(const std::filesystem::path& dir, const std::map<std::string, std::string>& files,
                   const nlohmann::json& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw SimulationError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [name, content] : files) write_text_file(dir / name, content);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace kinex
