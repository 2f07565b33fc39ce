#pragma once

// Reading and writing run outputs: histogram CSV/JSON, run summaries, and the
// experiment manifest with file checksums.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinex/engine.hpp"
#include "kinex/histogram.hpp"

namespace kinex {

enum class OutputFormat { csv, json };

/// Shortest round-trip decimal form.
std::string format_double(double x);

/// "bin_left,bin_right,density,count\n" followed by one row per bin.
std::string histogram_csv(const DistributionEstimate& estimate);
/// "group,bin_left,bin_right,count\n", one block of rows per group.
std::string grouped_histogram_csv(const std::vector<DistributionEstimate>& groups);
nlohmann::json histogram_json(const DistributionEstimate& estimate);

DistributionEstimate parse_histogram_csv(const std::string& text);
std::vector<DistributionEstimate> parse_grouped_histogram_csv(const std::string& text);
DistributionEstimate histogram_from_json(const nlohmann::json& j);

/// Reads either format, chosen by file extension (.json or anything else as CSV).
DistributionEstimate read_histogram(const std::filesystem::path& path);
std::vector<DistributionEstimate> read_grouped_histograms(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::string sha256_hex(const std::string& data);

/// Deterministic digest of a run (no timestamps): moments, audits, burn-in,
/// lambda-conditioned statistics, richest-agent and condensation summaries.
nlohmann::json summary_json(const SimResult& result);

/// File name -> content for every output of a run. Nothing touches the disk
/// here, so a failed run leaves no partial output behind.
std::map<std::string, std::string> render_outputs(const SimResult& result, OutputFormat format);

struct ManifestInfo {
  std::string started_utc;
  std::string finished_utc;
  double wall_seconds = 0.0;
  unsigned threads = 1;
};

nlohmann::json manifest_json(const SimResult& result, const std::map<std::string, std::string>& files,
                             const ManifestInfo& info);

/// Writes the rendered outputs plus manifest.json into `dir` (created if needed).
void write_outputs(const std::filesystem::path& dir, const std::map<std::string, std::string>& files,
                   const nlohmann::json& manifest);

std::string utc_timestamp();

extern const char* const kToolVersion;

}  // namespace kinex
