#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcm::harness {

// Metric CSVs whose iteration grids disagree.
struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

MetricsTable read_metrics(const std::filesystem::path& path);

struct SummaryRow {
  std::int64_t iteration = 0;
  double env_steps = 0.0;  // mean across seeds
  std::size_t seeds = 0;
  double mean = 0.0;
  double half_width = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;  // a single seed: the interval collapses to the mean
};

// Two-sided t-interval half-width: t_{(1+level)/2, n-1} * s / sqrt(n), with
// s the sample standard deviation. 0 for n = 1.
double t_interval_half_width(const std::vector<double>& samples, double level = 0.90);

// Per-iteration cross-seed mean of mean_return with a 90% t-interval.
std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& csvs);
std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace gcm::harness
