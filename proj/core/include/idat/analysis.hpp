#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idat/model.hpp"

namespace idat {

struct Histogram {
  std::vector<double> edges;  // bins + 1, strictly increasing
  std::vector<long> counts;   // conserve the input count exactly

  long total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
  }
};

// Left-closed right-open bins, except the last bin which is closed. With no
// explicit range, [min, max] of the values is used; a degenerate range
// (min == max) collapses to a single bin.
Histogram weight_histogram(std::span<const float> values, int bins,
                           std::optional<std::pair<double, double>> range = {});

struct DispersionStats {
  double mean = 0.0;
  double stddev = 0.0;           // population
  double excess_kurtosis = 0.0;  // Fisher: m4/m2^2 - 3
  double near_zero_fraction = 0.0;
  std::size_t count = 0;
};

DispersionStats dispersion_stats(std::span<const float> values, double tau = 1e-3);

struct WeightReportEntry {
  int layer = 0;
  std::string matrix;  // "w_down" or "w_up"
  Histogram hist;
  DispersionStats stats;
};

struct WeightReport {
  std::string label;
  std::vector<WeightReportEntry> entries;
};

// Largest |w| across the adapter weight matrices of all parameter sets;
// used as the shared symmetric histogram range so reports overlay.
double max_abs_adapter_weight(std::span<const Parameter> params);

// One entry per block and per adapter matrix (biases excluded). half_range
// m yields 'bins' uniform bins over [-m, m]; when absent each matrix uses
// its own [min, max].
WeightReport build_weight_report(std::span<const Parameter> params,
                                 std::string label, int bins = 101,
                                 std::optional<double> half_range = {},
                                 double tau = 1e-3);

enum class DispersionFlag { kFirst, kSecond, kNeutral };

struct CompareRow {
  std::string matrix;
  int layer_a = 0;
  int layer_b = 0;
  double std_ratio = 1.0;      // a / b
  double kurtosis_diff = 0.0;  // a - b
  DispersionFlag higher_std = DispersionFlag::kNeutral;
  DispersionFlag more_dispersed = DispersionFlag::kNeutral;
};

struct CompareSummary {
  std::string label_a;
  std::string label_b;
  std::vector<CompareRow> rows;
};

// Pairs entries of the two reports and reports per-pair dispersion
// ordering. Identical structures pair by (layer, matrix); otherwise layers
// are matched proportionally by depth (every entry of the shallower report
// is paired). An explicit pairing overrides both.
CompareSummary compare_reports(
    const WeightReport& a, const WeightReport& b,
    std::optional<std::vector<std::pair<std::size_t, std::size_t>>> pairing = {});

// <label>__weights.csv with columns layer,matrix,bin_lo,bin_hi,count and
// <label>__stats.txt with one JSON stats record per matrix.
std::filesystem::path write_report_csv(const WeightReport& report,
                                       const std::filesystem::path& dir);
std::filesystem::path write_report_stats(const WeightReport& report,
                                         const std::filesystem::path& dir);

std::string format_compare_summary(const CompareSummary& summary);

}  // namespace idat
