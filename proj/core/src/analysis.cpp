#include "idat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace idat {

Histogram weight_histogram(std::span<const float> values, int bins,
                           std::optional<std::pair<double, double>> range) {
  if (values.empty()) throw UsageError("weight_histogram requires values");
  if (bins < 1) throw UsageError("weight_histogram requires bins >= 1");
  double lo, hi;
  if (range) {
    lo = range->first;
    hi = range->second;
    if (lo > hi) throw UsageError("histogram range must satisfy lo <= hi");
  } else {
    lo = hi = values[0];
    for (float v : values) {
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
    }
  }
  Histogram h;
  if (lo == hi) {
    // Degenerate range: one bin holding everything at that value.
    for (float v : values) {
      if (static_cast<double>(v) != lo) {
        throw UsageError("histogram range excludes a value");
      }
    }
    h.edges = {lo, hi};
    h.counts = {static_cast<long>(values.size())};
    return h;
  }
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) {
    h.edges[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / bins;
  }
  h.edges.front() = lo;
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (float fv : values) {
    const double v = fv;
    if (v < lo || v > hi) {
      throw UsageError("histogram range excludes a value");
    }
    int idx = static_cast<int>((v - lo) / width);
    if (idx >= bins) idx = bins - 1;  // top edge closes the last bin
    // Guard against rounding placing v below its true bin boundary.
    while (idx > 0 && v < h.edges[static_cast<std::size_t>(idx)]) --idx;
    while (idx < bins - 1 && v >= h.edges[static_cast<std::size_t>(idx) + 1]) ++idx;
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

DispersionStats dispersion_stats(std::span<const float> values, double tau) {
  if (values.size() < 2) {
    throw UsageError("dispersion_stats requires at least two values");
  }
  DispersionStats s;
  s.count = values.size();
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (float v : values) mean += v;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  long near_zero = 0;
  for (float v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
    if (std::fabs(static_cast<double>(v)) < tau) ++near_zero;
  }
  m2 /= n;
  m4 /= n;
  s.mean = mean;
  s.stddev = std::sqrt(m2);
  s.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  s.near_zero_fraction = static_cast<double>(near_zero) / n;
  return s;
}

double max_abs_adapter_weight(std::span<const Parameter> params) {
  double m = 0.0;
  for (const Parameter& p : params) {
    if (!is_adapter_param(p.name)) continue;
    if (p.name.find(".w_down") == std::string::npos &&
        p.name.find(".w_up") == std::string::npos) {
      continue;
    }
    for (float v : p.tensor.values()) {
      m = std::max(m, std::fabs(static_cast<double>(v)));
    }
  }
  return m;
}

namespace {

std::optional<int> adapter_layer_of(const std::string& name) {
  // block.<i>.adapter.<matrix>
  if (!is_adapter_param(name) || name.rfind("block.", 0) != 0) return {};
  try {
    return std::stoi(name.substr(6));
  } catch (...) {
    return {};
  }
}

}  // namespace

WeightReport build_weight_report(std::span<const Parameter> params,
                                 std::string label, int bins,
                                 std::optional<double> half_range, double tau) {
  WeightReport report;
  report.label = std::move(label);
  std::optional<std::pair<double, double>> range;
  if (half_range) {
    range = std::make_pair(-*half_range, *half_range);
    if (*half_range == 0.0) range = std::make_pair(0.0, 0.0);
  }
  for (const Parameter& p : params) {
    const bool down = p.name.find(".w_down") != std::string::npos;
    const bool up = p.name.find(".w_up") != std::string::npos;
    if (!is_adapter_param(p.name) || (!down && !up)) continue;
    const auto layer = adapter_layer_of(p.name);
    if (!layer) continue;
    WeightReportEntry entry;
    entry.layer = *layer;
    entry.matrix = down ? "w_down" : "w_up";
    entry.hist = weight_histogram(p.tensor.values(), bins, range);
    entry.stats = dispersion_stats(p.tensor.values(), tau);
    report.entries.push_back(std::move(entry));
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const WeightReportEntry& a, const WeightReportEntry& b) {
              if (a.layer != b.layer) return a.layer < b.layer;
              return a.matrix < b.matrix;
            });
  return report;
}

CompareSummary compare_reports(
    const WeightReport& a, const WeightReport& b,
    std::optional<std::vector<std::pair<std::size_t, std::size_t>>> pairing) {
  if (a.entries.empty() || b.entries.empty()) {
    throw UsageError("compare_reports requires non-empty reports");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (pairing) {
    pairs = *pairing;
    for (const auto& [ia, ib] : pairs) {
      if (ia >= a.entries.size() || ib >= b.entries.size()) {
        throw UsageError("explicit pairing index out of range");
      }
    }
  } else {
    auto layers_of = [](const WeightReport& r) {
      std::vector<int> layers;
      for (const auto& e : r.entries) {
        if (layers.empty() || layers.back() != e.layer) layers.push_back(e.layer);
      }
      return layers;
    };
    auto find_entry = [](const WeightReport& r, int layer, const std::string& m)
        -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < r.entries.size(); ++i) {
        if (r.entries[i].layer == layer && r.entries[i].matrix == m) return i;
      }
      return {};
    };
    const std::vector<int> la = layers_of(a), lb = layers_of(b);
    // The shallower report drives; its layers map proportionally onto the
    // deeper one so every driving entry gets a partner.
    const bool a_drives = la.size() <= lb.size();
    const auto& drive = a_drives ? la : lb;
    const auto& follow = a_drives ? lb : la;
    for (std::size_t i = 0; i < drive.size(); ++i) {
      const std::size_t j =
          drive.size() == 1
              ? 0
              : (i * (follow.size() - 1) + (drive.size() - 1) / 2) / (drive.size() - 1);
      for (const char* m : {"w_down", "w_up"}) {
        const auto ea = find_entry(a, a_drives ? drive[i] : follow[j], m);
        const auto eb = find_entry(b, a_drives ? follow[j] : drive[i], m);
        if (!ea || !eb) {
          throw UsageError("reports disagree on matrix structure (missing " +
                           std::string(m) + ")");
        }
        pairs.emplace_back(*ea, *eb);
      }
    }
  }

  CompareSummary summary;
  summary.label_a = a.label;
  summary.label_b = b.label;
  for (const auto& [ia, ib] : pairs) {
    const WeightReportEntry& ea = a.entries[ia];
    const WeightReportEntry& eb = b.entries[ib];
    if (ea.matrix != eb.matrix) {
      throw UsageError("pairing mixes w_down with w_up");
    }
    CompareRow row;
    row.matrix = ea.matrix;
    row.layer_a = ea.layer;
    row.layer_b = eb.layer;
    row.std_ratio = eb.stats.stddev == 0.0
                        ? (ea.stats.stddev == 0.0 ? 1.0 : HUGE_VAL)
                        : ea.stats.stddev / eb.stats.stddev;
    row.kurtosis_diff = ea.stats.excess_kurtosis - eb.stats.excess_kurtosis;
    if (ea.stats.stddev > eb.stats.stddev) {
      row.higher_std = DispersionFlag::kFirst;
    } else if (ea.stats.stddev < eb.stats.stddev) {
      row.higher_std = DispersionFlag::kSecond;
    }
    const bool a_disp = ea.stats.stddev > eb.stats.stddev &&
                        ea.stats.excess_kurtosis < eb.stats.excess_kurtosis;
    const bool b_disp = eb.stats.stddev > ea.stats.stddev &&
                        eb.stats.excess_kurtosis < ea.stats.excess_kurtosis;
    if (a_disp) {
      row.more_dispersed = DispersionFlag::kFirst;
    } else if (b_disp) {
      row.more_dispersed = DispersionFlag::kSecond;
    }
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

namespace {

void write_double(std::ostream& os, double v) {
  std::ostringstream tmp;
  tmp.precision(17);
  tmp << v;
  os << tmp.str();
}

}  // namespace

std::filesystem::path write_report_csv(const WeightReport& report,
                                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (report.label + "__weights.csv");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError("cannot write report csv: " + path.string());
  os << "layer,matrix,bin_lo,bin_hi,count\n";
  for (const auto& e : report.entries) {
    for (std::size_t i = 0; i < e.hist.counts.size(); ++i) {
      os << e.layer << "," << e.matrix << ",";
      write_double(os, e.hist.edges[i]);
      os << ",";
      write_double(os, e.hist.edges[i + 1]);
      os << "," << e.hist.counts[i] << "\n";
    }
  }
  return path;
}

std::filesystem::path write_report_stats(const WeightReport& report,
                                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (report.label + "__stats.txt");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError("cannot write report stats: " + path.string());
  os << "{\n  \"label\": \"" << report.label << "\",\n  \"matrices\": [\n";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    os << "    {\"layer\": " << e.layer << ", \"matrix\": \"" << e.matrix
       << "\", \"count\": " << e.stats.count << ", \"mean\": ";
    write_double(os, e.stats.mean);
    os << ", \"std\": ";
    write_double(os, e.stats.stddev);
    os << ", \"excess_kurtosis\": ";
    write_double(os, e.stats.excess_kurtosis);
    os << ", \"near_zero_fraction\": ";
    write_double(os, e.stats.near_zero_fraction);
    os << "}" << (i + 1 < report.entries.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return path;
}

std::string format_compare_summary(const CompareSummary& summary) {
  std::ostringstream os;
  os << "comparison: " << summary.label_a << " vs " << summary.label_b << "\n";
  long long a_votes = 0, b_votes = 0;
  for (const auto& row : summary.rows) {
    os << "  layer " << row.layer_a << "/" << row.layer_b << " " << row.matrix
       << ": std_ratio=";
    os.precision(6);
    os << row.std_ratio << " kurtosis_diff=" << row.kurtosis_diff
       << " more_dispersed=";
    switch (row.more_dispersed) {
      case DispersionFlag::kFirst:
        os << summary.label_a;
        ++a_votes;
        break;
      case DispersionFlag::kSecond:
        os << summary.label_b;
        ++b_votes;
        break;
      case DispersionFlag::kNeutral:
        os << "neutral";
        break;
    }
    os << "\n";
  }
  os << "  overall: " << summary.label_a << " more dispersed in " << a_votes
     << " of " << summary.rows.size() << " pairs, " << summary.label_b
     << " in " << b_votes << "\n";
  return os.str();
}

}  // namespace idat
