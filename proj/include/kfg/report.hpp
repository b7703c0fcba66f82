#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace kfg {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Shortest round-trippable decimal form ("%.17g" fallback), so re-runs are
/// byte-comparable.
std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Line plot of the accuracy@D curve (D = 0..n-1) as a standalone SVG.
std::string accuracy_curve_svg(const std::vector<double>& accuracy);

/// Merges the run directory's CSV outputs (metrics.csv, accuracy_at_d.csv,
/// ablation.csv) into summary.txt and report.svg. Numbers are copied verbatim
/// from the CSVs. Throws listing every missing input.
void emit_report(const std::filesystem::path& run_dir);

}  // namespace kfg
