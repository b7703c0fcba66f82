#include "kfg/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kfg {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  // Shortest representation that parses back to the same double.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v || (std::isnan(back) && std::isnan(v))) return buf;
  }
  return buf;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (size_t i = 0; i < table.header.size(); ++i) {
    if (i) os << ",";
    os << table.header[i];
  }
  os << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::runtime_error("csv row width mismatch writing " + path.string());
    }
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      os << row[i];
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty csv");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    table.rows.push_back(split(line));
    if (table.rows.back().size() != table.header.size()) {
      throw std::runtime_error(path.string() + ": ragged csv row " +
                               std::to_string(table.rows.size()));
    }
  }
  return table;
}

std::string accuracy_curve_svg(const std::vector<double>& accuracy) {
  if (accuracy.empty()) throw std::invalid_argument("accuracy curve is empty");
  const int width = 640, height = 420;
  const int ml = 60, mr = 20, mt = 30, mb = 50;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  const size_t n = accuracy.size();

  auto px = [&](size_t d) {
    return ml + (n == 1 ? 0.0 : plot_w * static_cast<double>(d) / static_cast<double>(n - 1));
  };
  auto py = [&](double acc) { return mt + plot_h * (1.0 - acc); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "  <text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
     << "Key-frame localization accuracy vs frame tolerance</text>\n";
  // Axes.
  os << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
     << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 10; tick += 2) {
    double acc = tick / 10.0;
    os << "  <text x=\"" << ml - 8 << "\" y=\"" << py(acc) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(acc) << "</text>\n";
    os << "  <line x1=\"" << ml - 4 << "\" y1=\"" << py(acc) << "\" x2=\"" << ml << "\" y2=\""
       << py(acc) << "\" stroke=\"black\"/>\n";
  }
  for (size_t d = 0; d < n; d += (n > 16 ? 4 : 1)) {
    os << "  <text x=\"" << px(d) << "\" y=\"" << mt + plot_h + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">" << d << "</text>\n";
  }
  os << "  <text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">frame distance tolerance D</text>\n";
  os << "  <polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  for (size_t d = 0; d < n; ++d) {
    if (d) os << " ";
    os << px(d) << "," << py(accuracy[d]);
  }
  os << "\"/>\n";
  for (size_t d = 0; d < n; ++d) {
    os << "  <circle cx=\"" << px(d) << "\" cy=\"" << py(accuracy[d])
       << "\" r=\"2.5\" fill=\"#1f6fb2\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

void append_table(std::ostream& os, const std::string& title, const CsvTable& table) {
  os << title << "\n";
  std::vector<size_t> width(table.header.size());
  for (size_t i = 0; i < table.header.size(); ++i) width[i] = table.header[i].size();
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      os << (i ? "  " : "  ") << cells[i] << std::string(width[i] - cells[i].size(), ' ');
    }
    os << "\n";
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  os << "\n";
}

}  // namespace

void emit_report(const fs::path& run_dir) {
  const fs::path metrics_path = run_dir / "metrics.csv";
  const fs::path accuracy_path = run_dir / "accuracy_at_d.csv";
  const fs::path ablation_path = run_dir / "ablation.csv";

  std::vector<std::string> missing;
  for (const auto& p : {metrics_path, accuracy_path, ablation_path}) {
    if (!fs::exists(p)) missing.push_back(p.filename().string());
  }
  if (!missing.empty()) {
    std::string joined;
    for (size_t i = 0; i < missing.size(); ++i) joined += (i ? ", " : "") + missing[i];
    throw std::runtime_error("report: missing inputs in " + run_dir.string() + ": " + joined);
  }

  CsvTable metrics = read_csv(metrics_path);
  CsvTable accuracy = read_csv(accuracy_path);
  CsvTable ablation = read_csv(ablation_path);

  std::ofstream os(run_dir / "summary.txt", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write summary.txt");
  os << "Run summary (" << run_dir.string() << ")\n\n";
  append_table(os, "Classification metrics (per fold and mean)", metrics);
  append_table(os, "Key-frame localization accuracy at tolerance D", accuracy);
  append_table(os, "Ablation grid", ablation);

  std::vector<double> curve;
  for (const auto& row : accuracy.rows) curve.push_back(std::stod(row.at(1)));
  std::ofstream svg(run_dir / "report.svg", std::ios::trunc);
  svg << accuracy_curve_svg(curve);
  if (!svg) throw std::runtime_error("cannot write report.svg");
}

}  // namespace kfg
