#include "gffc/app/plotdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gffc/errors.hpp"

namespace gffc::app {

PlotKind parse_plot_kind(const std::string& s) {
  if (s == "profile") return PlotKind::profile;
  if (s == "scaling") return PlotKind::scaling;
  if (s == "histogram") return PlotKind::histogram;
  throw ConfigError("plotdata: unknown kind '" + s + "'");
}

std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::profile: return "profile";
    case PlotKind::scaling: return "scaling";
    case PlotKind::histogram: return "histogram";
  }
  return "?";
}

const DataColumn* DataTable::find(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

void check_table(const DataTable& t, PlotKind kind) {
  std::vector<std::string> missing;
  if (kind == PlotKind::histogram) {
    for (const char* name : {"bin_lo", "bin_hi", "count"})
      if (!t.find(name)) missing.push_back(name);
  } else if (t.columns.size() < 2) {
    missing.push_back(t.columns.empty() ? "abscissa" : "value");
  }
  if (!missing.empty()) {
    std::string m;
    for (const auto& s : missing) m += (m.empty() ? "" : ", ") + s;
    throw ConfigError("plotdata: " + to_string(kind) + " table '" + t.title + "' is missing columns: " + m);
  }
  const std::size_t rows = t.columns.front().values.size();
  if (rows == 0) throw ConfigError("plotdata: table '" + t.title + "' is empty");
  for (const auto& c : t.columns)
    if (c.values.size() != rows)
      throw ConfigError("plotdata: column '" + c.name + "' of '" + t.title + "' has a different length");
}

std::string format_plotdata(const DataTable& t, PlotKind kind) {
  check_table(t, kind);
  std::ostringstream os;
  os << "# " << t.title << "\n# kind: " << to_string(kind) << "\n";
  for (std::size_t j = 0; j < t.columns.size(); ++j)
    os << "# column " << j + 1 << ": " << t.columns[j].name << " = " << t.columns[j].observable << "\n";
  os << "#";
  for (const auto& c : t.columns) os << ' ' << c.name;
  os << "\n";
  char buf[32];
  for (std::size_t i = 0; i < t.columns.front().values.size(); ++i) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.10g", t.columns[j].values[i]);
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
  return os.str();
}

void emit_plotdata(const std::string& path, const DataTable& t, PlotKind kind) {
  const std::string body = format_plotdata(t, kind);
  std::ofstream os(path);
  if (!os) throw ConfigError("plotdata: cannot write " + path);
  os << body;
}

DataTable histogram_table(const std::string& title, const std::string& observable, const std::vector<double>& xs,
                          double lo, double hi, int bins) {
  if (!(hi > lo) || bins < 1) throw ConfigError("plotdata: bad histogram range");
  DataTable t{title, {{"bin_lo", "lower bin edge", {}}, {"bin_hi", "upper bin edge", {}}, {"count", observable, {}}}};
  std::vector<double> counts(bins, 0.0);
  const double w = (hi - lo) / bins;
  for (double x : xs) {
    int b = int(std::floor((x - lo) / w));
    counts[std::clamp(b, 0, bins - 1)] += 1.0;
  }
  for (int b = 0; b < bins; ++b) {
    t.columns[0].values.push_back(lo + b * w);
    t.columns[1].values.push_back(lo + (b + 1) * w);
    t.columns[2].values.push_back(counts[b]);
  }
  return t;
}

}  // namespace gffc::app
