#pragma once
// Plain-text columnar data for external plotting. Header lines start with '#'
// and name the observable each column holds.

#include <string>
#include <vector>

namespace gffc::app {

enum class PlotKind { profile, scaling, histogram };

PlotKind parse_plot_kind(const std::string& s);
std::string to_string(PlotKind k);

struct DataColumn {
  std::string name;
  std::string observable;
  std::vector<double> values;
};

struct DataTable {
  std::string title;
  std::vector<DataColumn> columns;
  const DataColumn* find(const std::string& name) const;
};

// profile and scaling need an abscissa plus at least one value column;
// histogram needs bin_lo, bin_hi and count. Ragged or empty tables are rejected.
void check_table(const DataTable& t, PlotKind kind);
std::string format_plotdata(const DataTable& t, PlotKind kind);
void emit_plotdata(const std::string& path, const DataTable& t, PlotKind kind);

// Equal-width histogram of xs on [lo, hi]; values outside are clamped into the end bins.
DataTable histogram_table(const std::string& title, const std::string& observable, const std::vector<double>& xs,
                          double lo, double hi, int bins);

}  // namespace gffc::app
