#pragma once

#include <string>
#include <vector>

namespace lamg {

struct PlotStyle {
  int width = 720;
  int height = 480;
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Five-number summary driving a box glyph: Tukey whiskers at the most
// extreme data points within 1.5 IQR of the box.
struct BoxStats {
  double lo = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double hi = 0.0;
};
BoxStats box_stats(const std::vector<double>& values);

struct BoxSpec {
  std::string label;
  std::vector<double> values;
};

void svg_scatter(const std::string& path, const std::vector<PlotSeries>& series,
                 const PlotStyle& style);
// Frequency polygons (binned counts joined by lines), one per series;
// series share the bin grid so their shapes are comparable.
void svg_frequency_polygons(const std::string& path,
                            const std::vector<std::pair<std::string, std::vector<double>>>& series,
                            int bins, const PlotStyle& style);
void svg_box_plot(const std::string& path, const std::vector<BoxSpec>& boxes,
                  const PlotStyle& style);

}  // namespace lamg
