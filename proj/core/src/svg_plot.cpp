#include "lamg/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lamg/errors.hpp"
#include "lamg/stats.hpp"

namespace lamg {

namespace {

const char* kPalette[] = {"#4472c4", "#c44440", "#44a060", "#c49a44", "#7a52a8", "#4aa0b4"};
constexpr int kPaletteSize = 6;

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

// Short human label for tick values; %g keeps 1e-3 readable.
std::string fmt_tick(double x) {
  if (x != 0.0 && (std::abs(x) >= 1e4 || std::abs(x) < 1e-3)) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0e", x);
    return buf;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", x);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

struct Canvas {
  std::ostringstream body;
  int width, height;

  Canvas(int w, int h) : width(w), height(h) {}

  void line(double x1, double y1, double x2, double y2, const std::string& color,
            double sw = 1.0) {
    body << "<line x1=\"" << fmt2(x1) << "\" y1=\"" << fmt2(y1) << "\" x2=\"" << fmt2(x2)
         << "\" y2=\"" << fmt2(y2) << "\" stroke=\"" << color << "\" stroke-width=\""
         << fmt2(sw) << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke) {
    body << "<rect x=\"" << fmt2(x) << "\" y=\"" << fmt2(y) << "\" width=\"" << fmt2(w)
         << "\" height=\"" << fmt2(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
         << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body << "<circle cx=\"" << fmt2(x) << "\" cy=\"" << fmt2(y) << "\" r=\"" << fmt2(r)
         << "\" fill=\"" << fill << "\" fill-opacity=\"0.75\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
    body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) body << fmt2(x) << "," << fmt2(y) << " ";
    body << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "middle",
            int size = 12, const std::string& transform = "") {
    body << "<text x=\"" << fmt2(x) << "\" y=\"" << fmt2(y) << "\" font-family=\"sans-serif\""
         << " font-size=\"" << size << "\" text-anchor=\"" << anchor << "\"";
    if (!transform.empty()) body << " transform=\"" << transform << "\"";
    body << ">" << xml_escape(s) << "</text>\n";
  }

  void save(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
  }
};

// One linear or log10 data axis mapped onto a pixel interval.
struct Axis {
  double lo = 0.0, hi = 1.0;
  double px_lo = 0.0, px_hi = 1.0;
  bool log = false;

  void fit(double data_lo, double data_hi, bool want_log) {
    log = want_log && data_lo > 0.0;
    lo = data_lo;
    hi = data_hi;
    if (log) {
      lo = std::log10(data_lo);
      hi = std::log10(data_hi);
    }
    if (hi - lo < 1e-12) {
      const double pad = std::max(1e-12, std::abs(lo) * 0.1 + 0.5);
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.06;
      lo -= pad;
      hi += pad;
    }
  }
  double px(double v) const {
    const double t = ((log ? std::log10(v) : v) - lo) / (hi - lo);
    return px_lo + t * (px_hi - px_lo);
  }
  // Tick positions in data units.
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int k = static_cast<int>(std::ceil(lo)); k <= static_cast<int>(std::floor(hi)); ++k)
        out.push_back(std::pow(10.0, k));
      if (out.size() >= 2) return out;
      // narrow log range: fall back to linear ticks in raw units
    }
    const double raw_lo = log ? std::pow(10.0, lo) : lo;
    const double raw_hi = log ? std::pow(10.0, hi) : hi;
    const double span = raw_hi - raw_lo;
    double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
    if (span / step > 10.0) step *= 2.0;
    if (span / step > 10.0) step *= 2.5;
    if (span / step > 10.0) step *= 2.0;
    out.clear();
    for (double v = std::ceil(raw_lo / step) * step; v <= raw_hi + step * 1e-9; v += step)
      if (!log || v > 0.0) out.push_back(v);
    return out;
  }
};

struct Frame {
  Canvas canvas;
  Axis x, y;
  double left = 64, right = 18, top = 34, bottom = 48;

  Frame(const PlotStyle& s, double xlo, double xhi, double ylo, double yhi)
      : canvas(s.width, s.height) {
    x.fit(xlo, xhi, s.log_x);
    y.fit(ylo, yhi, s.log_y);
    x.px_lo = left;
    x.px_hi = s.width - right;
    y.px_lo = s.height - bottom;  // svg y grows downward
    y.px_hi = top;
    draw_axes(s);
  }

  void draw_axes(const PlotStyle& s) {
    for (double v : x.ticks()) {
      const double px = x.px(v);
      canvas.line(px, y.px_lo, px, y.px_hi, "#e0e0e0", 0.5);
      canvas.line(px, y.px_lo, px, y.px_lo + 4, "#333333");
      canvas.text(px, y.px_lo + 17, fmt_tick(v), "middle", 11);
    }
    for (double v : y.ticks()) {
      const double py = y.px(v);
      canvas.line(x.px_lo, py, x.px_hi, py, "#e0e0e0", 0.5);
      canvas.line(x.px_lo - 4, py, x.px_lo, py, "#333333");
      canvas.text(x.px_lo - 7, py + 4, fmt_tick(v), "end", 11);
    }
    canvas.line(x.px_lo, y.px_lo, x.px_hi, y.px_lo, "#333333");
    canvas.line(x.px_lo, y.px_lo, x.px_lo, y.px_hi, "#333333");
    if (!s.title.empty()) canvas.text(canvas.width / 2.0, 20, s.title, "middle", 14);
    if (!s.x_label.empty())
      canvas.text((x.px_lo + x.px_hi) / 2.0, canvas.height - 10, s.x_label);
    if (!s.y_label.empty())
      canvas.text(16, (y.px_lo + y.px_hi) / 2.0, s.y_label, "middle", 12,
                  "rotate(-90 16 " + fmt2((y.px_lo + y.px_hi) / 2.0) + ")");
  }

  void legend(const std::vector<std::string>& labels) {
    double lx = x.px_hi - 130, ly = y.px_hi + 8;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      canvas.rect(lx, ly + 15.0 * double(i), 10, 10, kPalette[i % kPaletteSize], "none");
      canvas.text(lx + 15, ly + 15.0 * double(i) + 9, labels[i], "start", 11);
    }
  }
};

// Range over finite values; log axes additionally ignore non-positives.
void extend_range(const std::vector<double>& v, bool log_axis, double& lo, double& hi) {
  for (double d : v) {
    if (!std::isfinite(d)) continue;
    if (log_axis && d <= 0.0) continue;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

}  // namespace

BoxStats box_stats(const std::vector<double>& values) {
  BoxStats b;
  if (values.empty()) return b;
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  const double iqr = b.q3 - b.q1;
  b.lo = b.q3;
  b.hi = b.q1;
  for (double v : values) {
    if (v >= b.q1 - 1.5 * iqr) b.lo = std::min(b.lo, v);
    if (v <= b.q3 + 1.5 * iqr) b.hi = std::max(b.hi, v);
  }
  return b;
}

void svg_scatter(const std::string& path, const std::vector<PlotSeries>& series,
                 const PlotStyle& style) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    extend_range(s.x, style.log_x, xlo, xhi);
    extend_range(s.y, style.log_y, ylo, yhi);
  }
  if (!(xlo <= xhi)) xlo = xhi = style.log_x ? 1.0 : 0.0;
  if (!(ylo <= yhi)) ylo = yhi = style.log_y ? 1.0 : 0.0;

  Frame f(style, xlo, xhi, ylo, yhi);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    for (std::size_t p = 0; p < s.x.size() && p < s.y.size(); ++p) {
      if (style.log_x && s.x[p] <= 0.0) continue;
      if (style.log_y && s.y[p] <= 0.0) continue;
      f.canvas.circle(f.x.px(s.x[p]), f.y.px(s.y[p]), 3.0, kPalette[i % kPaletteSize]);
    }
    labels.push_back(s.label);
  }
  f.legend(labels);
  f.canvas.save(path);
}

void svg_frequency_polygons(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<double>>>& series, int bins,
    const PlotStyle& style) {
  bins = std::max(bins, 1);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [label, values] : series) extend_range(values, false, lo, hi);
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double bw = (hi - lo) / bins;

  std::vector<std::vector<double>> counts(series.size(), std::vector<double>(bins, 0.0));
  double max_count = 1.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (double v : series[i].second) {
      if (!std::isfinite(v)) continue;
      int b = std::min(bins - 1, std::max(0, static_cast<int>((v - lo) / bw)));
      counts[i][b] += 1.0;
    }
    max_count = std::max(max_count, *std::max_element(counts[i].begin(), counts[i].end()));
  }

  Frame f(style, lo, hi, 0.0, max_count);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (int b = 0; b < bins; ++b)
      pts.emplace_back(f.x.px(lo + (b + 0.5) * bw), f.y.px(counts[i][b]));
    f.canvas.polyline(pts, kPalette[i % kPaletteSize]);
    labels.push_back(series[i].first);
  }
  f.legend(labels);
  f.canvas.save(path);
}

void svg_box_plot(const std::string& path, const std::vector<BoxSpec>& boxes,
                  const PlotStyle& style) {
  double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (const auto& b : boxes) extend_range(b.values, style.log_y, ylo, yhi);
  if (!(ylo <= yhi)) ylo = yhi = style.log_y ? 1.0 : 0.0;

  PlotStyle s = style;
  s.log_x = false;
  Frame f(s, 0.0, static_cast<double>(boxes.size()), ylo, yhi);
  const double slot = (f.x.px_hi - f.x.px_lo) / std::max<std::size_t>(boxes.size(), 1);
  const double half = std::min(slot * 0.28, 42.0);

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoxStats st = box_stats(boxes[i].values);
    const double cx = f.x.px_lo + slot * (double(i) + 0.5);
    const std::string color = kPalette[i % kPaletteSize];
    f.canvas.line(cx, f.y.px(st.lo), cx, f.y.px(st.q1), "#555555");
    f.canvas.line(cx, f.y.px(st.q3), cx, f.y.px(st.hi), "#555555");
    f.canvas.line(cx - half * 0.6, f.y.px(st.lo), cx + half * 0.6, f.y.px(st.lo), "#555555");
    f.canvas.line(cx - half * 0.6, f.y.px(st.hi), cx + half * 0.6, f.y.px(st.hi), "#555555");
    f.canvas.rect(cx - half, f.y.px(st.q3), 2 * half, f.y.px(st.q1) - f.y.px(st.q3), "none",
                  color);
    f.canvas.line(cx - half, f.y.px(st.median), cx + half, f.y.px(st.median), color, 2.0);
    for (double v : boxes[i].values)
      if (v < st.lo || v > st.hi) {
        if (style.log_y && v <= 0.0) continue;
        f.canvas.circle(cx, f.y.px(v), 2.0, "#888888");
      }
    f.canvas.text(cx, f.y.px_lo + 32, boxes[i].label, "middle", 12);
  }
  f.canvas.save(path);
}

}  // namespace lamg
