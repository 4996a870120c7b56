#include "mea/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mea {

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string cell_colour(double t) {
  // white (low) to dark blue (high)
  t = std::clamp(t, 0.0, 1.0);
  const auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  return fmt::format("#{:02x}{:02x}{:02x}", mix(247, 8), mix(251, 48), mix(255, 107));
}

std::string header(double width, double height) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      width, height);
}

}  // namespace

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_heatmap(const Heatmap& map) {
  const auto rows = map.values.rows();
  const auto cols = map.values.cols();
  if (static_cast<Eigen::Index>(map.row_labels.size()) != rows ||
      static_cast<Eigen::Index>(map.col_labels.size()) != cols)
    throw std::invalid_argument("heatmap labels do not match the value matrix");
  if (!(map.vmax > map.vmin)) throw std::invalid_argument("heatmap needs vmax > vmin");

  constexpr double cell = 44, left = 90, top = 50, legend = 70;
  const double width = left + cell * static_cast<double>(cols) + legend;
  const double height = top + cell * static_cast<double>(rows) + 30;
  std::string out = header(width, height);
  out += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n", width / 2,
                     xml_escape(map.title));
  for (Eigen::Index j = 0; j < cols; ++j)
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       left + cell * (static_cast<double>(j) + 0.5), top - 8,
                       xml_escape(map.col_labels[static_cast<std::size_t>(j)]));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double y = top + cell * static_cast<double>(i);
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 8, y + cell / 2 + 4,
                       xml_escape(map.row_labels[static_cast<std::size_t>(i)]));
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double x = left + cell * static_cast<double>(j);
      const double v = map.values(i, j);
      if (std::isnan(v)) {
        out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#dddddd\" stroke=\"white\"/>\n",
                           x, y, cell, cell);
        continue;
      }
      const double t = (v - map.vmin) / (map.vmax - map.vmin);
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>\n", x,
                         y, cell, cell, cell_colour(t));
      const std::string label = map.percent_labels ? fmt::format("{:.0f}", 100.0 * v) : fmt::format("{:.2g}", v);
      out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n", x + cell / 2,
                         y + cell / 2 + 4, t > 0.55 ? "white" : "black", label);
    }
  }
  // colour bar
  const double bx = left + cell * static_cast<double>(cols) + 20;
  const double bh = cell * static_cast<double>(rows);
  constexpr int steps = 20;
  for (int k = 0; k < steps; ++k)
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"{}\" fill=\"{}\"/>\n", bx,
                       top + bh * k / steps, bh / steps + 0.5, cell_colour(1.0 - (k + 0.5) / steps));
  const auto tick = [&](double v) {
    return map.percent_labels ? fmt::format("{:.0f}%", 100.0 * v) : fmt::format("{:.2g}", v);
  };
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", bx + 18, top + 8, tick(map.vmax));
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", bx + 18, top + bh, tick(map.vmin));
  out += "</svg>\n";
  return out;
}

std::string render_line_plot(const LinePlot& plot) {
  if (!(plot.y_max > plot.y_min)) throw std::invalid_argument("line plot needs y_max > y_min");
  double x_min = INFINITY, x_max = -INFINITY;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size()))
      throw std::invalid_argument("series '" + s.label + "' has mismatched lengths");
    for (double x : s.x) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
    }
  }
  if (!(x_max > x_min)) {
    x_min = std::isfinite(x_min) ? x_min - 1 : 0;
    x_max = x_min + 2;
  }

  constexpr double width = 560, height = 380, left = 70, right = 150, top = 40, bottom = 55;
  const double pw = width - left - right, ph = height - top - bottom;
  const auto px = [&](double x) { return left + pw * (x - x_min) / (x_max - x_min); };
  const auto py = [&](double y) {
    return top + ph * (1.0 - (std::clamp(y, plot.y_min, plot.y_max) - plot.y_min) / (plot.y_max - plot.y_min));
  };

  std::string out = header(width, height);
  out += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
                     left + pw / 2, xml_escape(plot.title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left,
                     top, pw, ph);
  for (int k = 0; k <= 5; ++k) {
    const double v = plot.y_min + (plot.y_max - plot.y_min) * k / 5.0;
    out += fmt::format("<line x1=\"{0}\" x2=\"{1}\" y1=\"{2}\" y2=\"{2}\" stroke=\"#e0e0e0\"/>\n", left, left + pw,
                       py(v));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.2g}</text>\n", left - 6,
                       py(v) + 4, v);
  }
  if (!plot.series.empty())
    for (double x : plot.series.front().x)
      out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n", px(x),
                         top + ph + 16, x);
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, height - 12,
                     xml_escape(plot.x_label));
  out += fmt::format("<text transform=\"translate(18 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     top + ph / 2, xml_escape(plot.y_label));

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& ser = plot.series[s];
    const char* colour = kPalette[s % kPalette.size()];
    std::string points;
    for (std::size_t k = 0; k < ser.x.size(); ++k) points += fmt::format("{},{} ", px(ser.x[k]), py(ser.y[k]));
    if (!points.empty()) points.pop_back();
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", points, colour);
    for (std::size_t k = 0; k < ser.x.size(); ++k) {
      if (!ser.err.empty())
        out += fmt::format("<line x1=\"{0}\" x2=\"{0}\" y1=\"{1}\" y2=\"{2}\" stroke=\"{3}\"/>\n", px(ser.x[k]),
                           py(ser.y[k] - ser.err[k]), py(ser.y[k] + ser.err[k]), colour);
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n", px(ser.x[k]), py(ser.y[k]), colour);
    }
    const double ly = top + 12 + 18.0 * static_cast<double>(s);
    out += fmt::format("<line x1=\"{0}\" x2=\"{1}\" y1=\"{2}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       left + pw + 12, left + pw + 32, ly, colour);
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n", left + pw + 38, ly + 4,
                       xml_escape(ser.label));
  }
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mea
