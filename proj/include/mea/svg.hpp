#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mea {

/// Cell grid with a linear two-colour scale. NaN cells are drawn hatched-grey and unlabeled.
struct Heatmap {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd values;
  double vmin = 0.0;
  double vmax = 1.0;
  bool percent_labels = true;  // print 100*v in each cell
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars, same length as y
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  double y_min = 0.0;
  double y_max = 1.0;
};

std::string render_heatmap(const Heatmap& map);
std::string render_line_plot(const LinePlot& plot);

std::string xml_escape(std::string_view s);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace mea
