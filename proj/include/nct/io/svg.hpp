#pragma once

// Self-contained SVG scatter plots: one <g class="layer"> per point set, one
// <circle> per point, axes frame and a legend. No scripts or external refs.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/io/csv.hpp"
#include "nct/numeric/tape.hpp"

namespace nct {

struct ScatterLayer {
  std::string label;
  Matrix points;  // n x 2
  std::string color;
  double radius = 1.5;
  double opacity = 0.6;
};

struct FigureSpec {
  std::string title;
  std::vector<ScatterLayer> layers;
  double x_min = -4.0, x_max = 4.0;
  double y_min = -4.0, y_max = 4.0;
  int width = 480, height = 480;
  std::string output_path;

  void validate() const {
    if (!(x_max > x_min) || !(y_max > y_min)) throw ConfigError("figure axis ranges must be nonempty");
    if (width <= 0 || height <= 0) throw ConfigError("figure size must be positive");
    for (const auto& l : layers) {
      if (l.points.rows() > 0 && l.points.cols() != 2) {
        throw ConfigError("scatter layer '" + l.label + "' must have 2 columns");
      }
    }
  }
};

inline const std::vector<std::string>& default_palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  return p;
}

namespace svg_detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) { return format_double(std::round(v * 100.0) / 100.0); }

}  // namespace svg_detail

inline std::string scatter_svg(const FigureSpec& spec) {
  spec.validate();
  using svg_detail::escape;
  using svg_detail::num;
  const double margin = 24.0;
  const double pw = spec.width - 2 * margin, ph = spec.height - 2 * margin;
  auto sx = [&](double x) { return margin + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
  auto sy = [&](double y) { return margin + (spec.y_max - y) / (spec.y_max - spec.y_min) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " + std::to_string(spec.width) +
         " " + std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<rect class=\"frame\" x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  if (!spec.title.empty()) {
    out += "<text x=\"" + num(spec.width / 2.0) + "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(spec.title) + "</text>\n";
  }
  const auto& palette = default_palette();
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    const std::string color = l.color.empty() ? palette[li % palette.size()] : l.color;
    out += "<g class=\"layer\" data-label=\"" + escape(l.label) + "\" fill=\"" + color + "\" fill-opacity=\"" +
           num(l.opacity) + "\">\n";
    for (Eigen::Index i = 0; i < l.points.rows(); ++i) {
      const double x = l.points(i, 0), y = l.points(i, 1);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (x < spec.x_min || x > spec.x_max || y < spec.y_min || y > spec.y_max) continue;
      out += "<circle cx=\"" + num(sx(x)) + "\" cy=\"" + num(sy(y)) + "\" r=\"" + num(l.radius) + "\"/>\n";
    }
    out += "</g>\n";
    out += "<text class=\"legend\" x=\"" + num(margin + 6) + "\" y=\"" + num(margin + 14 + 14.0 * li) +
           "\" font-size=\"11\" fill=\"" + color + "\">" + escape(l.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void render_scatter_svg(const FigureSpec& spec) {
  if (spec.output_path.empty()) throw IoError("figure has no output path");
  write_file_atomic(spec.output_path, scatter_svg(spec));
}

}  // namespace nct
