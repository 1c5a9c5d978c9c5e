#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "sfl/matrix.hpp"

namespace sfl {

namespace detail {

inline const char* class_color(int label) {
  static const char* palette[8] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return palette[((label % 8) + 8) % 8];
}

struct SvgBox {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  void grow(const Matrix& pts) {
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      x0 = std::min(x0, pts(i, 0));
      x1 = std::max(x1, pts(i, 0));
      y0 = std::min(y0, pts(i, 1));
      y1 = std::max(y1, pts(i, 1));
    }
  }
};

}  // namespace detail

// 2-D scatter: real samples as hollow circles, generated samples filled,
// colored by class.
inline void write_scatter_svg(const std::string& path, const Matrix& real,
                              const std::vector<int>& real_labels, const Matrix& fake,
                              const std::vector<int>& fake_labels, const std::string& title) {
  const double size = 640.0, margin = 40.0;
  detail::SvgBox box;
  box.x0 = box.y0 = -1.0;
  box.x1 = box.y1 = 1.0;
  box.grow(real);
  box.grow(fake);
  const double span = std::max(box.x1 - box.x0, box.y1 - box.y0);
  const double scale = (size - 2.0 * margin) / (span > 0 ? span : 1.0);
  auto px = [&](double x) { return margin + (x - box.x0) * scale; };
  auto py = [&](double y) { return size - margin - (y - box.y0) * scale; };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  char buf[256];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
     << title << "</text>\n";
  for (std::size_t i = 0; i < real.rows(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"none\" stroke=\"%s\" "
                  "stroke-width=\"0.8\"/>\n",
                  px(real(i, 0)), py(real(i, 1)),
                  detail::class_color(i < real_labels.size() ? real_labels[i] : 0));
    os << buf;
  }
  for (std::size_t i = 0; i < fake.rows(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.8\" fill=\"%s\" fill-opacity=\"0.8\"/>\n",
                  px(fake(i, 0)), py(fake(i, 1)),
                  detail::class_color(i < fake_labels.size() ? fake_labels[i] : 0));
    os << buf;
  }
  os << "</svg>\n";
}

// One polyline per named series (epoch, value), e.g. FID over training.
inline void write_curve_svg(const std::string& path,
                            const std::vector<std::pair<std::string,
                                                        std::vector<std::pair<int, double>>>>&
                                series,
                            const std::string& title, const std::string& ylabel) {
  const double w = 720.0, h = 480.0, margin = 50.0;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& [name, pts] : series) {
    for (const auto& [e, v] : pts) {
      if (first) {
        xmin = xmax = e;
        ymin = ymax = v;
        first = false;
      }
      xmin = std::min(xmin, static_cast<double>(e));
      xmax = std::max(xmax, static_cast<double>(e));
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (w - 2 * margin); };
  auto py = [&](double y) { return h - margin - (y - ymin) / (ymax - ymin) * (h - 2 * margin); };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
     << title << "</text>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
     << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
     << h - margin << "\" stroke=\"black\"/>\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "<text x=\"12\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"12\" "
                "transform=\"rotate(-90 12 %.0f)\">%s</text>\n",
                h / 2, h / 2, ylabel.c_str());
  os << buf;
  std::size_t color_idx = 0;
  for (const auto& [name, pts] : series) {
    const char* color = detail::class_color(static_cast<int>(color_idx));
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [e, v] : pts) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(e), py(v));
      os << buf;
    }
    os << "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.0f\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"12\" "
                  "fill=\"%s\">%s</text>\n",
                  w - margin - 140.0, margin + 16.0 * (color_idx + 1), color, name.c_str());
    os << buf;
    ++color_idx;
  }
  os << "</svg>\n";
}

}  // namespace sfl
