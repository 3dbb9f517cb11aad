#pragma once

// Minimal self-contained SVG output: stacked bar charts, scatter and quiver
// plots. No external assets.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mnflow/common.hpp"

namespace mnflow::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

class Canvas {
 public:
  Canvas(double w, double h) : w_(w), h_(h) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
          << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
          << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(width) << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, double size = 12,
            const std::string& anchor = "start") {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
          << "</text>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.0) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width)
          << "\" points=\"";
    for (auto& [x, y] : pts) body_ << num(x) << "," << num(y) << " ";
    body_ << "\"/>\n";
  }

  double width() const { return w_; }
  double height() const { return h_; }

  void save(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << body_.str() << "</svg>\n";
  }

 private:
  double w_, h_;
  std::ostringstream body_;
};

// One stacked bar per group; categories share colors across groups.
struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per category, in [0,1]
};

inline void write_stacked_bars(const std::string& path, const std::string& title,
                               const std::vector<std::string>& categories,
                               const std::vector<std::string>& colors,
                               const std::vector<BarGroup>& groups) {
  const double w = 120.0 * groups.size() + 200, h = 360;
  Canvas cv(w, h);
  cv.text(20, 28, title, 15);
  const double y0 = 60, y1 = 300, scale = y1 - y0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double x = 60 + 120.0 * g;
    double top = y1;
    for (std::size_t c = 0; c < categories.size(); ++c) {
      double v = c < groups[g].values.size() ? groups[g].values[c] : 0.0;
      double hseg = v * scale;
      top -= hseg;
      cv.rect(x, top, 70, hseg, colors[c % colors.size()]);
    }
    cv.text(x + 35, y1 + 18, groups[g].label, 12, "middle");
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    double ly = 60 + 20.0 * c;
    cv.rect(w - 150, ly - 10, 12, 12, colors[c % colors.size()]);
    cv.text(w - 132, ly, categories[c], 12);
  }
  cv.line(50, y0, 50, y1, "black");
  cv.line(50, y1, w - 160, y1, "black");
  cv.text(30, y1 + 4, "0", 11, "end");
  cv.text(30, y0 + 4, "1", 11, "end");
  cv.save(path);
}

}  // namespace mnflow::svg
