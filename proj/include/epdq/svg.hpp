#ifndef EPDQ_SVG_HPP
#define EPDQ_SVG_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace epdq {

/// Minimal deterministic SVG writer: fixed canvas, numbers formatted with
/// %.6g, no external resources.
class SvgCanvas {
public:
  SvgCanvas(double width, double height) : width_(width), height_(height) {
    append("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    append("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.6g\" height=\"%.6g\" viewBox=\"0 0 %.6g %.6g\">\n",
           width, height, width, height);
    append("<rect x=\"0\" y=\"0\" width=\"%.6g\" height=\"%.6g\" fill=\"white\"/>\n", width, height);
  }

  void line(double x1, double y1, double x2, double y2, const std::string& color, double stroke_width = 1.0,
            bool dashed = false) {
    append("<line x1=\"%.6g\" y1=\"%.6g\" x2=\"%.6g\" y2=\"%.6g\" stroke=\"%s\" stroke-width=\"%.6g\"%s/>\n", x1, y1,
           x2, y2, color.c_str(), stroke_width, dashed ? " stroke-dasharray=\"4 3\"" : "");
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, double stroke_width = 1.5) {
    if (pts.size() < 2) return;
    std::string points;
    char buf[64];
    for (const auto& [x, y] : pts) {
      std::snprintf(buf, sizeof buf, "%.6g,%.6g ", x, y);
      points += buf;
    }
    append("<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"%.6g\"/>\n", points.c_str(),
           color.c_str(), stroke_width);
  }

  void circle(double x, double y, double r, const std::string& color) {
    append("<circle cx=\"%.6g\" cy=\"%.6g\" r=\"%.6g\" fill=\"%s\"/>\n", x, y, r, color.c_str());
  }

  void rect(double x, double y, double w, double h, const std::string& color) {
    append("<rect x=\"%.6g\" y=\"%.6g\" width=\"%.6g\" height=\"%.6g\" fill=\"%s\"/>\n", x, y, w, h, color.c_str());
  }

  void text(double x, double y, const std::string& content, double size = 12.0, const std::string& color = "black") {
    append("<text x=\"%.6g\" y=\"%.6g\" font-family=\"monospace\" font-size=\"%.6g\" fill=\"%s\">%s</text>\n", x, y,
           size, color.c_str(), escape(content).c_str());
  }

  std::string finish() {
    if (!finished_) {
      body_ += "</svg>\n";
      finished_ = true;
    }
    return body_;
  }

  double width() const { return width_; }
  double height() const { return height_; }

private:
  static std::string escape(const std::string& s) {
    std::string out;
    for (const char ch : s) {
      switch (ch) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
      }
    }
    return out;
  }

  template <typename... Args>
  void append(const char* fmt, Args... args) {
    char buf[4096];
    if constexpr (sizeof...(Args) == 0)
      body_ += fmt;
    else {
      std::snprintf(buf, sizeof buf, fmt, args...);
      body_ += buf;
    }
  }

  double width_, height_;
  std::string body_;
  bool finished_ = false;
};

}  // namespace epdq

#endif  // EPDQ_SVG_HPP
