#include "l2r_cli/svg.hpp"

#include <algorithm>
#include <cstdio>

namespace l2r::cli {

namespace {

constexpr double kWidth = 640, kHeight = 400, kMargin = 60;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string scatter_svg(const std::vector<ScatterPoint>& points, std::string_view title, std::string_view x_label,
                        std::string_view y_label) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!points.empty()) {
    x0 = x1 = points.front().x;
    y0 = 0.0;
    y1 = points.front().y;
    for (const auto& p : points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
  }
  const double pw = kWidth - 2 * kMargin, ph = kHeight - 2 * kMargin;
  auto sx = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  s += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "  <text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" + xml_escape(title) + "</text>\n";
  s += "  <line x1=\"" + num(kMargin) + "\" y1=\"" + num(kHeight - kMargin) + "\" x2=\"" + num(kWidth - kMargin) +
       "\" y2=\"" + num(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
  s += "  <line x1=\"" + num(kMargin) + "\" y1=\"" + num(kMargin) + "\" x2=\"" + num(kMargin) + "\" y2=\"" +
       num(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    s += "  <text x=\"" + num(kMargin - 6) + "\" y=\"" + num(sy(yv) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + tick(yv) + "</text>\n";
    const double xv = x0 + (x1 - x0) * i / 4.0;
    s += "  <text x=\"" + num(sx(xv)) + "\" y=\"" + num(kHeight - kMargin + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + tick(xv) + "</text>\n";
  }
  s += "  <text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 16) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(x_label) + "</text>\n";
  s += "  <text x=\"16\" y=\"" + num(kHeight / 2) + "\" transform=\"rotate(-90 16 " + num(kHeight / 2) +
       ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(y_label) + "</text>\n";
  for (const auto& p : points) {
    s += "  <circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"3\" fill=\"steelblue\"><title>" +
         xml_escape(p.label) + ": " + tick(p.y) + "</title></circle>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace l2r::cli
