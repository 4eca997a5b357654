#include "komet/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace komet {

namespace {

constexpr std::array<std::array<int, 3>, 5> kStops{{
    {0x2b, 0x2b, 0x2b},
    {0x3b, 0x52, 0x8b},
    {0x21, 0x91, 0x8c},
    {0x5e, 0xc9, 0x62},
    {0xfd, 0xe7, 0x25},
}};

std::string hex(const std::array<int, 3>& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::array<int, 3> ramp_color(double u) {
  if (!std::isfinite(u)) u = 0.0;
  u = std::clamp(u, 0.0, 1.0) * 4.0;
  const int k = std::min(static_cast<int>(u), 3);
  const double f = u - k;
  std::array<int, 3> c{};
  for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(kStops[k][i] + f * (kStops[k + 1][i] - kStops[k][i])));
  return c;
}

std::string heatmap_svg(const Eigen::MatrixXd& m, const std::vector<std::string>& labels, const HeatmapOptions& o) {
  if (m.rows() != m.cols() || static_cast<Eigen::Index>(labels.size()) != m.rows()) {
    throw std::invalid_argument("heatmap_svg: square matrix with one label per row expected");
  }
  const int n = static_cast<int>(m.rows());
  const int c = o.cell;
  const int margin = 60, top = 40, bar = 16;
  const int width = margin + n * c + 20 + bar + 50;
  const int height = top + n * c + margin;
  const double span = o.vmax > o.vmin ? o.vmax - o.vmin : 1.0;

  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\" "
                "font-size=\"10\">\n",
                width, height);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"20\" font-size=\"13\">", margin);
  s += buf;
  s += escape(o.title) + "</text>\n";

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n",
                    margin + j * c, top + i * c, c, c, hex(ramp_color((m(i, j) - o.vmin) / span)).c_str());
      s += buf;
    }
  }
  for (int sep : o.separators) {
    if (sep <= 0 || sep >= n) continue;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"white\" stroke-width=\"2\"/>\n"
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"white\" stroke-width=\"2\"/>\n",
                  margin + sep * c, top, margin + sep * c, top + n * c, margin, top + sep * c, margin + n * c,
                  top + sep * c);
    s += buf;
  }
  for (int i = 0; i < n; ++i) {
    const std::string label = escape(labels[static_cast<std::size_t>(i)]);
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">", margin - 4, top + i * c + c / 2 + 3);
    s += buf + label + "</text>\n";
    const int x = margin + i * c + c / 2 + 3, y = top + n * c + 6;
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\" transform=\"rotate(-90 %d %d)\">", x, y,
                  x, y);
    s += buf + label + "</text>\n";
  }

  // Colour bar, top = vmax.
  const int bx = margin + n * c + 20;
  const int steps = 50;
  for (int k = 0; k < steps; ++k) {
    const double u = 1.0 - (k + 0.5) / steps;
    std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"%s\"/>\n", bx,
                  top + k * (n * c) / static_cast<double>(steps), bar, (n * c) / static_cast<double>(steps) + 0.5,
                  hex(ramp_color(u)).c_str());
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\">%.3g</text>\n<text x=\"%d\" y=\"%d\">%.3g</text>\n",
                bx + bar + 4, top + 8, o.vmax, bx + bar + 4, top + n * c, o.vmin);
  s += buf;
  s += "</svg>\n";
  return s;
}

}  // namespace komet
