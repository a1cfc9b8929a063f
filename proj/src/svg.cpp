#include "eclab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace eclab::harness {

namespace {

// chart geometry: plot area [60,780] x [40,440] in a 800x480 viewport
constexpr double kLeft = 60.0, kRight = 780.0, kTop = 40.0, kBottom = 440.0;

const char* kPalette[8] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad",
                           "#d35400", "#16a085", "#7f8c8d", "#2c3e50"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  return buf;
}

}  // namespace

int default_smooth_window(std::size_t n) {
  int w = static_cast<int>(std::lround(0.05 * static_cast<double>(n)));
  if (w < 1) w = 1;
  if (w % 2 == 0) ++w;
  return w;
}

std::vector<double> moving_average(const std::vector<double>& values, int window) {
  if (window <= 1 || values.empty()) return values;
  const int half = window / 2;
  const int n = static_cast<int>(values.size());
  std::vector<double> out(values.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) s += values[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::string render_line_chart(const std::string& title, const std::vector<Series>& series,
                              int smooth_window) {
  std::vector<Series> plotted = series;
  std::size_t max_len = 0;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  for (Series& s : plotted) {
    s.values = moving_average(s.values, smooth_window);
    max_len = std::max(max_len, s.values.size());
    for (double v : s.values) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  const bool empty = max_len == 0;
  if (empty) {
    ymin = 0.0;
    ymax = 1.0;
  } else if (ymax - ymin < 1e-300) {
    ymin -= 1.0;
    ymax += 1.0;
  }

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" "
         "viewBox=\"0 0 800 480\">\n";
  svg += "<!-- centered moving average, window " + std::to_string(smooth_window) + " -->\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"480\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"60\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" + title +
         "</text>\n";
  svg += "<text x=\"60\" y=\"462\" font-family=\"sans-serif\" font-size=\"11\" "
         "fill=\"#555555\">smoothed: centered moving average, window " +
         std::to_string(smooth_window) + "</text>\n";
  // axes
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kBottom) + "\" x2=\"" + num(kRight) +
         "\" y2=\"" + num(kBottom) + "\" stroke=\"#000000\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) +
         "\" y2=\"" + num(kBottom) + "\" stroke=\"#000000\"/>\n";
  svg += "<text x=\"8\" y=\"" + num(kTop + 4) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
         num(ymax) + "</text>\n";
  svg += "<text x=\"8\" y=\"" + num(kBottom + 4) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + num(ymin) + "</text>\n";
  svg += "<text x=\"" + num(kRight - 30) + "\" y=\"" + num(kBottom + 16) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" +
         (empty ? std::string("0") : std::to_string(max_len - 1)) + "</text>\n";
  svg += "<text x=\"" + num(kLeft) + "\" y=\"" + num(kBottom + 16) +
         "\" font-family=\"sans-serif\" font-size=\"11\">0</text>\n";

  if (empty) {
    svg += "<text x=\"360\" y=\"240\" font-family=\"sans-serif\" font-size=\"14\" "
           "fill=\"#888888\">no steps</text>\n";
  }

  for (std::size_t si = 0; si < plotted.size(); ++si) {
    const Series& s = plotted[si];
    const char* color = kPalette[si % 8];
    // legend
    const double ly = kTop + 16.0 * static_cast<double>(si);
    svg += "<line x1=\"620\" y1=\"" + num(ly) + "\" x2=\"648\" y2=\"" + num(ly) +
           "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"654\" y=\"" + num(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
    if (s.values.empty()) continue;
    const std::size_t n = s.values.size();
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const double fx = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
      const double x = kLeft + fx * (kRight - kLeft);
      const double y = kBottom - (s.values[i] - ymin) / (ymax - ymin) * (kBottom - kTop);
      if (i) svg += ' ';
      svg += num(x) + "," + num(y);
    }
    svg += "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace eclab::harness
