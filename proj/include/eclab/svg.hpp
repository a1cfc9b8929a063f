#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace eclab::harness {

struct Series {
  std::string label;
  std::vector<double> values;  // y per step; x is the index
};

// Deterministic SVG line chart. A centered moving average of window
// `smooth_window` (1 = raw data) is applied before plotting; the window is
// disclosed in the chart subtitle. Same input, same bytes.
std::string render_line_chart(const std::string& title, const std::vector<Series>& series,
                              int smooth_window);

// 5% of the series length, rounded to the nearest odd value, at least 1
int default_smooth_window(std::size_t n);

std::vector<double> moving_average(const std::vector<double>& values, int window);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace eclab::harness
