#pragma once

// Minimal static SVG output: panels with axes, one polyline per series and
// a legend. Enough for power curves and confidence-region scans.

#include <string>
#include <vector>

namespace threshtest::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Draw markers only (no connecting line).
  bool points_only = false;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Fixed y range when lo < hi; otherwise taken from the data.
  double y_lo = 0.0;
  double y_hi = 0.0;
};

/// Lays panels out row-major on a `rows` x `cols` grid.
std::string render(const std::vector<Panel>& panels, int rows, int cols,
                   const std::string& title = "");

std::string escape(const std::string& text);

}  // namespace threshtest::svg
