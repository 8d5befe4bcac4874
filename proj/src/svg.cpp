#include "threshtest/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "threshtest/errors.hpp"
#include "threshtest/io.hpp"

namespace threshtest::svg {

namespace {

constexpr double kPanelW = 360.0;
constexpr double kPanelH = 260.0;
constexpr double kMarginL = 52.0;
constexpr double kMarginR = 14.0;
constexpr double kMarginT = 28.0;
constexpr double kMarginB = 40.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  // two decimals is plenty for pixel coordinates
  return io::format_double(std::round(v * 100.0) / 100.0);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    } else if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

void draw_panel(std::ostringstream& os, const Panel& panel, double ox, double oy) {
  Range xr, yr;
  for (const auto& s : panel.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  if (panel.y_lo < panel.y_hi) {
    yr.lo = panel.y_lo;
    yr.hi = panel.y_hi;
  } else {
    yr.finish();
  }
  const double pw = kPanelW - kMarginL - kMarginR;
  const double ph = kPanelH - kMarginT - kMarginB;
  const double x0 = ox + kMarginL;
  const double y0 = oy + kMarginT;
  auto sx = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double v) { return y0 + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

  os << "<g>\n";
  os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  os << "<text x=\"" << num(x0 + pw / 2) << "\" y=\"" << num(oy + 18)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(panel.title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    os << "<text x=\"" << num(sx(fx)) << "\" y=\"" << num(y0 + ph + 14)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(io::format_double(std::round(fx * 1000) / 1000))
       << "</text>\n";
    os << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(sy(fy) + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << escape(io::format_double(std::round(fy * 1000) / 1000))
       << "</text>\n";
    os << "<line x1=\"" << num(x0) << "\" x2=\"" << num(x0 + pw) << "\" y1=\"" << num(sy(fy))
       << "\" y2=\"" << num(sy(fy)) << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << num(x0 + pw / 2) << "\" y=\"" << num(y0 + ph + 32)
     << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(panel.x_label) << "</text>\n";
  os << "<text transform=\"translate(" << num(ox + 12) << "," << num(y0 + ph / 2)
     << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"11\">" << escape(panel.y_label)
     << "</text>\n";

  for (std::size_t i = 0; i < panel.series.size(); ++i) {
    const auto& s = panel.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.points_only) {
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        os << "<circle cx=\"" << num(sx(s.x[k])) << "\" cy=\"" << num(sy(s.y[k]))
           << "\" r=\"2\" fill=\"" << color << "\"/>\n";
      }
    } else {
      os << "<polyline fill=\"none\" stroke-width=\"1.6\" stroke=\"" << color << "\" points=\"";
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        os << num(sx(s.x[k])) << ',' << num(sy(s.y[k])) << ' ';
      }
      os << "\"/>\n";
    }
    const double ly = y0 + 12 + 13.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(x0 + 6) << "\" x2=\"" << num(x0 + 22) << "\" y1=\"" << num(ly - 4)
       << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(x0 + 26) << "\" y=\"" << num(ly) << "\" font-size=\"10\">"
       << escape(s.label) << "</text>\n";
  }
  os << "</g>\n";
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
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

std::string render(const std::vector<Panel>& panels, int rows, int cols, const std::string& title) {
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows * cols) < panels.size()) {
    throw Error(ErrorKind::InvalidSpec, "panel grid too small");
  }
  const double top = title.empty() ? 0.0 : 26.0;
  const double w = kPanelW * cols;
  const double h = kPanelH * rows + top;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    os << "<text x=\"" << num(w / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"15\">"
       << escape(title) << "</text>\n";
  }
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int r = static_cast<int>(i) / cols;
    const int c = static_cast<int>(i) % cols;
    draw_panel(os, panels[i], kPanelW * c, top + kPanelH * r);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace threshtest::svg
