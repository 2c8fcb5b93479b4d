#include "vfm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace vfm {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Blue-white-red diverging map for t in [-1, 1].
std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r, g, b;
  if (t < 0.0) {
    r = static_cast<int>(std::lround(255 * (1.0 + t)));
    g = static_cast<int>(std::lround(255 * (1.0 + t)));
    b = 255;
  } else {
    r = 255;
    g = static_cast<int>(std::lround(255 * (1.0 - t)));
    b = static_cast<int>(std::lround(255 * (1.0 - t)));
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void write_quiver_svg(const std::string& path, const PolarGrid& grid,
                      const VelocityField& field, const BoolLattice& mask,
                      const QuiverOptions& opts) {
  if (opts.decimate < 1)
    throw std::invalid_argument("write_quiver_svg: decimate must be >= 1");
  if (field.v_r.rows() != grid.n_r || field.v_r.cols() != grid.n_theta)
    throw std::invalid_argument("write_quiver_svg: field shape does not match grid");

  // Probe at the origin; beams fan downward. Screen y grows downward, so
  // x = r sin(theta), y = r cos(theta).
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  double v_max = 0.0, speed_max = 0.0;
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j) {
      if (!mask(i, j)) continue;
      const double x = grid.radius(i) * std::sin(grid.angle(j));
      const double y = grid.radius(i) * std::cos(grid.angle(j));
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
      v_max = std::max(v_max, std::abs(field.v_r(i, j)));
      speed_max = std::max(speed_max, std::hypot(field.v_r(i, j), field.v_theta(i, j)));
    }
  if (x_max <= x_min) throw std::invalid_argument("write_quiver_svg: empty mask");

  const double margin = 40.0;
  const double span_x = std::max(x_max - x_min, 1e-12);
  const double span_y = std::max(y_max - y_min, 1e-12);
  const double scale = (opts.width - 2 * margin) / span_x;
  const double height = span_y * scale + 2 * margin + 40.0;  // room for the legend
  auto sx = [&](double x) { return margin + (x - x_min) * scale; };
  auto sy = [&](double y) { return margin + (y - y_min) * scale; };

  const double pitch = std::min(grid.dr, grid.r0 * grid.dtheta) * opts.decimate * scale;
  const double arrow_len = opts.arrow_gain * pitch;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_quiver_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(opts.width)
      << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(opts.width)
      << " " << fmt(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#101018\"/>\n";

  for (int i = 0; i < grid.n_r; i += opts.decimate) {
    for (int j = 0; j < grid.n_theta; j += opts.decimate) {
      if (!mask(i, j)) continue;
      const double theta = grid.angle(j);
      const double x0 = sx(grid.radius(i) * std::sin(theta));
      const double y0 = sy(grid.radius(i) * std::cos(theta));
      const double vr = field.v_r(i, j), vt = field.v_theta(i, j);
      // Unit vectors in screen space: r_hat = (sin, cos), theta_hat = (cos, -sin).
      const double ux = vr * std::sin(theta) + vt * std::cos(theta);
      const double uy = vr * std::cos(theta) - vt * std::sin(theta);
      const double speed = std::hypot(ux, uy);
      const std::string color = diverging_color(v_max > 0 ? vr / v_max : 0.0);
      if (speed_max <= 0.0 || speed / speed_max < 1e-6) {
        out << "<circle cx=\"" << fmt(x0) << "\" cy=\"" << fmt(y0)
            << "\" r=\"1.00\" fill=\"" << color << "\"/>\n";
        continue;
      }
      const double len = arrow_len * speed / speed_max;
      const double dx = ux / speed * len, dy = uy / speed * len;
      const double x1 = x0 + dx, y1 = y0 + dy;
      out << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\""
          << fmt(x1) << "\" y2=\"" << fmt(y1) << "\" stroke=\"" << color
          << "\" stroke-width=\"1.20\"/>\n";
      // Arrow head: two short back-swept strokes.
      const double hx = -dx / len * 3.0, hy = -dy / len * 3.0;
      out << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\""
          << fmt(x1 + hx - hy * 0.6) << "\" y2=\"" << fmt(y1 + hy + hx * 0.6)
          << "\" stroke=\"" << color << "\" stroke-width=\"1.20\"/>\n";
      out << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\""
          << fmt(x1 + hx + hy * 0.6) << "\" y2=\"" << fmt(y1 + hy - hx * 0.6)
          << "\" stroke=\"" << color << "\" stroke-width=\"1.20\"/>\n";
    }
  }

  // Legend: radial-velocity color bar.
  const double bar_y = height - 28.0, bar_w = 200.0, bar_x = margin;
  const int swatches = 40;
  for (int k = 0; k < swatches; ++k) {
    const double t = -1.0 + 2.0 * k / (swatches - 1);
    out << "<rect x=\"" << fmt(bar_x + k * bar_w / swatches) << "\" y=\""
        << fmt(bar_y) << "\" width=\"" << fmt(bar_w / swatches + 0.5)
        << "\" height=\"10.00\" fill=\"" << diverging_color(t) << "\"/>\n";
  }
  char label[64];
  std::snprintf(label, sizeof(label), "radial velocity: %+.3f .. %+.3f m/s",
                -v_max, v_max);
  out << "<text x=\"" << fmt(bar_x) << "\" y=\"" << fmt(bar_y - 6.0)
      << "\" fill=\"#d0d0d8\" font-family=\"monospace\" font-size=\"12\">"
      << label << "</text>\n";
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write_quiver_svg: write failed for " + path);
}

}  // namespace vfm
