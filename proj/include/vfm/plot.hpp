#pragma once

#include <string>

#include "vfm/field.hpp"
#include "vfm/polar.hpp"

namespace vfm {

struct QuiverOptions {
  int decimate = 4;          // keep one cell in `decimate` per axis
  double width = 800.0;      // canvas width in px
  double arrow_gain = 0.9;   // max arrow length relative to decimated pitch
};

/// Scan-converts the polar sector to Cartesian screen space and renders one
/// arrow per decimated cavity cell, colored by the radial velocity, with a
/// color legend. Output is byte-stable for identical inputs.
void write_quiver_svg(const std::string& path, const PolarGrid& grid,
                      const VelocityField& field, const BoolLattice& mask,
                      const QuiverOptions& opts = {});

}  // namespace vfm
