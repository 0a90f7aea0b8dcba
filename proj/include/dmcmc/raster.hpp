#pragma once

// Scatter-plot rendering for 2-D targets, written as binary PPM (P6).

#include "dmcmc/mixture.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace dmcmc {

using Rgb = std::array<std::uint8_t, 3>;

class Raster {
 public:
  Raster(int width, int height, Rgb background = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  /// Alpha-blends c over the pixel.
  void blend(int x, int y, Rgb c, double alpha);
  void line(int x0, int y0, int x1, int y1, Rgb c);
  void cross(int x, int y, int radius, Rgb c);

  std::string encode_ppm() const;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

/// Density scatter of the samples, mode markers, and (optionally) the path of one chain.
/// The view covers the mode means and the bulk of the samples.
Raster scatter_plot(const std::vector<Vector>& samples, const GaussianMixture& mix,
                    const std::vector<Vector>& trajectory, int size);

}  // namespace dmcmc
