#include "dmcmc/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmcmc {

Raster::Raster(int width, int height, Rgb background) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("Raster: size must be positive");
  rgb_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < rgb_.size(); i += 3) std::copy(background.begin(), background.end(), rgb_.begin() + i);
}

Rgb Raster::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {rgb_.at(i), rgb_.at(i + 1), rgb_.at(i + 2)};
}

void Raster::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  rgb_[i] = c[0];
  rgb_[i + 1] = c[1];
  rgb_[i + 2] = c[2];
}

void Raster::blend(int x, int y, Rgb c, double alpha) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  for (int k = 0; k < 3; ++k)
    rgb_[i + k] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * rgb_[i + k] + alpha * c[k]));
}

void Raster::line(int x0, int y0, int x1, int y1, Rgb c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Raster::cross(int x, int y, int radius, Rgb c) {
  line(x - radius, y - radius, x + radius, y + radius, c);
  line(x - radius, y + radius, x + radius, y - radius, c);
}

std::string Raster::encode_ppm() const {
  std::string out = "P6\n" + std::to_string(width_) + " " + std::to_string(height_) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb_.data()), rgb_.size());
  return out;
}

Raster scatter_plot(const std::vector<Vector>& samples, const GaussianMixture& mix,
                    const std::vector<Vector>& trajectory, int size) {
  if (mix.dim() != 2) throw std::invalid_argument("scatter_plot: only 2-D targets are rendered");
  double lo_x = mix.means().row(0).minCoeff(), hi_x = mix.means().row(0).maxCoeff();
  double lo_y = mix.means().row(1).minCoeff(), hi_y = mix.means().row(1).maxCoeff();
  for (const auto& s : samples) {
    if (!s.allFinite()) continue;
    lo_x = std::min(lo_x, s[0]);
    hi_x = std::max(hi_x, s[0]);
    lo_y = std::min(lo_y, s[1]);
    hi_y = std::max(hi_y, s[1]);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double pad = 0.05 * span;
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double half = 0.5 * span + pad;
  auto px = [&](const Vector& v) {
    const int x = static_cast<int>(std::floor((v[0] - (cx - half)) / (2 * half) * (size - 1) + 0.5));
    const int y = static_cast<int>(std::floor(((cy + half) - v[1]) / (2 * half) * (size - 1) + 0.5));
    return std::pair<int, int>{x, y};
  };

  Raster r(size, size);
  for (const auto& s : samples) {
    if (!s.allFinite()) continue;
    const auto [x, y] = px(s);
    r.blend(x, y, {20, 60, 160}, 0.35);
  }
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const auto [x0, y0] = px(trajectory[i - 1]);
    const auto [x1, y1] = px(trajectory[i]);
    r.line(x0, y0, x1, y1, {230, 120, 20});
  }
  for (int k = 0; k < mix.num_modes(); ++k) {
    const auto [x, y] = px(Vector(mix.mean(k)));
    r.cross(x, y, 3, {200, 0, 0});
  }
  return r;
}

}  // namespace dmcmc
