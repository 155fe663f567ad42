#include "pfm/medium.hpp"

#include <algorithm>
#include <cmath>

#include "pfm/error.hpp"

namespace pfm::wave {

VoxelMedium::VoxelMedium(GridShape shape, VoxelPitch pitch, double background_index, double delta_n_max,
                         double gain_per_step)
    : shape_(shape),
      pitch_(pitch),
      background_index_(background_index),
      delta_n_max_(delta_n_max),
      gain_per_step_(gain_per_step),
      delta_n_(shape.voxels(), 0.0) {
  if (shape.nx == 0 || shape.ny == 0 || shape.nz == 0) throw DomainError("medium: every grid dimension must be >= 1");
  if (!(pitch.x > 0 && pitch.y > 0 && pitch.z > 0)) throw DomainError("medium: voxel pitch must be positive");
  if (!(background_index > 0)) throw DomainError("medium: background index must be positive");
  if (!(delta_n_max >= 0)) throw DomainError("medium: delta_n_max must be non-negative");
  set_gain_per_step(gain_per_step);
}

void VoxelMedium::set_gain_per_step(double g) {
  if (!(g > 0) || !std::isfinite(g)) throw DomainError("medium: gain per step must be positive");
  gain_per_step_ = g;
}

std::span<const double> VoxelMedium::slice(std::size_t z) const {
  const std::size_t n = shape_.transverse();
  return std::span<const double>(delta_n_).subspan(z * n, n);
}

void VoxelMedium::assign(std::vector<double> values) {
  if (values.size() != shape_.voxels()) throw DomainError("medium: value count does not match grid");
  delta_n_ = std::move(values);
  validate();
}

void VoxelMedium::project() {
  for (double& v : delta_n_) v = std::clamp(v, -delta_n_max_, delta_n_max_);
}

void VoxelMedium::validate() const {
  for (double v : delta_n_) {
    if (!std::isfinite(v) || std::abs(v) > delta_n_max_) {
      throw DomainError("medium: |delta_n| exceeds delta_n_max or is not finite");
    }
  }
}

VoxelMedium VoxelMedium::reversed_z() const {
  VoxelMedium out = *this;
  const std::size_t n = shape_.transverse();
  for (std::size_t z = 0; z < shape_.nz; ++z) {
    std::copy_n(delta_n_.begin() + static_cast<std::ptrdiff_t>((shape_.nz - 1 - z) * n), n,
                out.delta_n_.begin() + static_cast<std::ptrdiff_t>(z * n));
  }
  return out;
}

double OpticalField::power() const {
  double s = 0;
  for (const auto& a : amplitude) s += std::norm(a);
  return s * sample_area();
}

bool OpticalField::finite() const {
  return std::all_of(amplitude.begin(), amplitude.end(),
                     [](const Complex& a) { return std::isfinite(a.real()) && std::isfinite(a.imag()); });
}

}  // namespace pfm::wave
