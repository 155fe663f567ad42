#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace pfm::wave {

using Complex = std::complex<double>;

struct GridShape {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t transverse() const { return nx * ny; }
  std::size_t voxels() const { return nx * ny * nz; }
  bool operator==(const GridShape&) const = default;
};

struct VoxelPitch {
  double x = 0;
  double y = 0;
  double z = 0;
  bool operator==(const VoxelPitch&) const = default;
};

inline constexpr double kDefaultDeltaNMax = 0.1;

// Refractive-index perturbation on a voxel grid, stored z-major:
// index = (z * ny + y) * nx + x.
class VoxelMedium {
 public:
  VoxelMedium(GridShape shape, VoxelPitch pitch, double background_index,
              double delta_n_max = kDefaultDeltaNMax, double gain_per_step = 1.0);

  const GridShape& shape() const { return shape_; }
  const VoxelPitch& pitch() const { return pitch_; }
  double background_index() const { return background_index_; }
  double delta_n_max() const { return delta_n_max_; }
  double gain_per_step() const { return gain_per_step_; }
  void set_gain_per_step(double g);

  std::span<const double> delta_n() const { return delta_n_; }
  // Mutable view. Call project() or validate() after writing through it.
  std::span<double> delta_n_mut() { return delta_n_; }
  std::span<const double> slice(std::size_t z) const;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (z * shape_.ny + y) * shape_.nx + x; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return delta_n_[index(x, y, z)]; }

  // Replaces the whole grid; throws DomainError on size or bound violation.
  void assign(std::vector<double> values);

  // Clamps every voxel into [-delta_n_max, delta_n_max].
  void project();
  void validate() const;

  // Same medium traversed from the far facet back to the near one.
  VoxelMedium reversed_z() const;

  bool operator==(const VoxelMedium&) const = default;

 private:
  GridShape shape_;
  VoxelPitch pitch_;
  double background_index_;
  double delta_n_max_;
  double gain_per_step_;
  std::vector<double> delta_n_;
};

// Complex transverse field envelope. |amplitude|^2 is intensity in W/m^2.
struct OpticalField {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double wavelength_vacuum = 0;
  double pitch_x = 0;
  double pitch_y = 0;
  std::vector<Complex> amplitude;

  OpticalField() = default;
  OpticalField(std::size_t nx_, std::size_t ny_, double wavelength, double px, double py)
      : nx(nx_), ny(ny_), wavelength_vacuum(wavelength), pitch_x(px), pitch_y(py), amplitude(nx_ * ny_) {}

  double sample_area() const { return pitch_x * pitch_y; }
  // Total power in W.
  double power() const;
  bool finite() const;
};

}  // namespace pfm::wave
