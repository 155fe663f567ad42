#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pfm/medium.hpp"

namespace pfm::wave {

// Axis-aligned block of transverse samples on a facet.
struct Region {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 1;
  std::size_t height = 1;

  std::size_t samples() const { return width * height; }
  bool contains(std::size_t x, std::size_t y) const {
    return x >= x0 && x < x0 + width && y >= y0 && y < y0 + height;
  }
  bool operator==(const Region&) const = default;
};

enum class Encoding {
  // Real amplitude proportional to v_i; negative entries carry a pi phase.
  amplitude,
  // Uniform amplitude with phase v_i (mod 2 pi).
  phase,
};

enum class ReadoutMode {
  // Detector power per bin, W.
  intensity,
  // Real quadrature of the bin's mode amplitude against a zero-phase
  // reference (homodyne detection).
  homodyne,
};

const char* to_string(Encoding e);
const char* to_string(ReadoutMode m);
Encoding encoding_from_string(const std::string& s);
ReadoutMode readout_from_string(const std::string& s);

// The fabricated device: medium plus input/output facet layout.
struct PfmDesign {
  VoxelMedium medium;
  double wavelength_vacuum = 1550e-9;
  Encoding encoding = Encoding::amplitude;
  std::vector<Region> input_regions;
  std::vector<Region> output_bins;
  ReadoutMode readout = ReadoutMode::intensity;
  // Total input power (W) carried by a unit-norm input vector.
  double peak_power_scale = 1.0;
  // Optional per-bin affine detector calibration; empty means none.
  std::vector<double> calibration_gain;
  std::vector<double> calibration_offset;

  std::size_t input_dim() const { return input_regions.size(); }
  std::size_t output_dim() const { return output_bins.size(); }

  // Regions disjoint and inside the grid, calibration sized to the bins.
  void validate() const;

  bool operator==(const PfmDesign&) const = default;
};

// `count` equal square blocks in a centred near-square tiling of an nx-by-ny
// facet, `gap` samples apart.
std::vector<Region> tile_regions(std::size_t nx, std::size_t ny, std::size_t count, std::size_t gap);

struct DesignLayout {
  GridShape shape{64, 64, 128};
  // Defaults to lambda/n, one parameter per wavelength-in-medium cube.
  double voxel_pitch = 0;
  double wavelength_vacuum = 1550e-9;
  double background_index = 1.5;
  double delta_n_max = kDefaultDeltaNMax;
  std::size_t input_dim = 16;
  std::size_t output_dim = 4;
  std::size_t input_gap = 2;
  std::size_t output_gap = 4;
  Encoding encoding = Encoding::amplitude;
  double peak_power_scale = 1.0;
  // Standard deviation of the seeded initial delta_n.
  double init_sigma = 0.0;
  std::uint64_t seed = 0;
};

PfmDesign make_design(const DesignLayout& layout);

}  // namespace pfm::wave
