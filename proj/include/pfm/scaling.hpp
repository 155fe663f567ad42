#pragma once

// Closed-form scaling model for an optical physical foundation model (a
// nanostructured glass tube whose refractive-index voxels hold the weights)
// and the digital-electronic reference it is compared against.
//
// All quantities are SI. Nothing here rounds; the table formatters in
// table_format.hpp own every rounding rule.

#include <cstdint>
#include <numbers>

namespace pfm::scaling {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

struct PhysicalConstants {
  double wavelength_vacuum = 1550e-9;     // m
  double refractive_index = 1.5;          // fused silica
  double nonlinear_index = 1e-20;         // n2, m^2/W
  double pulse_duration = 1e-12;          // s
  double io_cost_per_element = 100e-12;   // J, lumped I/O + modulation cost
  double avg_power_cap = 1e3;             // W, average optical power in the tube
  double nl_phase_target = 2.0 * std::numbers::pi;  // rad
  // Transverse area of the pump beam relative to the tube cross-section.
  // 0.25 is a Gaussian beam whose width is half the tube side.
  double beam_area_fraction = 0.25;
  double digital_op_cost = 1e-12;         // J per 8-bit operation
  double hbm_capacity = 192e9;            // bytes per GPU
  double hbm_bandwidth = 8e12;            // bytes/s per GPU
  double gpu_volume = 1e-3;               // m^3 per GPU
  double digital_bytes_per_param = 1.0;

  // Throws DomainError unless every field is strictly positive, the
  // wavelength lies in (100 nm, 10 um) and the beam fraction is <= 1.
  void validate() const;
};

struct TubeGeometry {
  double side = 0;                // m, square cross-section edge
  double length = 0;              // m
  double cross_section_area = 0;  // m^2
  std::uint64_t guided_modes = 0;
};

struct ScalingReport {
  double param_count = 0;
  double volume = 0;
  TubeGeometry geometry;
  std::uint64_t io_dimension = 0;
  double peak_power = 0;
  double pulse_energy = 0;
  double io_energy = 0;
  double inference_energy = 0;
  double propagation_delay = 0;
  double inference_time = 0;
  double inference_rate = 0;
  double critical_power_ratio = 0;
  double digital_energy = 0;
  double digital_time = 0;
  double digital_cube_side = 0;
};

struct MemoryWallReport {
  double param_count = 0;
  double storage_area = 0;    // m^2
  double stacked_volume = 0;  // m^3
  double read_time = 0;       // s
};

struct InferenceTime {
  double time = 0;  // s
  double rate = 0;  // Hz
};

struct DigitalReference {
  double energy = 0;     // J
  double time = 0;       // s
  double cube_side = 0;  // m
};

inline constexpr double kDefaultAspectRatio = 1000.0;

// V = P (lambda/n)^3: one wavelength-in-medium cube per parameter.
double optical_volume(double param_count, const PhysicalConstants& c);

// Input and output dimension of the tube, round(P^(1/3)).
std::uint64_t io_dimension(double param_count);

// floor(A n^2 / lambda^2). A relative slack of 1e-9 absorbs round-off so
// that A = lambda^2/n^2 counts as exactly one mode.
std::uint64_t guided_modes(double area, const PhysicalConstants& c);

// Splits `volume` into a square tube of length/side = aspect_ratio, widening
// the cross-section (at fixed volume) until it guides n_required modes.
// Throws InfeasibleGeometry if that would make the tube wider than long.
TubeGeometry tube_geometry(double volume, std::uint64_t n_required, const PhysicalConstants& c,
                           double aspect_ratio = kDefaultAspectRatio);

// Peak power giving the target nonlinear phase over the tube length,
// P0 = phi * lambda * A0 / (2 pi n2 L) with A0 = beam_area_fraction * A.
double kerr_peak_power(const TubeGeometry& g, const PhysicalConstants& c);

// Rectangular pulse: E = P0 * tau.
double pulse_energy(double peak_power, const PhysicalConstants& c);

double io_energy(std::uint64_t n, const PhysicalConstants& c);

// max(2 N * io_cost, pulse energy).
double inference_energy(std::uint64_t n, double pulse_energy, const PhysicalConstants& c);

double propagation_delay(const TubeGeometry& g, const PhysicalConstants& c);

// Limited by average optical power or by transit time, whichever is slower.
InferenceTime inference_time(double pulse_energy, const TubeGeometry& g, const PhysicalConstants& c);

// Marburger critical power for self-focusing, 3.79 lambda^2 / (8 pi n n2).
double critical_power(const PhysicalConstants& c);
double critical_power_ratio(double peak_power, const PhysicalConstants& c);

DigitalReference digital_reference(double param_count, const PhysicalConstants& c);

MemoryWallReport memory_wall(double param_count, double bits_per_param, double density_bits_per_m2,
                             double bandwidth_bits_per_s, double layer_thickness);

// Pixels of side `pixel_pitch` fitting in a wafer of the given diameter.
std::uint64_t metasurface_capacity(double wafer_diameter, double pixel_pitch);

// Bytes per second needed to stream N elements of `bits` each at `rate`.
double io_bandwidth(double n, double bits_per_element, double rate);

ScalingReport scaling_report(double param_count, const PhysicalConstants& c,
                             double aspect_ratio = kDefaultAspectRatio);

}  // namespace pfm::scaling
