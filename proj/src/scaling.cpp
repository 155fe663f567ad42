#include "pfm/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pfm/error.hpp"

namespace pfm::scaling {
namespace {

constexpr double kModeSlack = 1e-9;

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

double cube(double x) { return x * x * x; }

}  // namespace

void PhysicalConstants::validate() const {
  const double fields[] = {wavelength_vacuum, refractive_index,   nonlinear_index,      pulse_duration,
                           io_cost_per_element, avg_power_cap,    nl_phase_target,      beam_area_fraction,
                           digital_op_cost,   hbm_capacity,       hbm_bandwidth,        gpu_volume,
                           digital_bytes_per_param};
  for (double f : fields) {
    require(std::isfinite(f) && f > 0, "physical constants must be finite and strictly positive");
  }
  require(wavelength_vacuum > 100e-9 && wavelength_vacuum < 10e-6,
          "wavelength_vacuum must lie in (100 nm, 10 um)");
  require(beam_area_fraction <= 1.0, "beam_area_fraction must be <= 1");
}

double optical_volume(double param_count, const PhysicalConstants& c) {
  require(param_count >= 1, "optical_volume: parameter count must be >= 1");
  return param_count * cube(c.wavelength_vacuum / c.refractive_index);
}

std::uint64_t io_dimension(double param_count) {
  require(param_count >= 1, "io_dimension: parameter count must be >= 1");
  return static_cast<std::uint64_t>(std::llround(std::cbrt(param_count)));
}

std::uint64_t guided_modes(double area, const PhysicalConstants& c) {
  require(area > 0, "guided_modes: area must be positive");
  const double n = c.refractive_index;
  const double modes = area * n * n / (c.wavelength_vacuum * c.wavelength_vacuum);
  // Counts that land a few ulps under an integer round up to it.
  const double nearest = std::round(modes);
  if (std::abs(modes - nearest) <= kModeSlack * nearest) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::floor(modes));
}

TubeGeometry tube_geometry(double volume, std::uint64_t n_required, const PhysicalConstants& c,
                           double aspect_ratio) {
  require(volume > 0, "tube_geometry: volume must be positive");
  require(aspect_ratio >= 1, "tube_geometry: aspect ratio must be >= 1");

  TubeGeometry g;
  g.side = std::cbrt(volume / aspect_ratio);
  g.length = aspect_ratio * g.side;
  if (guided_modes(g.side * g.side, c) < n_required) {
    // Smallest square cross-section supporting n_required modes.
    g.side = std::sqrt(static_cast<double>(n_required)) * c.wavelength_vacuum / c.refractive_index;
    g.length = volume / (g.side * g.side);
    if (g.side > g.length * (1.0 + kModeSlack)) {
      std::ostringstream msg;
      msg << "tube_geometry: volume " << volume << " m^3 cannot guide " << n_required
          << " modes; the required cross-section side " << g.side << " m exceeds the length " << g.length
          << " m";
      throw InfeasibleGeometry(msg.str());
    }
  }
  g.cross_section_area = g.side * g.side;
  g.guided_modes = guided_modes(g.cross_section_area, c);
  return g;
}

double kerr_peak_power(const TubeGeometry& g, const PhysicalConstants& c) {
  require(g.cross_section_area > 0 && g.length > 0, "kerr_peak_power: invalid geometry");
  require(c.nl_phase_target >= 0, "kerr_peak_power: negative phase target");
  const double beam_area = c.beam_area_fraction * g.cross_section_area;
  return c.nl_phase_target * c.wavelength_vacuum * beam_area /
         (2.0 * std::numbers::pi * c.nonlinear_index * g.length);
}

double pulse_energy(double peak_power, const PhysicalConstants& c) {
  require(peak_power >= 0, "pulse_energy: negative peak power");
  return peak_power * c.pulse_duration;
}

double io_energy(std::uint64_t n, const PhysicalConstants& c) {
  return 2.0 * static_cast<double>(n) * c.io_cost_per_element;
}

double inference_energy(std::uint64_t n, double pulse_energy, const PhysicalConstants& c) {
  require(n >= 1, "inference_energy: I/O dimension must be >= 1");
  return std::max(io_energy(n, c), pulse_energy);
}

double propagation_delay(const TubeGeometry& g, const PhysicalConstants& c) {
  return c.refractive_index * g.length / kSpeedOfLight;
}

InferenceTime inference_time(double pulse_energy, const TubeGeometry& g, const PhysicalConstants& c) {
  require(pulse_energy > 0, "inference_time: pulse energy must be positive");
  InferenceTime t;
  t.time = std::max(pulse_energy / c.avg_power_cap, propagation_delay(g, c));
  t.rate = 1.0 / t.time;
  return t;
}

double critical_power(const PhysicalConstants& c) {
  const double lambda = c.wavelength_vacuum;
  return 3.79 * lambda * lambda / (8.0 * std::numbers::pi * c.refractive_index * c.nonlinear_index);
}

double critical_power_ratio(double peak_power, const PhysicalConstants& c) {
  require(peak_power >= 0, "critical_power_ratio: negative peak power");
  return peak_power / critical_power(c);
}

DigitalReference digital_reference(double param_count, const PhysicalConstants& c) {
  require(param_count >= 1, "digital_reference: parameter count must be >= 1");
  DigitalReference d;
  d.energy = param_count * c.digital_op_cost;
  d.time = c.hbm_capacity / c.hbm_bandwidth;
  // Fractional GPU counts: the cube is a packing of card volume, not of cards.
  const double gpus = param_count * c.digital_bytes_per_param / c.hbm_capacity;
  d.cube_side = std::cbrt(gpus * c.gpu_volume);
  return d;
}

MemoryWallReport memory_wall(double param_count, double bits_per_param, double density_bits_per_m2,
                             double bandwidth_bits_per_s, double layer_thickness) {
  require(param_count >= 0 && bits_per_param >= 0, "memory_wall: negative size");
  require(density_bits_per_m2 > 0 && bandwidth_bits_per_s > 0 && layer_thickness > 0,
          "memory_wall: density, bandwidth and thickness must be positive");
  const double bits = param_count * bits_per_param;
  MemoryWallReport r;
  r.param_count = param_count;
  r.storage_area = bits / density_bits_per_m2;
  // Stacking N layers divides the area by N and multiplies the height by N.
  r.stacked_volume = r.storage_area * layer_thickness;
  r.read_time = bits / bandwidth_bits_per_s;
  return r;
}

std::uint64_t metasurface_capacity(double wafer_diameter, double pixel_pitch) {
  require(pixel_pitch > 0 && wafer_diameter > pixel_pitch, "metasurface_capacity: need diameter > pitch > 0");
  const double radius = 0.5 * wafer_diameter;
  return static_cast<std::uint64_t>(std::floor(std::numbers::pi * radius * radius / (pixel_pitch * pixel_pitch)));
}

double io_bandwidth(double n, double bits_per_element, double rate) {
  require(n > 0 && bits_per_element > 0 && rate > 0, "io_bandwidth: inputs must be positive");
  return n * bits_per_element * rate / 8.0;
}

ScalingReport scaling_report(double param_count, const PhysicalConstants& c, double aspect_ratio) {
  c.validate();
  ScalingReport r;
  r.param_count = param_count;
  r.volume = optical_volume(param_count, c);
  r.io_dimension = io_dimension(param_count);
  r.geometry = tube_geometry(r.volume, r.io_dimension, c, aspect_ratio);
  r.peak_power = kerr_peak_power(r.geometry, c);
  r.pulse_energy = pulse_energy(r.peak_power, c);
  r.io_energy = io_energy(r.io_dimension, c);
  r.inference_energy = inference_energy(r.io_dimension, r.pulse_energy, c);
  r.propagation_delay = propagation_delay(r.geometry, c);
  const auto t = inference_time(r.pulse_energy, r.geometry, c);
  r.inference_time = t.time;
  r.inference_rate = t.rate;
  r.critical_power_ratio = critical_power_ratio(r.peak_power, c);
  const auto d = digital_reference(param_count, c);
  r.digital_energy = d.energy;
  r.digital_time = d.time;
  r.digital_cube_side = d.cube_side;
  return r;
}

}  // namespace pfm::scaling
