#include "pfm/wave.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pfm/error.hpp"

namespace pfm::wave {
namespace {

void check_vector(std::span<const double> v, const PfmDesign& d) {
  if (v.size() != d.input_dim()) {
    throw DomainError("encode_input: vector has " + std::to_string(v.size()) + " entries, design expects " +
                      std::to_string(d.input_dim()));
  }
  for (double x : v) {
    if (std::isnan(x)) throw DomainError("encode_input: NaN in input vector");
  }
}

double region_area(const Region& r, const VoxelPitch& p) { return static_cast<double>(r.samples()) * p.x * p.y; }

double phase_amplitude(const PfmDesign& d) {
  double total = 0;
  for (const auto& r : d.input_regions) total += region_area(r, d.medium.pitch());
  return std::sqrt(d.peak_power_scale / total);
}

template <typename Fn>
void for_each_sample(const Region& r, std::size_t nx, Fn&& fn) {
  for (std::size_t y = r.y0; y < r.y0 + r.height; ++y) {
    for (std::size_t x = r.x0; x < r.x0 + r.width; ++x) fn(y * nx + x);
  }
}

double wrap_phase(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return x - two_pi * std::floor(x / two_pi);
}

}  // namespace

OpticalField encode_input(std::span<const double> v, const PfmDesign& d) {
  check_vector(v, d);
  const auto& shape = d.medium.shape();
  const auto& pitch = d.medium.pitch();
  OpticalField f(shape.nx, shape.ny, d.wavelength_vacuum, pitch.x, pitch.y);
  const double a_phase = d.encoding == Encoding::phase ? phase_amplitude(d) : 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Region& r = d.input_regions[i];
    const Complex value = d.encoding == Encoding::amplitude
                              ? Complex(std::sqrt(d.peak_power_scale / region_area(r, pitch)) * v[i], 0.0)
                              : std::polar(a_phase, wrap_phase(v[i]));
    for_each_sample(r, shape.nx, [&](std::size_t idx) { f.amplitude[idx] = value; });
  }
  return f;
}

std::vector<double> encode_input_gradient(std::span<const double> v, const PfmDesign& d,
                                          std::span<const Complex> lambda_in) {
  check_vector(v, d);
  const auto& shape = d.medium.shape();
  const auto& pitch = d.medium.pitch();
  std::vector<double> g(v.size(), 0.0);
  const double a_phase = d.encoding == Encoding::phase ? phase_amplitude(d) : 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Region& r = d.input_regions[i];
    Complex sum = 0;
    for_each_sample(r, shape.nx, [&](std::size_t idx) { sum += std::conj(lambda_in[idx]); });
    if (d.encoding == Encoding::amplitude) {
      g[i] = std::sqrt(d.peak_power_scale / region_area(r, pitch)) * sum.real();
    } else {
      // du/dv = i u.
      const Complex u = std::polar(a_phase, wrap_phase(v[i]));
      g[i] = (sum * Complex(0, 1) * u).real();
    }
  }
  return g;
}

OpticalField propagate(const OpticalField& f, const VoxelMedium& m, const PropagationSettings& s) {
  if (f.nx != m.shape().nx || f.ny != m.shape().ny) throw DomainError("propagate: field and medium grids differ");
  if (!f.finite()) throw StabilityError("propagate: input field is not finite");
  const Propagator p(m, s, f.wavelength_vacuum);
  OpticalField out = f;
  p.forward(out.amplitude);
  return out;
}

std::vector<double> readout(const OpticalField& f, const PfmDesign& d) {
  const auto& shape = d.medium.shape();
  if (f.nx != shape.nx || f.ny != shape.ny) throw DomainError("readout: field does not match the design grid");
  const double da = f.sample_area();
  std::vector<double> out(d.output_dim(), 0.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    const Region& r = d.output_bins[b];
    if (r.x0 + r.width > shape.nx || r.y0 + r.height > shape.ny) throw DomainError("readout: bin outside grid");
    if (d.readout == ReadoutMode::intensity) {
      double s = 0;
      for_each_sample(r, shape.nx, [&](std::size_t idx) { s += std::norm(f.amplitude[idx]); });
      out[b] = s * da;
    } else {
      Complex s = 0;
      for_each_sample(r, shape.nx, [&](std::size_t idx) { s += f.amplitude[idx]; });
      out[b] = s.real() * da / std::sqrt(static_cast<double>(r.samples()) * da);
    }
    if (!d.calibration_gain.empty()) out[b] = d.calibration_gain[b] * out[b] + d.calibration_offset[b];
  }
  return out;
}

void readout_adjoint(std::span<const Complex> field, const PfmDesign& d, std::span<const double> d_readout,
                     std::span<Complex> lambda) {
  const auto& shape = d.medium.shape();
  const double da = d.medium.pitch().x * d.medium.pitch().y;
  std::fill(lambda.begin(), lambda.end(), Complex(0, 0));
  for (std::size_t b = 0; b < d.output_dim(); ++b) {
    const Region& r = d.output_bins[b];
    double g = d_readout[b];
    if (!d.calibration_gain.empty()) g *= d.calibration_gain[b];
    if (d.readout == ReadoutMode::intensity) {
      const double c = 2.0 * g * da;
      for_each_sample(r, shape.nx, [&](std::size_t idx) { lambda[idx] = c * field[idx]; });
    } else {
      const double c = g * da / std::sqrt(static_cast<double>(r.samples()) * da);
      for_each_sample(r, shape.nx, [&](std::size_t idx) { lambda[idx] = c; });
    }
  }
}

std::vector<double> infer(const PfmDesign& d, std::span<const double> v, const PropagationSettings& s) {
  const Propagator p(d.medium, s, d.wavelength_vacuum);
  return infer(d, p, v);
}

std::vector<double> infer(const PfmDesign& d, const Propagator& p, std::span<const double> v) {
  OpticalField f = encode_input(v, d);
  p.forward(f.amplitude);
  return readout(f, d);
}

double nonlinearity_witness(const PfmDesign& d, std::span<const double> v, const PropagationSettings& s,
                            double alpha) {
  const Propagator p(d.medium, s, d.wavelength_vacuum);
  std::vector<double> scaled(v.begin(), v.end());
  for (double& x : scaled) x *= alpha;
  const auto base = infer(d, p, v);
  const auto big = infer(d, p, scaled);
  double num = 0, den = 0;
  for (std::size_t b = 0; b < base.size(); ++b) {
    num = std::max(num, std::abs(big[b] - alpha * alpha * base[b]));
    den = std::max(den, std::abs(alpha * alpha * base[b]));
  }
  return den > 0 ? num / den : 0.0;
}

Eigen::VectorXcd bin_amplitudes(const OpticalField& f, const PfmDesign& d) {
  const double da = f.sample_area();
  Eigen::VectorXcd c(static_cast<Eigen::Index>(d.output_dim()));
  for (std::size_t b = 0; b < d.output_dim(); ++b) {
    const Region& r = d.output_bins[b];
    Complex s = 0;
    for_each_sample(r, f.nx, [&](std::size_t idx) { s += f.amplitude[idx]; });
    c[static_cast<Eigen::Index>(b)] = s * da / std::sqrt(static_cast<double>(r.samples()) * da);
  }
  return c;
}

Eigen::VectorXcd field_map(const PfmDesign& d, std::span<const double> v, const PropagationSettings& s) {
  return bin_amplitudes(propagate(encode_input(v, d), d.medium, s), d);
}

Eigen::MatrixXcd extract_linear_matrix(const PfmDesign& d, const PropagationSettings& s) {
  if (s.kerr_enabled) throw DomainError("extract_linear_matrix: the map is only linear with kerr disabled");
  const auto& shape = d.medium.shape();
  const auto& pitch = d.medium.pitch();
  const Propagator p(d.medium, s, d.wavelength_vacuum);
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(d.output_dim()), static_cast<Eigen::Index>(d.input_dim()));
  for (std::size_t j = 0; j < d.input_dim(); ++j) {
    const Region& r = d.input_regions[j];
    OpticalField f(shape.nx, shape.ny, d.wavelength_vacuum, pitch.x, pitch.y);
    const double a = 1.0 / std::sqrt(region_area(r, pitch));
    for_each_sample(r, shape.nx, [&](std::size_t idx) { f.amplitude[idx] = a; });
    p.forward(f.amplitude);
    m.col(static_cast<Eigen::Index>(j)) = bin_amplitudes(f, d);
  }
  return m;
}

}  // namespace pfm::wave
