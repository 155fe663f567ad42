#include "pfm/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fft.hpp"
#include "pfm/error.hpp"

namespace pfm::wave {
namespace {

// Fraction of each transverse edge covered by the absorbing taper, and the
// per-step attenuation exponent at the outermost sample.
constexpr double kAbsorbFraction = 0.125;
constexpr double kAbsorbStrength = 0.5;

std::vector<double> wavenumbers(std::size_t n, double pitch) {
  std::vector<double> k(n);
  const double dk = 2.0 * std::numbers::pi / (static_cast<double>(n) * pitch);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<double>(j <= n / 2 ? static_cast<std::ptrdiff_t>(j)
                                                   : static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(n));
    k[j] = jj * dk;
  }
  return k;
}

std::vector<double> edge_profile(std::size_t n) {
  std::vector<double> m(n, 1.0);
  const auto band = static_cast<std::size_t>(std::floor(kAbsorbFraction * static_cast<double>(n)));
  for (std::size_t j = 0; j < band; ++j) {
    const double t = static_cast<double>(band - j) / static_cast<double>(band);
    const double a = std::exp(-kAbsorbStrength * t * t);
    m[j] = a;
    m[n - 1 - j] = a;
  }
  return m;
}

}  // namespace

const char* to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "absorbing"; }

Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "absorbing") return Boundary::absorbing;
  throw DomainError("unknown boundary '" + s + "'");
}

void PropagationSettings::validate() const {
  if (z_steps_per_voxel < 1) throw DomainError("settings: z_steps_per_voxel must be >= 1");
  if (!(n2 >= 0) || !std::isfinite(n2)) throw DomainError("settings: n2 must be finite and non-negative");
  if (!(max_step_phase > 0)) throw DomainError("settings: max_step_phase must be positive");
}

Propagator::Propagator(const VoxelMedium& medium, const PropagationSettings& settings, double wavelength_vacuum)
    : settings_(settings),
      nx_(medium.shape().nx),
      ny_(medium.shape().ny),
      n_(medium.shape().transverse()),
      nz_(medium.shape().nz),
      steps_(medium.shape().nz * settings.z_steps_per_voxel),
      k0_(2.0 * std::numbers::pi / wavelength_vacuum),
      dz_(medium.pitch().z / static_cast<double>(settings.z_steps_per_voxel)),
      gain_(medium.gain_per_step()),
      fft_(std::make_unique<Fft2d>(medium.shape().nx, medium.shape().ny)) {
  settings_.validate();
  if (!(wavelength_vacuum > 0)) throw DomainError("propagator: wavelength must be positive");

  interval_ = settings_.checkpoint_interval > 0
                  ? std::min(settings_.checkpoint_interval, steps_)
                  : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(steps_))));

  const auto kx = wavenumbers(nx_, medium.pitch().x);
  const auto ky = wavenumbers(ny_, medium.pitch().y);
  const double beta = k0_ * medium.background_index();
  const double norm = 1.0 / static_cast<double>(n_);
  h_half_.resize(n_);
  h_full_.resize(n_);
  for (std::size_t y = 0; y < ny_; ++y) {
    for (std::size_t x = 0; x < nx_; ++x) {
      const double kt2 = kx[x] * kx[x] + ky[y] * ky[y];
      const double phase = -kt2 * dz_ / (2.0 * beta);
      h_half_[y * nx_ + x] = std::polar(norm, 0.5 * phase);
      h_full_[y * nx_ + x] = std::polar(norm, phase);
    }
  }

  if (settings_.boundary == Boundary::absorbing) {
    const auto mx = edge_profile(nx_);
    const auto my = edge_profile(ny_);
    mask_.resize(n_);
    for (std::size_t y = 0; y < ny_; ++y) {
      for (std::size_t x = 0; x < nx_; ++x) mask_[y * nx_ + x] = mx[x] * my[y];
    }
  }

  screens_.resize(medium.shape().voxels());
  const auto dn = medium.delta_n();
  for (std::size_t i = 0; i < dn.size(); ++i) screens_[i] = std::polar(1.0, k0_ * dn[i] * dz_);
}

Propagator::~Propagator() = default;

std::size_t Propagator::checkpoint_bytes() const {
  const std::size_t checkpoints = (steps_ + interval_ - 1) / interval_;
  const std::size_t per_step = settings_.kerr_enabled ? 2 : 1;
  return (checkpoints + per_step * interval_ + 2) * n_ * sizeof(Complex);
}

void Propagator::apply_transfer(const std::vector<Complex>& h, Complex* u, bool conjugate) const {
  fft_->forward(u);
  if (conjugate) {
    for (std::size_t i = 0; i < n_; ++i) u[i] *= std::conj(h[i]);
  } else {
    for (std::size_t i = 0; i < n_; ++i) u[i] *= h[i];
  }
  fft_->inverse(u);
}

void Propagator::apply_mask(Complex* u) const {
  for (std::size_t i = 0; i < n_; ++i) u[i] *= mask_[i];
}

// Diffraction between phase screens: transition 0 precedes step 0,
// transition `steps_` follows the last step.
void Propagator::transition(std::size_t k, Complex* u, bool adjoint) const {
  const bool absorbing = settings_.boundary == Boundary::absorbing;
  if (k == 0) {
    apply_transfer(h_half_, u, adjoint);
  } else if (k < steps_) {
    if (absorbing) {
      apply_transfer(h_half_, u, adjoint);
      apply_mask(u);
      apply_transfer(h_half_, u, adjoint);
    } else {
      apply_transfer(h_full_, u, adjoint);
    }
  } else if (absorbing) {
    if (adjoint) {
      apply_mask(u);
      apply_transfer(h_half_, u, true);
    } else {
      apply_transfer(h_half_, u, false);
      apply_mask(u);
    }
  } else {
    apply_transfer(h_half_, u, adjoint);
  }
}

void Propagator::phase_step(std::size_t k, Complex* u, Complex* nl) const {
  const std::size_t layer = k / settings_.z_steps_per_voxel;
  const Complex* screen = screens_.data() + layer * n_;
  if (settings_.kerr_enabled) {
    const double coeff = k0_ * settings_.n2 * dz_;
    double peak = 0;
    for (std::size_t i = 0; i < n_; ++i) peak = std::max(peak, std::norm(u[i]));
    if (!std::isfinite(peak) || coeff * peak > settings_.max_step_phase) {
      std::ostringstream msg;
      msg << "split-step refused at z-step " << k << ": per-step nonlinear phase " << coeff * peak
          << " rad exceeds the limit " << settings_.max_step_phase
          << " rad; lower the peak power or raise z_steps_per_voxel";
      throw StabilityError(msg.str());
    }
    for (std::size_t i = 0; i < n_; ++i) {
      const Complex f = std::polar(1.0, coeff * std::norm(u[i]));
      if (nl != nullptr) nl[i] = f;
      u[i] *= screen[i] * f * gain_;
    }
  } else {
    for (std::size_t i = 0; i < n_; ++i) u[i] *= screen[i] * gain_;
  }
}

void Propagator::forward(std::span<Complex> field) const {
  if (field.size() != n_) throw DomainError("propagate: field and medium transverse grids differ");
  Complex* u = field.data();
  for (std::size_t k = 0; k < steps_; ++k) {
    transition(k, u, false);
    phase_step(k, u, nullptr);
  }
  transition(steps_, u, false);
  for (std::size_t i = 0; i < n_; ++i) {
    if (!std::isfinite(u[i].real()) || !std::isfinite(u[i].imag())) {
      throw StabilityError("propagate: field became non-finite");
    }
  }
}

void Propagator::gradient(std::span<const Complex> input,
                          const std::function<void(std::span<const Complex>, std::span<Complex>)>& seed,
                          Gradients& grads, std::span<Complex> lambda_in) const {
  if (input.size() != n_) throw DomainError("gradient: field and medium transverse grids differ");
  if (!grads.d_delta_n.empty() && grads.d_delta_n.size() != nz_ * n_) {
    throw DomainError("gradient: d_delta_n must hold one entry per voxel");
  }
  const std::size_t need = checkpoint_bytes();
  if (need > settings_.checkpoint_budget_bytes) {
    std::ostringstream msg;
    msg << "adjoint checkpoints need " << need << " bytes but the budget is " << settings_.checkpoint_budget_bytes
        << " bytes; raise checkpoint_budget_bytes to at least " << need;
    throw BudgetError(msg.str(), need);
  }

  const std::size_t segments = (steps_ + interval_ - 1) / interval_;
  std::vector<Complex> checkpoints(segments * n_);
  std::vector<Complex> u(input.begin(), input.end());
  for (std::size_t k = 0; k < steps_; ++k) {
    if (k % interval_ == 0) std::copy(u.begin(), u.end(), checkpoints.begin() + static_cast<std::ptrdiff_t>((k / interval_) * n_));
    transition(k, u.data(), false);
    phase_step(k, u.data(), nullptr);
  }
  transition(steps_, u.data(), false);

  std::vector<Complex> lambda(n_);
  seed(u, lambda);
  transition(steps_, lambda.data(), true);

  const bool kerr = settings_.kerr_enabled;
  const double coeff = k0_ * settings_.n2 * dz_;
  std::vector<Complex> pre(interval_ * n_);
  std::vector<Complex> nl(kerr ? interval_ * n_ : 0);
  std::vector<double> w(n_);

  for (std::size_t s = segments; s-- > 0;) {
    const std::size_t a = s * interval_;
    const std::size_t b = std::min(steps_, a + interval_);
    std::copy_n(checkpoints.begin() + static_cast<std::ptrdiff_t>(s * n_), n_, u.begin());
    for (std::size_t k = a; k < b; ++k) {
      transition(k, u.data(), false);
      std::copy(u.begin(), u.end(), pre.begin() + static_cast<std::ptrdiff_t>((k - a) * n_));
      phase_step(k, u.data(), kerr ? nl.data() + (k - a) * n_ : nullptr);
    }

    for (std::size_t k = b; k-- > a;) {
      const std::size_t layer = k / settings_.z_steps_per_voxel;
      const Complex* screen = screens_.data() + layer * n_;
      const Complex* p = pre.data() + (k - a) * n_;
      const Complex* f = kerr ? nl.data() + (k - a) * n_ : nullptr;
      double dg = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        const Complex rot = kerr ? screen[i] * f[i] : screen[i];
        const Complex unit_gain_out = p[i] * rot;  // post-phase field divided by the gain
        const Complex out = unit_gain_out * gain_;
        const Complex lc = std::conj(lambda[i]);
        w[i] = -(lc * out).imag();
        dg += (lc * unit_gain_out).real();
        Complex next = std::conj(rot) * gain_ * lambda[i];
        if (kerr) next += 2.0 * coeff * w[i] * p[i];
        lambda[i] = next;
      }
      grads.d_gain += dg;
      if (!grads.d_delta_n.empty()) {
        double* dn = grads.d_delta_n.data() + layer * n_;
        const double scale = k0_ * dz_;
        for (std::size_t i = 0; i < n_; ++i) dn[i] += scale * w[i];
      }
      transition(k, lambda.data(), true);
    }
  }

  if (!lambda_in.empty()) {
    if (lambda_in.size() != n_) throw DomainError("gradient: lambda_in has the wrong size");
    std::copy(lambda.begin(), lambda.end(), lambda_in.begin());
  }
}

}  // namespace pfm::wave
