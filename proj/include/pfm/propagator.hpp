#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pfm/medium.hpp"

namespace pfm::wave {

class Fft2d;

enum class Boundary { periodic, absorbing };

const char* to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

struct PropagationSettings {
  bool kerr_enabled = false;
  double n2 = 1e-20;  // m^2/W
  std::size_t z_steps_per_voxel = 1;
  Boundary boundary = Boundary::periodic;
  // Refuse to step when the per-step Kerr phase exceeds this (rad).
  double max_step_phase = std::numbers::pi / 4;
  // Adjoint checkpoint spacing in z-steps; 0 picks ceil(sqrt(steps)).
  std::size_t checkpoint_interval = 0;
  std::size_t checkpoint_budget_bytes = std::size_t{1} << 30;

  void validate() const;
};

// Symmetric split-step paraxial propagation through a VoxelMedium. Each
// z-step of length dz applies half a diffraction step, the phase screen
// exp(i k0 (dn + n2 |u|^2) dz), the per-step gain, and the second half step;
// with an absorbing boundary a real edge mask follows every step. Adjacent
// half steps are fused when no mask separates them.
//
// Construction precomputes transfer functions and the linear phase screens,
// so one Propagator should be reused for every field sent through a fixed
// medium. All methods are const and safe to call concurrently.
class Propagator {
 public:
  Propagator(const VoxelMedium& medium, const PropagationSettings& settings, double wavelength_vacuum);
  ~Propagator();
  Propagator(const Propagator&) = delete;
  Propagator& operator=(const Propagator&) = delete;

  std::size_t steps() const { return steps_; }
  std::size_t transverse() const { return n_; }
  double wavenumber() const { return k0_; }
  double step_length() const { return dz_; }

  // In-place propagation from the input facet to the output facet.
  void forward(std::span<Complex> field) const;

  struct Gradients {
    std::span<double> d_delta_n;  // accumulated into, one entry per voxel; may be empty
    double d_gain = 0;            // d loss / d gain_per_step, accumulated
  };

  // Reverse-mode sweep. `seed` receives the output field and must write
  // lambda_out = 2 dL/d(conj u_out). On return `lambda_in` (if non-empty)
  // holds the adjoint field at the input facet, so dL = Re<lambda_in, du_in>.
  // Field slices are checkpointed every checkpoint_interval steps and
  // recomputed segment by segment on the way back.
  void gradient(std::span<const Complex> input,
                const std::function<void(std::span<const Complex> output, std::span<Complex> lambda)>& seed,
                Gradients& grads, std::span<Complex> lambda_in) const;

  std::size_t checkpoint_interval() const { return interval_; }
  // Bytes of field storage one gradient() call needs.
  std::size_t checkpoint_bytes() const;

 private:
  void transition(std::size_t k, Complex* u, bool adjoint) const;
  void apply_transfer(const std::vector<Complex>& h, Complex* u, bool conjugate) const;
  void apply_mask(Complex* u) const;
  // Applies the phase screen and gain of step k; fills nl (if non-null) with
  // the Kerr factor used.
  void phase_step(std::size_t k, Complex* u, Complex* nl) const;

  PropagationSettings settings_;
  std::size_t nx_, ny_, n_, nz_, steps_, interval_;
  double k0_, dz_, gain_;
  std::unique_ptr<Fft2d> fft_;
  std::vector<Complex> h_half_, h_full_;  // include the 1/N DFT normalization
  std::vector<double> mask_;
  std::vector<Complex> screens_;  // exp(i k0 dn dz), one slice per voxel layer
};

}  // namespace pfm::wave
