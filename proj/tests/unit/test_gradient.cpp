#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pfm/design.hpp"
#include "pfm/error.hpp"
#include "pfm/gradient.hpp"

using namespace pfm;
using namespace pfm::wave;
using namespace pfm::inverse;

namespace {

PfmDesign grad_design(double peak_power) {
  DesignLayout l;
  l.shape = {8, 8, 8};
  l.input_dim = 4;
  l.output_dim = 4;
  l.input_gap = 1;
  l.output_gap = 1;
  l.init_sigma = 0.02;
  l.seed = 5;
  l.peak_power_scale = peak_power;
  return make_design(l);
}

Batch small_batch() {
  ToyDatasetSpec spec;
  spec.dim = 4;
  spec.samples = 8;
  const auto ds = make_toy_dataset(spec);
  const std::vector<std::size_t> idx{0, 1, 3};
  return make_batch(ds, idx);
}

// Worst per-voxel relative error; voxels whose reference is below `floor`
// times the largest entry are judged against that floor instead.
double worst_relative_error(std::span<const double> got, std::span<const double> ref, std::span<const std::size_t> probe,
                            double floor = 1e-3) {
  double scale = 0;
  for (std::size_t i : probe) scale = std::max(scale, std::abs(ref[i]));
  double worst = 0;
  for (std::size_t i : probe) {
    const double denom = std::max(std::abs(ref[i]), floor * scale);
    worst = std::max(worst, std::abs(got[i] - ref[i]) / denom);
  }
  return worst;
}

std::vector<std::size_t> every_nth(std::size_t n, std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; i += stride) out.push_back(i);
  return out;
}

}  // namespace

TEST_SUITE("gradient") {
  TEST_CASE("adjoint matches central differences, kerr off") {
    const auto d = grad_design(1.0);
    const auto b = small_batch();
    const auto obj = classification_objective(10);
    const auto probe = every_nth(d.medium.shape().voxels(), 7);
    const auto ga = gradient_adjoint(d, b, {}, obj);
    const auto gf = gradient_fd(d, b, {}, obj, 1e-6, probe);
    CHECK(ga.loss == doctest::Approx(gf.loss).epsilon(1e-12));
    CHECK(worst_relative_error(ga.d_delta_n, gf.d_delta_n, probe) <= 1e-4);
  }

  TEST_CASE("adjoint matches central differences, kerr on, both boundaries") {
    const auto d = grad_design(1e7);
    const auto b = small_batch();
    const auto obj = classification_objective(10);
    const auto probe = every_nth(d.medium.shape().voxels(), 7);
    for (auto boundary : {Boundary::periodic, Boundary::absorbing}) {
      PropagationSettings s;
      s.kerr_enabled = true;
      s.boundary = boundary;
      CHECK(nonlinearity_witness(d, b.inputs[0], s) > 1e-3);
      const auto ga = gradient_adjoint(d, b, s, obj);
      const auto gf = gradient_fd(d, b, s, obj, 1e-6, probe);
      CHECK(worst_relative_error(ga.d_delta_n, gf.d_delta_n, probe) <= 1e-3);
    }
  }

  TEST_CASE("gain derivative matches a one-dimensional difference") {
    const auto d = grad_design(1e7);
    const auto b = small_batch();
    const auto obj = classification_objective(10);
    for (bool kerr : {false, true}) {
      PropagationSettings s;
      s.kerr_enabled = kerr;
      const auto ga = gradient_adjoint(d, b, s, obj);
      const double fd = gain_gradient_fd(d, b, s, obj, 1e-7);
      CHECK(std::abs(ga.d_gain - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }

  TEST_CASE("input gradient matches differences on the input vector") {
    const auto d = grad_design(1e7);
    auto b = small_batch();
    b.inputs.resize(1);
    b.labels.resize(1);
    const auto obj = classification_objective(10);
    PropagationSettings s;
    s.kerr_enabled = true;
    const auto ga = gradient_adjoint(d, b, s, obj, true);
    REQUIRE(ga.d_inputs.size() == 1);
    for (std::size_t i = 0; i < 4; ++i) {
      auto up = b, dn = b;
      up.inputs[0][i] += 1e-6;
      dn.inputs[0][i] -= 1e-6;
      const double fd = (batch_loss(d, up, s, obj) - batch_loss(d, dn, s, obj)) / 2e-6;
      CHECK(ga.d_inputs[0][i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }

  TEST_CASE("zero-field input gives zero gradient") {
    const auto d = grad_design(1.0);
    Batch b;
    b.inputs = {std::vector<double>(4, 0.0)};
    b.labels = {1};
    const auto obj = classification_objective(10);
    const auto probe = every_nth(d.medium.shape().voxels(), 31);
    const auto gf = gradient_fd(d, b, {}, obj, 1e-6, probe);
    const auto ga = gradient_adjoint(d, b, {}, obj);
    for (std::size_t i : probe) CHECK(gf.d_delta_n[i] == 0);
    for (double g : ga.d_delta_n) CHECK(g == 0);
    CHECK(ga.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }

  TEST_CASE("single voxel: analytic plane-wave phase derivative") {
    // 1x1x1 medium with homodyne readout: readout = cos(k0 (dn + n2 I) dz).
    VoxelMedium m({1, 1, 1}, {1e-6, 1e-6, 1e-6}, 1.5);
    m.assign({0.03});
    PfmDesign d{.medium = m,
                .wavelength_vacuum = 1550e-9,
                .encoding = Encoding::amplitude,
                .input_regions = {{0, 0, 1, 1}},
                .output_bins = {{0, 0, 1, 1}},
                .readout = ReadoutMode::homodyne,
                .peak_power_scale = 1.0,
                .calibration_gain = {},
                .calibration_offset = {}};
    Objective first = [](std::span<const double> r, std::size_t, std::span<double> g) {
      if (!g.empty()) g[0] = 1.0;
      return r[0];
    };
    Batch b;
    b.inputs = {{1.0}};
    b.labels = {0};
    const double k0 = 2 * std::numbers::pi / d.wavelength_vacuum;
    const double dz = 1e-6;
    for (bool kerr : {false, true}) {
      PropagationSettings s;
      s.kerr_enabled = kerr;
      s.n2 = 2e-14;  // I = 1e12 W/m^2, so the Kerr phase is comparable to the index phase
      const double intensity = 1.0 / (dz * dz);
      const double phi = k0 * (0.03 + (kerr ? s.n2 * intensity : 0.0)) * dz;
      const double analytic = -std::sin(phi) * k0 * dz;
      CHECK(batch_loss(d, b, s, first) == doctest::Approx(std::cos(phi)).epsilon(1e-12));
      const auto gf = gradient_fd(d, b, s, first, 1e-6);
      CHECK(std::abs(gf.d_delta_n[0] - analytic) <= 1e-6 * std::abs(analytic));
      const auto ga = gradient_adjoint(d, b, s, first);
      CHECK(std::abs(ga.d_delta_n[0] - analytic) <= 1e-9 * std::abs(analytic));
    }
  }

  TEST_CASE("adjoint result does not depend on the thread count") {
    const auto d = grad_design(1e7);
    const auto b = small_batch();
    PropagationSettings s;
    s.kerr_enabled = true;
    const auto obj = classification_objective(10);
    const auto a = gradient_adjoint(d, b, s, obj);
    const auto c = gradient_adjoint(d, b, s, obj);
    CHECK(a.d_delta_n == c.d_delta_n);
    CHECK(a.loss == c.loss);
  }

  TEST_CASE("checkpoint budget is enforced") {
    const auto d = grad_design(1.0);
    PropagationSettings s;
    s.checkpoint_budget_bytes = 16;
    const auto obj = classification_objective(10);
    CHECK_THROWS_AS(gradient_adjoint(d, small_batch(), s, obj), BudgetError);
  }
}
