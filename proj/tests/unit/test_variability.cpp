#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "pfm/compensation.hpp"
#include "pfm/design_io.hpp"
#include "pfm/variability.hpp"

using namespace pfm;
using namespace pfm::variability;
using pfm::test::kerr_on;
using pfm::test::toy;
using pfm::test::trained_reduced;

namespace {

wave::VoxelMedium flat_medium(wave::GridShape shape) {
  return wave::VoxelMedium(shape, {1e-6, 1e-6, 1e-6}, 1.5);
}

double std_of_difference(const wave::VoxelMedium& a, const wave::VoxelMedium& b) {
  double s = 0, s2 = 0;
  const auto x = a.delta_n(), y = b.delta_n();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d;
    s2 += d * d;
  }
  const double n = static_cast<double>(x.size());
  return std::sqrt(s2 / n - (s / n) * (s / n));
}

}  // namespace

TEST_SUITE("variability") {
  TEST_CASE("sigma zero and rate zero is an exact no-op") {
    const auto& d = trained_reduced().design;
    const auto p = perturb(d, {.sigma = 0, .correlation_length = 4, .dead_voxel_rate = 0, .seed = 17});
    CHECK(p == d);
    CHECK(wave::design_hash(p) == wave::design_hash(d));
  }

  TEST_CASE("seeded perturbations are reproducible and distinct") {
    const auto m = flat_medium({16, 16, 16});
    const PerturbationSpec a{.sigma = 0.003, .correlation_length = 1, .dead_voxel_rate = 0, .seed = 1};
    auto b = a;
    b.seed = 2;
    CHECK(perturb(m, a) == perturb(m, a));
    const auto pa = perturb(m, a), pb = perturb(m, b);
    double diff = 0;
    for (std::size_t i = 0; i < pa.delta_n().size(); ++i) diff = std::max(diff, std::abs(pa.delta_n()[i] - pb.delta_n()[i]));
    CHECK(diff > 0);
    CHECK(m.delta_n()[0] == 0);
  }

  TEST_CASE("white noise standard deviation is within 5% of sigma") {
    const auto m = flat_medium({64, 64, 32});
    const auto p = perturb(m, {.sigma = 0.001, .correlation_length = 1, .dead_voxel_rate = 0, .seed = 3});
    CHECK(std_of_difference(p, m) == doctest::Approx(0.001).epsilon(0.05));
  }

  TEST_CASE("correlated noise keeps sigma and correlates neighbours") {
    const auto m = flat_medium({64, 64, 32});
    const auto p = perturb(m, {.sigma = 0.001, .correlation_length = 8, .dead_voxel_rate = 0, .seed = 4});
    CHECK(std_of_difference(p, m) == doctest::Approx(0.001).epsilon(0.1));
    double c = 0, v = 0;
    const auto x = p.delta_n();
    for (std::size_t z = 0; z < 32; ++z) {
      for (std::size_t y = 0; y < 64; ++y) {
        for (std::size_t i = 0; i + 1 < 64; ++i) {
          c += x[p.index(i, y, z)] * x[p.index(i + 1, y, z)];
          v += x[p.index(i, y, z)] * x[p.index(i, y, z)];
        }
      }
    }
    // A width-8 box filter gives lag-1 correlation 7/8.
    CHECK(c / v == doctest::Approx(0.875).epsilon(0.05));
  }

  TEST_CASE("dead voxels are forced to the positive bound") {
    const auto m = flat_medium({32, 32, 32});
    const auto p = perturb(m, {.sigma = 0, .correlation_length = 1, .dead_voxel_rate = 0.02, .seed = 5});
    std::size_t dead = 0;
    for (double x : p.delta_n()) {
      CHECK((x == 0 || x == m.delta_n_max()));
      dead += x == m.delta_n_max();
    }
    CHECK(static_cast<double>(dead) / 32768.0 == doctest::Approx(0.02).epsilon(0.1));
  }

  TEST_CASE("large noise is re-clamped") {
    const auto m = flat_medium({16, 16, 8});
    const auto p = perturb(m, {.sigma = 0.5, .correlation_length = 1, .dead_voxel_rate = 0, .seed = 6});
    for (double x : p.delta_n()) CHECK(std::abs(x) <= m.delta_n_max());
  }

  TEST_CASE("spec validation") {
    CHECK_THROWS_AS((PerturbationSpec{.sigma = -1}.validate()), DomainError);
    CHECK_THROWS_AS((PerturbationSpec{.sigma = 0, .correlation_length = 0}.validate()), DomainError);
    CHECK_THROWS_AS((PerturbationSpec{.sigma = 0, .correlation_length = 1, .dead_voxel_rate = 1.5}.validate()),
                    DomainError);
  }

  TEST_CASE("mask size, flags and determinism") {
    const wave::GridShape shape{24, 24, 32};
    const auto m = make_mask(shape, 0.05, 3);
    CHECK(m.indices.size() == static_cast<std::size_t>(std::llround(0.05 * shape.voxels())));
    std::size_t set = 0;
    for (auto f : m.flags) set += f;
    CHECK(set == m.indices.size());
    for (auto i : m.indices) CHECK(m.flags[i] == 1);
    CHECK(std::is_sorted(m.indices.begin(), m.indices.end()));
    CHECK(make_mask(shape, 0.05, 3).indices == m.indices);
    CHECK(make_mask(shape, 0.05, 4).indices != m.indices);
    CHECK_THROWS_AS(make_mask(shape, 0, 1), DomainError);
  }

  TEST_CASE("empty mask leaves the design unchanged") {
    const auto& d = trained_reduced().design;
    const auto mask = make_mask(d.medium.shape(), 1e-7, 1);
    CHECK(mask.indices.empty());
    inverse::TrainConfig cfg;
    cfg.steps = 3;
    CHECK(finetune_reprogrammable(d, mask, toy(), cfg, kerr_on()) == d);
  }

  TEST_CASE("fine-tuning never touches frozen voxels") {
    const auto& d = trained_reduced().design;
    const auto pd = perturb(d, {.sigma = 0.003, .correlation_length = 1, .dead_voxel_rate = 0, .seed = 2});
    const auto mask = make_mask(d.medium.shape(), 0.05, 2);
    inverse::TrainConfig cfg;
    cfg.steps = 10;
    cfg.eval_every = 2;
    const auto ft = finetune_reprogrammable(pd, mask, toy(), cfg, kerr_on());
    double worst = 0;
    for (std::size_t i = 0; i < mask.total(); ++i) {
      if (!mask.flags[i]) worst = std::max(worst, std::abs(ft.medium.delta_n()[i] - pd.medium.delta_n()[i]));
    }
    CHECK(worst == 0);
    const auto wrong = make_mask({8, 8, 8}, 0.05, 2);
    CHECK_THROWS_AS(finetune_reprogrammable(pd, wrong, toy(), cfg, kerr_on()), DomainError);
  }

  TEST_CASE("evaluation: identity stack and training-time regression") {
    const auto& r = trained_reduced();
    const auto raw = evaluate(r.design, toy(), nullptr, kerr_on(), 10);
    const auto id = compensation::CompensationStack::identity(16, 4);
    CHECK(evaluate(r.design, toy(), &id, kerr_on(), 10) == raw);
    CHECK(raw.accuracy == r.best_val_accuracy);
  }

  TEST_CASE("property: seed-averaged accuracy does not rise with sigma") {
    const auto& d = trained_reduced().design;
    double prev = INFINITY;
    for (double sigma : {0.0, 0.001, 0.003, 0.01}) {
      double acc = 0;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pd = perturb(d, {.sigma = sigma, .correlation_length = 1, .dead_voxel_rate = 0, .seed = seed});
        acc += evaluate(pd, toy(), nullptr, kerr_on(), 10).accuracy / 5;
      }
      CAPTURE(sigma);
      CHECK(acc <= prev);
      prev = acc;
    }
  }
}

TEST_SUITE("compensation") {
  TEST_CASE("identity stack") {
    const auto c = compensation::CompensationStack::identity(3, 2);
    CHECK(c.is_identity());
    const std::vector<double> v{0.1, -2, 3};
    CHECK(c.apply_pre(v) == v);
    const std::vector<double> f{0.25, 0.75};
    CHECK(c.apply_post(f) == f);
    const std::vector<double> bad(4, 0.0);
    CHECK_THROWS_AS(c.apply_pre(bad), DomainError);
  }

  TEST_CASE("json round trip") {
    auto c = compensation::CompensationStack::identity(2, 2);
    c.pre_weight[1] = 0.1234567890123;
    c.post_bias[0] = -3e-9;
    c.trained_on = "abc";
    const auto back = compensation::CompensationStack::from_json(c.to_json());
    CHECK(back == c);
  }

  TEST_CASE("unperturbed design: compensation does not hurt and never touches the device") {
    const auto& d = trained_reduced().design;
    const std::string before = wave::design_hash(d);
    compensation::CompensationConfig cfg;
    cfg.steps = 20;
    const auto stack = compensation::fit_compensation(d, toy(), cfg, kerr_on());
    CHECK(wave::design_hash(d) == before);
    CHECK(stack.trained_on == before);
    const auto raw = evaluate(d, toy(), nullptr, kerr_on(), 10);
    const auto comp = evaluate(d, toy(), &stack, kerr_on(), cfg.logit_scale);
    CHECK(comp.accuracy >= raw.accuracy - 0.005);
  }

  TEST_CASE("post-only fitting leaves the pre map at identity") {
    const auto& d = trained_reduced().design;
    const auto pd = perturb(d, {.sigma = 0.01, .correlation_length = 1, .dead_voxel_rate = 0, .seed = 1});
    compensation::CompensationConfig cfg;
    cfg.kind = compensation::CompensationKind::post_only;
    cfg.steps = 30;
    const auto stack = compensation::fit_compensation(pd, toy(), cfg, kerr_on());
    const auto id = compensation::CompensationStack::identity(16, 4);
    CHECK(stack.pre_weight == id.pre_weight);
    CHECK(stack.pre_bias == id.pre_bias);
    const auto raw = evaluate(pd, toy(), nullptr, kerr_on(), 10);
    CHECK(evaluate(pd, toy(), &stack, kerr_on(), 10).accuracy >= raw.accuracy);
  }
}
