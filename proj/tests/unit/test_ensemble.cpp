#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "pfm/design_io.hpp"
#include "pfm/ensemble.hpp"

using namespace pfm;
using namespace pfm::ensemble;
using pfm::test::kerr_on;
using pfm::test::toy;
using pfm::test::trained_reduced;

namespace {

const variability::PerturbationSpec kNoise{.sigma = 0.003, .correlation_length = 1, .dead_voxel_rate = 0, .seed = 10};

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("single unperturbed copy is the base") {
    const auto& base = trained_reduced().design;
    const auto pool = spawn_ensemble(base, 1, {.sigma = 0});
    REQUIRE(pool.size() == 1);
    CHECK(pool.expert(0) == base);
    CHECK(pool.expert_hashes()[0] == wave::design_hash(base));
    CHECK_THROWS_AS(spawn_ensemble(base, 0, kNoise), DomainError);
  }

  TEST_CASE("spawned experts are pairwise distinct and reproducible") {
    const auto& base = trained_reduced().design;
    const auto pool = spawn_ensemble(base, 8, kNoise);
    for (std::size_t a = 0; a < 8; ++a) {
      CHECK(pool.seeds()[a] == kNoise.seed + a);
      for (std::size_t b = a + 1; b < 8; ++b) {
        double diff = 0;
        const auto x = pool.expert(a).medium.delta_n(), y = pool.expert(b).medium.delta_n();
        for (std::size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(x[i] - y[i]));
        CHECK(diff > 0);
      }
    }
    CHECK(spawn_ensemble(base, 8, kNoise).expert_hashes() == pool.expert_hashes());
    CHECK_NOTHROW(pool.verify_unchanged());
    const auto m = pool.manifest();
    CHECK(m["experts"].size() == 8);
    CHECK(m["base_design_sha256"] == wave::design_hash(base));
  }

  TEST_CASE("combination rules") {
    Router r = Router::uniform(2, 3);
    const std::vector<double> v{0.1, 0.2, 0.3};
    const std::vector<std::vector<double>> same{{0.2, 0.8}, {0.2, 0.8}};
    CHECK(combine(r, v, same) == same[0]);
    const std::vector<std::vector<double>> two{{0.2, 0.8}, {0.6, 0.4}};
    const auto mean = combine(r, v, two);
    CHECK(mean[0] == doctest::Approx(0.4));
    CHECK(mean[1] == doctest::Approx(0.6));
    r.top_k = 1;
    r.bias = {0.0, 1.0};
    CHECK(combine(r, v, two) == two[1]);
    const auto w = r.weights(v);
    CHECK(w[0] == 0);
    CHECK(w[1] == 1);
  }

  TEST_CASE("router weights lie on the simplex") {
    Router r = Router::uniform(3, 4, 2);
    for (std::size_t i = 0; i < r.weight.size(); ++i) r.weight[i] = std::sin(static_cast<double>(i));
    r.bias = {0.3, -0.2, 0.1};
    for (const auto& v : toy().inputs) {
      const auto w = r.weights(std::span(v).first(4));
      double s = 0;
      std::size_t nonzero = 0;
      for (double x : w) {
        CHECK(x >= 0);
        s += x;
        nonzero += x > 0;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(nonzero <= 2);
    }
  }

  TEST_CASE("router file round trip and corruption") {
    Router r = Router::uniform(2, 16, 1);
    r.weight[5] = 0.123456789;
    r.bias[1] = -1e-7;
    const std::string bytes = r.encode();
    CHECK(bytes.rfind("PFMRTR01", 0) == 0);
    CHECK(Router::decode(bytes) == r);
    CHECK_THROWS_AS(Router::decode(bytes.substr(0, bytes.size() - 8)), FormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(Router::decode(bad), FormatError);
  }

  TEST_CASE("single-expert pool: uniform router, utilization one, same accuracy") {
    const auto& base = trained_reduced().design;
    const auto pool = spawn_ensemble(base, 1, {.sigma = 0});
    inverse::TrainConfig cfg;
    cfg.steps = 50;
    cfg.learning_rate = 2.0;
    const auto r = train_router(pool, toy(), cfg, kerr_on());
    for (const auto& v : toy().inputs) CHECK(r.weights(v)[0] == 1.0);
    const auto m = evaluate_ensemble(pool, r, toy(), kerr_on(), 10);
    CHECK(m.utilization == std::vector<double>{1.0});
    CHECK(m.accuracy == m.expert_accuracy[0]);
    CHECK(m.accuracy == variability::evaluate(base, toy(), nullptr, kerr_on(), 10).accuracy);
  }

  TEST_CASE("zero router steps return the uniform router; experts stay frozen") {
    const auto pool = spawn_ensemble(trained_reduced().design, 3, kNoise);
    const auto features = expert_features(pool, toy(), kerr_on());
    inverse::TrainConfig cfg;
    cfg.steps = 0;
    CHECK(train_router(pool, toy(), features, cfg) == Router::uniform(3, 16));
    cfg.steps = 100;
    cfg.learning_rate = 2.0;
    const auto r = train_router(pool, toy(), features, cfg);
    CHECK_NOTHROW(pool.verify_unchanged());
    const auto m = evaluate_ensemble(pool, r, toy(), features, 10);
    double total = 0;
    for (double u : m.utilization) total += u;
    CHECK(std::abs(total - 1) <= 1e-9);
    CHECK(m.class_routing.size() == 4);
  }

  TEST_CASE("ensemble_infer agrees with combine on precomputed features") {
    const auto pool = spawn_ensemble(trained_reduced().design, 2, kNoise);
    const auto features = expert_features(pool, toy(), kerr_on());
    Router r = Router::uniform(2, 16);
    r.bias = {0.4, -0.1};
    const std::size_t i = toy().validation[3];
    const std::vector<std::vector<double>> per{features[0][i], features[1][i]};
    CHECK(ensemble_infer(pool, r, toy().inputs[i], kerr_on()) == combine(r, toy().inputs[i], per));
  }
}
