#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pfm/design.hpp"
#include "pfm/design_io.hpp"
#include "pfm/error.hpp"

using namespace pfm;
using namespace pfm::wave;

namespace {

PfmDesign sample_design() {
  DesignLayout l;
  l.shape = {12, 10, 6};
  l.input_dim = 4;
  l.output_dim = 3;
  l.input_gap = 1;
  l.output_gap = 1;
  l.init_sigma = 0.02;
  l.seed = 8;
  l.peak_power_scale = 2e6;
  auto d = make_design(l);
  d.calibration_gain = {1.0, 0.9, 1.1};
  d.calibration_offset = {0.0, 0.01, -0.02};
  return d;
}

}  // namespace

TEST_SUITE("design_io") {
  TEST_CASE("encode/decode round trip at file precision") {
    auto d = sample_design();
    quantize_to_file_precision(d);
    const nlohmann::ordered_json prov = {{"config_sha256", "abc"}, {"dataset_seed", 7}};
    const auto bytes = encode_design(d, prov);
    CHECK(bytes.rfind("PFMDSGN1", 0) == 0);
    const auto f = decode_design(bytes);
    CHECK(f.design == d);
    CHECK(f.provenance == prov);
    CHECK(encode_design(f.design, f.provenance) == bytes);
  }

  TEST_CASE("voxels clamped to the bound survive a round trip") {
    auto d = sample_design();
    auto dn = d.medium.delta_n_mut();
    const double bound = d.medium.delta_n_max();
    for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = (i % 2 ? 1 : -1) * bound;
    const auto f = decode_design(encode_design(d));
    for (double v : f.design.medium.delta_n()) CHECK(std::abs(v) <= bound);
    quantize_to_file_precision(d);
    CHECK(f.design == d);
  }

  TEST_CASE("hash identifies the device, not the provenance") {
    const auto d = sample_design();
    const auto a = decode_design(encode_design(d, {{"x", 1}}));
    const auto b = decode_design(encode_design(d));
    CHECK(design_hash(a.design) == design_hash(d));
    CHECK(design_hash(b.design) == design_hash(d));
    auto e = d;
    e.medium.delta_n_mut()[3] += 0.01;
    CHECK(design_hash(e) != design_hash(d));
  }

  TEST_CASE("corrupt files are rejected with a descriptive error") {
    const std::string good = encode_design(sample_design());
    CHECK_THROWS_AS(decode_design("short"), FormatError);
    std::string bad_magic = good;
    bad_magic[3] = '?';
    CHECK_THROWS_AS(decode_design(bad_magic), FormatError);
    CHECK_THROWS_AS(decode_design(good.substr(0, good.size() - 4)), FormatError);
    std::string flipped = good;
    flipped[flipped.size() - 2] ^= 0x40;
    CHECK_THROWS_WITH_AS(decode_design(flipped), doctest::Contains("digest"), FormatError);
  }

  TEST_CASE("save/load and field export") {
    const auto dir = std::filesystem::temp_directory_path() / "pfm_design_io_test";
    std::filesystem::create_directories(dir);
    const auto d = sample_design();
    save_design(dir / "d.pfm", d, {{"k", "v"}});
    const auto f = load_design(dir / "d.pfm");
    CHECK(design_hash(f.design) == design_hash(d));
    CHECK(f.provenance["k"] == "v");

    OpticalField field(4, 3, 1550e-9, 1e-6, 1e-6);
    field.amplitude[5] = {1.5, -2.0};
    save_field(dir / "f", field);
    CHECK(std::filesystem::file_size(dir / "f.field.bin") == 4 * 3 * 2 * 4);
    std::ifstream sidecar(dir / "f.field.json");
    const auto j = nlohmann::json::parse(sidecar);
    CHECK(j["nx"] == 4);
    CHECK(j["ny"] == 3);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_design(dir / "missing.pfm"), Error);
  }
}
