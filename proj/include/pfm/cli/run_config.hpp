#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfm/compensation.hpp"
#include "pfm/design.hpp"
#include "pfm/ensemble.hpp"
#include "pfm/scaling.hpp"

namespace pfm::cli {

inline constexpr int kSchemaVersion = 1;

struct MemoryWallConfig {
  double param_count = 1e18;
  double bits_per_param = 8;
  double density = 30e9 / 1e-6;  // bit/m^2 (30 Gbit/mm^2)
  double bandwidth = 1e12;       // bit/s
  double layer_thickness = 50e-6;
};

struct MetasurfaceConfig {
  double wafer_diameter = 0.3;
  double pixel_pitch = 250e-9;
};

struct IoBandwidthConfig {
  double dimension = 1e9;
  double bits_per_element = 2;
  double rate = 100e6;
};

struct ScaleConfig {
  scaling::PhysicalConstants constants;
  double aspect_ratio = scaling::kDefaultAspectRatio;
  std::vector<double> params{1e12, 1e15, 1e18};
  std::string sweep;  // "A:B:xK"; overrides params when set
  MemoryWallConfig memory_wall;
  MetasurfaceConfig metasurface;
  IoBandwidthConfig io_bandwidth;
};

struct SimulateConfig {
  std::filesystem::path design;
  // JSON {"inputs": [[...], ...]} or CSV with one vector per row.
  std::filesystem::path inputs;
  wave::PropagationSettings propagation;
  bool export_fields = false;
};

struct TrainCommandConfig {
  std::optional<std::filesystem::path> design;  // start here instead of `layout`
  wave::DesignLayout layout;
  inverse::ToyDatasetSpec dataset;
  wave::PropagationSettings propagation;
  inverse::TrainConfig training;
};

struct PerturbCommandConfig {
  std::filesystem::path design;
  inverse::ToyDatasetSpec dataset;
  wave::PropagationSettings propagation;
  variability::PerturbationSpec perturbation;  // sigma and seed are swept below
  std::vector<double> sigmas;                 // empty: {perturbation.sigma}
  std::vector<std::uint64_t> seeds;           // empty: {perturbation.seed}
  bool compensate = true;
  compensation::CompensationConfig compensation;
  bool finetune = true;
  double mask_fraction = 0.05;
  inverse::TrainConfig finetune_training;
};

struct EnsembleCommandConfig {
  std::optional<std::filesystem::path> design;  // base; otherwise built from `layout`
  wave::DesignLayout layout;
  inverse::ToyDatasetSpec dataset;
  wave::PropagationSettings propagation;
  std::string mode = "specialists";  // or "spawn"
  std::size_t experts = 4;           // spawn mode
  variability::PerturbationSpec perturbation;
  std::vector<std::vector<std::size_t>> class_subsets{{0, 1}, {2, 3}};
  double mask_fraction = 0.05;
  inverse::TrainConfig finetune_training;
  inverse::TrainConfig router_training;
  std::size_t top_k = 0;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string command;
  ScaleConfig scale;
  SimulateConfig simulate;
  TrainCommandConfig train;
  PerturbCommandConfig perturb;
  EnsembleCommandConfig ensemble;
};

// Defaults for `command` (scale, simulate, train, perturb, ensemble).
RunConfig default_run_config(const std::string& command);

// Strict parse: unknown keys, wrong types, missing units on physical
// quantities and a schema_version other than kSchemaVersion are errors
// (DomainError). Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& command,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::string& command);

// Canonical form of the command's section; parse_run_config reads it back to
// an identical config.
nlohmann::ordered_json to_json(const RunConfig& c);

// Parses "A:B:xK" (or "A:B:K"): A, A*K, A*K^2, ... up to B inclusive.
std::vector<double> parse_sweep(const std::string& spec);

}  // namespace pfm::cli
