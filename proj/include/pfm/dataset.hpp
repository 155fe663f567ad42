#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pfm::inverse {

struct ToyDatasetSpec {
  std::size_t classes = 4;
  std::size_t dim = 16;
  std::size_t samples = 400;
  std::uint64_t seed = 7;
  // Per-coordinate std-dev of the blob noise before normalization.
  double noise = 0.25;
  double train_fraction = 0.75;
};

// Unit-norm Gaussian blobs around orthonormal class centres (random unit
// centres when classes > dim). Sample i belongs to class i % classes; each
// class is split train/validation in the same proportion.
struct ToyDataset {
  std::vector<std::vector<double>> inputs;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::uint64_t seed = 0;
  std::size_t classes = 0;

  std::size_t dim() const { return inputs.empty() ? 0 : inputs.front().size(); }
  void validate() const;
  // Samples whose label is in `keep`, labels unchanged, splits preserved.
  ToyDataset restricted_to(std::span<const std::size_t> keep) const;
  bool operator==(const ToyDataset&) const = default;
};

ToyDataset make_toy_dataset(const ToyDatasetSpec& spec);

}  // namespace pfm::inverse
