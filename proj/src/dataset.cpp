#include "pfm/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

namespace pfm::inverse {
namespace {

constexpr std::uint64_t kCentreStream = 0xC3;
constexpr std::uint64_t kNoiseStream = 0x5A;

void normalize(std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s > 0) {
    for (double& x : v) x /= s;
  }
}

}  // namespace

void ToyDataset::validate() const {
  if (inputs.size() != labels.size()) throw DomainError("dataset: inputs and labels differ in length");
  for (const auto& v : inputs) {
    if (v.size() != dim()) throw DomainError("dataset: inputs differ in dimension");
  }
  for (std::size_t l : labels) {
    if (l >= classes) throw DomainError("dataset: label out of range");
  }
}

ToyDataset ToyDataset::restricted_to(std::span<const std::size_t> keep) const {
  ToyDataset out;
  out.seed = seed;
  out.classes = classes;
  std::vector<std::size_t> remap(inputs.size(), inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), labels[i]) != keep.end()) {
      remap[i] = out.inputs.size();
      out.inputs.push_back(inputs[i]);
      out.labels.push_back(labels[i]);
    }
  }
  for (std::size_t i : train) {
    if (remap[i] < inputs.size()) out.train.push_back(remap[i]);
  }
  for (std::size_t i : validation) {
    if (remap[i] < inputs.size()) out.validation.push_back(remap[i]);
  }
  return out;
}

ToyDataset make_toy_dataset(const ToyDatasetSpec& spec) {
  if (spec.classes < 2) throw DomainError("make_toy_dataset: need at least 2 classes");
  if (spec.samples < spec.classes) throw DomainError("make_toy_dataset: fewer samples than classes");
  if (spec.dim < 1) throw DomainError("make_toy_dataset: dim must be >= 1");
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) {
    throw DomainError("make_toy_dataset: train_fraction must lie in (0, 1)");
  }

  const CounterRng centre_rng(spec.seed, kCentreStream);
  std::vector<std::vector<double>> centres(spec.classes, std::vector<double>(spec.dim));
  for (std::size_t c = 0; c < spec.classes; ++c) {
    auto& v = centres[c];
    for (std::size_t j = 0; j < spec.dim; ++j) v[j] = centre_rng.normal(c * spec.dim + j);
    if (spec.classes <= spec.dim) {
      // Gram-Schmidt against earlier centres.
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0;
        for (std::size_t j = 0; j < spec.dim; ++j) dot += v[j] * centres[p][j];
        for (std::size_t j = 0; j < spec.dim; ++j) v[j] -= dot * centres[p][j];
      }
    }
    normalize(v);
  }

  ToyDataset ds;
  ds.seed = spec.seed;
  ds.classes = spec.classes;
  ds.inputs.reserve(spec.samples);
  const CounterRng noise_rng(spec.seed, kNoiseStream);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t c = i % spec.classes;
    std::vector<double> x = centres[c];
    for (std::size_t j = 0; j < spec.dim; ++j) x[j] += spec.noise * noise_rng.normal(i * spec.dim + j);
    normalize(x);
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(c);
  }

  std::vector<std::size_t> seen(spec.classes, 0);
  std::vector<std::size_t> per_class(spec.classes, 0);
  for (std::size_t l : ds.labels) ++per_class[l];
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t c = ds.labels[i];
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(per_class[c])));
    (seen[c]++ < n_train ? ds.train : ds.validation).push_back(i);
  }
  return ds;
}

}  // namespace pfm::inverse
