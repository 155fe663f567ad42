#include "pfm/variability.hpp"

#include <algorithm>
#include <cmath>

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

namespace pfm::variability {
namespace {

constexpr std::uint64_t kNoiseStream = 0x101;
constexpr std::uint64_t kDefectStream = 0x102;
constexpr std::uint64_t kMaskStream = 0x103;

// Periodic moving sum of width w along one axis of a z-major grid.
void box_sum(std::vector<double>& a, const wave::GridShape& g, std::size_t w, int axis) {
  const std::size_t len = axis == 0 ? g.nx : axis == 1 ? g.ny : g.nz;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? g.nx : g.nx * g.ny;
  const std::size_t lines = g.voxels() / len;
  const std::size_t back = w / 2;
  std::vector<double> in(len);
  for (std::size_t l = 0; l < lines; ++l) {
    // Start of line l: enumerate the other two coordinates.
    std::size_t base;
    if (axis == 0) {
      base = l * g.nx;
    } else if (axis == 1) {
      base = (l / g.nx) * g.nx * g.ny + l % g.nx;
    } else {
      base = l;
    }
    for (std::size_t i = 0; i < len; ++i) in[i] = a[base + i * stride];
    for (std::size_t i = 0; i < len; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < w; ++k) s += in[(i + len * w + k - back) % len];
      a[base + i * stride] = s;
    }
  }
}

}  // namespace

void PerturbationSpec::validate() const {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw DomainError("perturbation: sigma must be >= 0");
  if (correlation_length == 0) throw DomainError("perturbation: correlation_length must be >= 1");
  if (!(dead_voxel_rate >= 0 && dead_voxel_rate <= 1)) throw DomainError("perturbation: dead_voxel_rate must lie in [0, 1]");
}

wave::VoxelMedium perturb(const wave::VoxelMedium& m, const PerturbationSpec& p) {
  p.validate();
  wave::VoxelMedium out = m;
  if (p.sigma == 0 && p.dead_voxel_rate == 0) return out;
  const auto& g = m.shape();
  const std::size_t n = g.voxels();
  auto dn = out.delta_n_mut();

  if (p.sigma > 0) {
    const CounterRng rng(p.seed, kNoiseStream);
    std::vector<double> noise(n);
    for (std::size_t i = 0; i < n; ++i) noise[i] = rng.normal(i);
    const std::size_t w = p.correlation_length;
    double cells = 1;
    for (int axis = 0; axis < 3; ++axis) {
      const std::size_t len = axis == 0 ? g.nx : axis == 1 ? g.ny : g.nz;
      // A window longer than the axis would wrap onto itself.
      const std::size_t wa = std::min(w, len);
      if (wa > 1) {
        box_sum(noise, g, wa, axis);
        cells *= static_cast<double>(wa);
      }
    }
    const double scale = p.sigma / std::sqrt(cells);
    for (std::size_t i = 0; i < n; ++i) dn[i] += scale * noise[i];
  }
  if (p.dead_voxel_rate > 0) {
    const CounterRng rng(p.seed, kDefectStream);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform(i) < p.dead_voxel_rate) dn[i] = m.delta_n_max();
    }
  }
  out.project();
  return out;
}

wave::PfmDesign perturb(const wave::PfmDesign& d, const PerturbationSpec& p) {
  wave::PfmDesign out = d;
  out.medium = perturb(d.medium, p);
  return out;
}

ReprogrammableMask make_mask(const wave::GridShape& shape, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw DomainError("make_mask: fraction must lie in (0, 1]");
  const std::size_t n = shape.voxels();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  const CounterRng rng(seed, kMaskStream);
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = {rng.bits64(i), i};
  std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end());
  ReprogrammableMask m;
  m.fraction = fraction;
  m.flags.assign(n, 0);
  m.indices.reserve(k);
  for (std::size_t j = 0; j < k; ++j) m.indices.push_back(keys[j].second);
  std::sort(m.indices.begin(), m.indices.end());
  for (std::size_t i : m.indices) m.flags[i] = 1;
  return m;
}

wave::PfmDesign finetune_reprogrammable(const wave::PfmDesign& d_perturbed, const ReprogrammableMask& mask,
                                        const inverse::ToyDataset& ds, const inverse::TrainConfig& cfg,
                                        const wave::PropagationSettings& s) {
  if (mask.total() != d_perturbed.medium.shape().voxels()) {
    throw DomainError("finetune_reprogrammable: mask does not match the design grid");
  }
  if (mask.indices.empty()) return d_perturbed;
  return inverse::train(d_perturbed, ds, cfg, s, mask.flags).design;
}

inverse::Metrics evaluate(const wave::PfmDesign& d, const inverse::ToyDataset& ds,
                          const compensation::CompensationStack* comp, const wave::PropagationSettings& s,
                          double logit_scale) {
  if (comp == nullptr) return inverse::evaluate_split(d, ds, ds.validation, s, logit_scale);
  return compensation::evaluate_compensated(d, *comp, ds, ds.validation, s, logit_scale);
}

}  // namespace pfm::variability
