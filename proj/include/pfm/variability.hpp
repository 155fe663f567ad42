#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pfm/compensation.hpp"
#include "pfm/design.hpp"
#include "pfm/train.hpp"

namespace pfm::variability {

struct PerturbationSpec {
  double sigma = 0;                     // std-dev of additive delta_n noise
  std::size_t correlation_length = 1;  // box-filter width in voxels
  double dead_voxel_rate = 0;           // probability a voxel is forced to +delta_n_max
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PerturbationSpec&) const = default;
};

// Adds seeded correlated Gaussian noise (white Philox normals smoothed by a
// separable periodic box filter, rescaled to unit variance, times sigma),
// forces dead voxels to +delta_n_max and re-clamps. Each voxel's draws depend
// only on (seed, voxel index).
wave::VoxelMedium perturb(const wave::VoxelMedium& m, const PerturbationSpec& p);
wave::PfmDesign perturb(const wave::PfmDesign& d, const PerturbationSpec& p);

struct ReprogrammableMask {
  double fraction = 0;
  std::vector<std::size_t> indices;  // sorted
  std::vector<std::uint8_t> flags;   // one per voxel, 1 = reprogrammable

  std::size_t total() const { return flags.size(); }
};

// round(fraction * voxels) voxels chosen uniformly by Philox keys.
ReprogrammableMask make_mask(const wave::GridShape& shape, double fraction, std::uint64_t seed);

// Training restricted to the masked voxels; every other voxel is returned
// bit-identical. Returns the best-validation design, which may be the input.
wave::PfmDesign finetune_reprogrammable(const wave::PfmDesign& d_perturbed, const ReprogrammableMask& mask,
                                        const inverse::ToyDataset& ds, const inverse::TrainConfig& cfg,
                                        const wave::PropagationSettings& s);

// Validation-split metrics with the compensation stack (if any) wrapped
// around inference.
inverse::Metrics evaluate(const wave::PfmDesign& d, const inverse::ToyDataset& ds,
                          const compensation::CompensationStack* comp, const wave::PropagationSettings& s,
                          double logit_scale);

}  // namespace pfm::variability
