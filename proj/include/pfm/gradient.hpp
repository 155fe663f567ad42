#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pfm/dataset.hpp"
#include "pfm/objective.hpp"
#include "pfm/wave.hpp"

namespace pfm::inverse {

struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
};

Batch make_batch(const ToyDataset& ds, std::span<const std::size_t> indices);

struct GradientResult {
  double loss = 0;                              // mean over the batch
  std::vector<double> d_delta_n;                // one entry per voxel
  double d_gain = 0;                            // w.r.t. gain_per_step
  std::vector<std::vector<double>> d_inputs;    // per batch item, when requested
};

// Mean objective over the batch.
double batch_loss(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                  const Objective& objective);

// Reverse-mode gradient of the mean batch objective with respect to every
// voxel (and the per-step gain, and optionally the input vectors), one
// forward and one checkpointed backward sweep per item. Items run in
// parallel; per-item contributions are summed in batch order.
GradientResult gradient_adjoint(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                                const Objective& objective, bool want_input_gradients = false);

// Same adjoint reusing an existing propagator for d.medium.
GradientResult gradient_adjoint(const wave::PfmDesign& d, const wave::Propagator& p, const Batch& batch,
                                const Objective& objective, bool want_input_gradients = false);

// Central differences (L(dn + h e_i) - L(dn - h e_i)) / 2h on the voxels in
// `probe` (all voxels when empty); unprobed entries are left at zero.
// O(voxels) propagations: an oracle for small grids.
GradientResult gradient_fd(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                           const Objective& objective, double fd_step, std::span<const std::size_t> probe = {});

// Central difference with respect to gain_per_step only.
double gain_gradient_fd(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                        const Objective& objective, double fd_step);

}  // namespace pfm::inverse
