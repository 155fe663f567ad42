#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pfm::inverse {

// Softmax cross-entropy of `logits` against `label`. Writes dL/dlogits into
// `grad` when it is non-empty.
double cross_entropy(std::span<const double> logits, std::size_t label, std::span<double> grad = {});

// Mean cross-entropy over a batch of logit vectors. Throws on an empty batch.
double loss(const std::vector<std::vector<double>>& outputs, std::span<const std::size_t> labels);

std::size_t argmax(std::span<const double> v);

// Detector powers normalized to sum to one; all zeros when nothing arrives.
std::vector<double> normalized_bins(std::span<const double> readout);
// Chain rule through normalized_bins.
void normalized_bins_backward(std::span<const double> readout, std::span<const double> d_features,
                              std::span<double> d_readout);

// Objective on one readout vector: returns the loss and writes
// d(loss)/d(readout).
using Objective =
    std::function<double(std::span<const double> readout, std::size_t label, std::span<double> d_readout)>;

// Cross-entropy of logit_scale * normalized_bins(readout).
Objective classification_objective(double logit_scale);

}  // namespace pfm::inverse
