#include "pfm/objective.hpp"

#include <algorithm>
#include <cmath>

#include "pfm/error.hpp"

namespace pfm::inverse {

double cross_entropy(std::span<const double> logits, std::size_t label, std::span<double> grad) {
  if (logits.empty() || label >= logits.size()) throw DomainError("cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < logits.size(); ++i) grad[i] = std::exp(logits[i] - log_z) - (i == label ? 1.0 : 0.0);
  }
  return std::max(0.0, log_z - logits[label]);
}

double loss(const std::vector<std::vector<double>>& outputs, std::span<const std::size_t> labels) {
  if (outputs.empty()) throw DomainError("loss: empty batch");
  if (outputs.size() != labels.size()) throw DomainError("loss: outputs and labels differ in length");
  double s = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) s += cross_entropy(outputs[i], labels[i]);
  return s / static_cast<double>(outputs.size());
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

std::vector<double> normalized_bins(std::span<const double> readout) {
  double s = 0;
  for (double r : readout) s += r;
  std::vector<double> f(readout.size(), 0.0);
  if (s > 0) {
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = readout[i] / s;
  }
  return f;
}

void normalized_bins_backward(std::span<const double> readout, std::span<const double> d_features,
                              std::span<double> d_readout) {
  double s = 0;
  for (double r : readout) s += r;
  if (!(s > 0)) {
    std::fill(d_readout.begin(), d_readout.end(), 0.0);
    return;
  }
  double gr = 0;
  for (std::size_t i = 0; i < readout.size(); ++i) gr += d_features[i] * readout[i];
  for (std::size_t j = 0; j < readout.size(); ++j) d_readout[j] = d_features[j] / s - gr / (s * s);
}

Objective classification_objective(double logit_scale) {
  return [logit_scale](std::span<const double> readout, std::size_t label, std::span<double> d_readout) {
    const auto f = normalized_bins(readout);
    std::vector<double> logits(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) logits[i] = logit_scale * f[i];
    std::vector<double> g(f.size());
    const double l = cross_entropy(logits, label, g);
    for (double& x : g) x *= logit_scale;
    normalized_bins_backward(readout, g, d_readout);
    return l;
  };
}

}  // namespace pfm::inverse
