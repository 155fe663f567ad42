#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfm/train.hpp"

namespace pfm::compensation {

enum class CompensationKind { post_only, pre_post };

const char* to_string(CompensationKind k);
CompensationKind compensation_kind_from_string(const std::string& s);

// Digital affine maps around a frozen device: the input vector goes through
// pre (v -> W v + b) before encoding, and the normalized detector vector
// through post before the classifier logits.
struct CompensationStack {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> pre_weight;  // input_dim x input_dim, row-major
  std::vector<double> pre_bias;
  std::vector<double> post_weight;  // output_dim x output_dim, row-major
  std::vector<double> post_bias;
  std::string trained_on;  // design_hash of the wrapped device
  bool diverged = false;

  static CompensationStack identity(std::size_t input_dim, std::size_t output_dim);
  bool is_identity() const;

  std::vector<double> apply_pre(std::span<const double> v) const;
  std::vector<double> apply_post(std::span<const double> features) const;

  nlohmann::ordered_json to_json() const;
  static CompensationStack from_json(const nlohmann::ordered_json& j);
  bool operator==(const CompensationStack&) const = default;
};

struct CompensationConfig {
  CompensationKind kind = CompensationKind::pre_post;
  double post_learning_rate = 0.5;
  double pre_learning_rate = 0.05;
  std::size_t steps = 60;
  std::size_t batch_size = 16;
  std::size_t eval_every = 5;
  std::uint64_t seed = 0;
  double logit_scale = 10.0;

  void validate() const;
};

// Logits of one sample: logit_scale * post(normalized_bins(infer(pre(v)))).
std::vector<double> compensated_logits(const wave::PfmDesign& d, const wave::Propagator& p,
                                       const CompensationStack& c, std::span<const double> v, double logit_scale);

inverse::Metrics evaluate_compensated(const wave::PfmDesign& d, const CompensationStack& c,
                                      const inverse::ToyDataset& ds, std::span<const std::size_t> indices,
                                      const wave::PropagationSettings& s, double logit_scale);

// Gradient descent on the maps through the frozen device (adjoint field at
// the input facet for the pre map). Starts from, and may return, identity;
// the stack with the best validation accuracy (ties: lower loss) wins.
// A non-finite loss returns identity with `diverged` set.
CompensationStack fit_compensation(const wave::PfmDesign& d_perturbed, const inverse::ToyDataset& ds,
                                   const CompensationConfig& cfg, const wave::PropagationSettings& s);

}  // namespace pfm::compensation
