#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pfm/variability.hpp"

namespace pfm::ensemble {

// Frozen device instances sharing one facet layout. Expert hashes are taken
// at construction and re-checked by verify_unchanged().
class ExpertPool {
 public:
  ExpertPool(std::vector<wave::PfmDesign> experts, std::string base_hash, std::vector<std::uint64_t> seeds,
             variability::PerturbationSpec spec);

  std::size_t size() const { return experts_.size(); }
  const wave::PfmDesign& expert(std::size_t e) const { return experts_.at(e); }
  const std::vector<wave::PfmDesign>& experts() const { return experts_; }
  const std::string& base_hash() const { return base_hash_; }
  const std::vector<std::uint64_t>& seeds() const { return seeds_; }
  const variability::PerturbationSpec& spec() const { return spec_; }
  const std::vector<std::string>& expert_hashes() const { return hashes_; }
  std::size_t input_dim() const { return experts_.front().input_dim(); }
  std::size_t output_dim() const { return experts_.front().output_dim(); }

  // Recomputes every expert hash; throws Error on any mismatch.
  void verify_unchanged() const;

  // Manifest listing the base hash, per-expert seed and hash, the
  // perturbation spec, and `paths` (one per expert, may be empty).
  nlohmann::ordered_json manifest(std::span<const std::string> paths = {}) const;

 private:
  std::vector<wave::PfmDesign> experts_;
  std::string base_hash_;
  std::vector<std::uint64_t> seeds_;
  variability::PerturbationSpec spec_;
  std::vector<std::string> hashes_;
};

// k perturbed copies of base with seeds p.seed + 0 .. k-1.
ExpertPool spawn_ensemble(const wave::PfmDesign& base, std::size_t k, const variability::PerturbationSpec& p);

// Linear softmax gate on the input vector: w = softmax(W v + b), restricted
// to the top_k largest entries and renormalized.
struct Router {
  std::size_t experts = 0;
  std::size_t input_dim = 0;
  std::size_t top_k = 0;        // 0 means all experts
  std::vector<double> weight;  // experts x input_dim, row-major
  std::vector<double> bias;
  bool diverged = false;

  static Router uniform(std::size_t experts, std::size_t input_dim, std::size_t top_k = 0);
  std::vector<double> weights(std::span<const double> v) const;

  // Flat little-endian float64 array [weight..., bias...] behind a JSON
  // header, framed like design files ("PFMRTR01", u64 header length).
  std::string encode() const;
  static Router decode(std::string_view bytes);
  bool operator==(const Router&) const = default;
};

// Per-expert feature vectors (normalized detector powers) for every input.
using ExpertFeatures = std::vector<std::vector<std::vector<double>>>;  // [expert][sample][bin]

ExpertFeatures expert_features(const ExpertPool& pool, const inverse::ToyDataset& ds,
                               const wave::PropagationSettings& s);

// Full-batch gradient descent on the gate parameters over the training split,
// with the experts' features precomputed as constants. Keeps the best
// validation router (starting from uniform); steps == 0 returns uniform.
// A non-finite loss returns uniform with `diverged` set. Verifies that no
// expert changed.
Router train_router(const ExpertPool& pool, const inverse::ToyDataset& ds, const inverse::TrainConfig& cfg,
                    const wave::PropagationSettings& s, std::size_t top_k = 0);
Router train_router(const ExpertPool& pool, const inverse::ToyDataset& ds, const ExpertFeatures& features,
                    const inverse::TrainConfig& cfg, std::size_t top_k = 0);

// Sum over selected experts of w_e * features_e(v).
std::vector<double> ensemble_infer(const ExpertPool& pool, const Router& r, std::span<const double> v,
                                   const wave::PropagationSettings& s);
std::vector<double> combine(const Router& r, std::span<const double> v,
                            const std::vector<std::vector<double>>& features_per_expert);

struct EnsembleMetrics {
  double accuracy = 0;
  double loss = 0;
  std::vector<double> utilization;                // top-1 routing fraction per expert
  std::vector<std::vector<double>> class_routing;  // [class][expert] top-1 fraction
  std::vector<double> expert_accuracy;             // each expert alone
};

// Validation-split metrics. Logits are logit_scale times the combined features.
EnsembleMetrics evaluate_ensemble(const ExpertPool& pool, const Router& r, const inverse::ToyDataset& ds,
                                  const ExpertFeatures& features, double logit_scale);
EnsembleMetrics evaluate_ensemble(const ExpertPool& pool, const Router& r, const inverse::ToyDataset& ds,
                                  const wave::PropagationSettings& s, double logit_scale);

struct SpecialistSpec {
  std::vector<std::vector<std::size_t>> class_subsets{{0, 1}, {2, 3}};
  variability::PerturbationSpec perturbation{.sigma = 0.003, .correlation_length = 1, .dead_voxel_rate = 0,
                                             .seed = 0};
  double mask_fraction = 0.05;
  inverse::TrainConfig finetune{};
};

// One expert per class subset: the base is perturbed with seed
// perturbation.seed + e, then its reprogrammable voxels are fine-tuned on
// that subset of the dataset.
ExpertPool specialist_pool(const wave::PfmDesign& base, const inverse::ToyDataset& ds, const SpecialistSpec& spec,
                           const wave::PropagationSettings& s);

}  // namespace pfm::ensemble
