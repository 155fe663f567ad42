#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pfm/dataset.hpp"
#include "pfm/error.hpp"
#include "pfm/gradient.hpp"

namespace pfm::inverse {

enum class GradientMode { adjoint, finite_difference };
enum class Optimizer { gradient_descent, adam };

const char* to_string(GradientMode m);
const char* to_string(Optimizer o);
GradientMode gradient_mode_from_string(const std::string& s);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 0.3;
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  GradientMode gradient_mode = GradientMode::adjoint;
  double fd_step = 1e-6;
  // Clamp to |dn| <= delta_n_max after each step.
  bool projection = true;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::gradient_descent;
  double logit_scale = 10.0;
  // Validation accuracy is measured every eval_every steps and after the
  // last one; history rows in between repeat the latest measurement.
  std::size_t eval_every = 10;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> val_accuracy;
  std::vector<double> grad_norm;
  std::vector<double> seconds;  // wall time since training started

  std::size_t size() const { return loss.size(); }
  // step,loss,val_accuracy,grad_norm,seconds
  std::string to_csv() const;
};

struct Metrics {
  double accuracy = 0;
  double loss = 0;
  bool operator==(const Metrics&) const = default;
};

struct TrainResult {
  wave::PfmDesign design;  // best validation accuracy seen
  TrainHistory history;
  std::size_t best_step = 0;  // 0 = the initial design
  double best_val_accuracy = 0;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, TrainHistory history) : Error(what), history_(std::move(history)) {}
  const TrainHistory& history() const { return history_; }

 private:
  TrainHistory history_;
};

// Permutation of `indices` for epoch `epoch` (Fisher-Yates on Philox draws).
std::vector<std::size_t> epoch_order(std::span<const std::size_t> indices, std::uint64_t seed, std::uint64_t epoch);

// Minibatches drawn without replacement from successive epoch permutations.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> indices, std::uint64_t seed, std::size_t batch);
  std::vector<std::size_t> next();

 private:
  std::vector<std::size_t> indices_;
  std::uint64_t seed_;
  std::size_t batch_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// Accuracy and mean loss of d on ds.inputs[indices].
Metrics evaluate_split(const wave::PfmDesign& d, const ToyDataset& ds, std::span<const std::size_t> indices,
                       const wave::PropagationSettings& s, double logit_scale);

// Projected gradient training of delta_n on the training split. When
// `trainable` is non-empty, only voxels with a nonzero entry change and the
// rest stay bit-identical. Deterministic for a given config and seed.
TrainResult train(const wave::PfmDesign& d, const ToyDataset& ds, const TrainConfig& cfg,
                  const wave::PropagationSettings& s, std::span<const std::uint8_t> trainable = {});

}  // namespace pfm::inverse
