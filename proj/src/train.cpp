#include "pfm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pfm/rng.hpp"

namespace pfm::inverse {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5F;

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;
  std::vector<double> m, v;
  std::size_t t = 0;

  void step(std::span<double> x, std::span<const double> g, double lr, std::span<const std::uint8_t> mask) {
    if (m.empty()) {
      m.assign(x.size(), 0.0);
      v.assign(x.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!mask.empty() && mask[i] == 0) continue;
      m[i] = beta1 * m[i] + (1 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace

std::vector<std::size_t> epoch_order(std::span<const std::size_t> indices, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(indices.begin(), indices.end());
  const CounterRng rng(seed, kShuffleStream + (epoch << 8));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bits64(i) % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

BatchSampler::BatchSampler(std::vector<std::size_t> indices, std::uint64_t seed, std::size_t batch)
    : indices_(std::move(indices)), seed_(seed), batch_(std::min(batch, indices_.size())) {}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> out;
  out.reserve(batch_);
  while (out.size() < batch_) {
    if (pos_ == order_.size()) {
      order_ = epoch_order(indices_, seed_, epoch_++);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

const char* to_string(GradientMode m) { return m == GradientMode::adjoint ? "adjoint" : "finite_difference"; }
const char* to_string(Optimizer o) { return o == Optimizer::gradient_descent ? "gradient_descent" : "adam"; }

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "adjoint") return GradientMode::adjoint;
  if (s == "finite_difference") return GradientMode::finite_difference;
  throw DomainError("unknown gradient mode '" + s + "'");
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "gradient_descent") return Optimizer::gradient_descent;
  if (s == "adam") return Optimizer::adam;
  throw DomainError("unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw DomainError("train: learning_rate must be >= 0");
  if (!(fd_step > 0)) throw DomainError("train: fd_step must be positive");
  if (batch_size == 0) throw DomainError("train: batch_size must be >= 1");
  if (eval_every == 0) throw DomainError("train: eval_every must be >= 1");
  if (!(logit_scale > 0)) throw DomainError("train: logit_scale must be positive");
}

std::string TrainHistory::to_csv() const {
  std::string out = "step,loss,val_accuracy,grad_norm,seconds\n";
  char line[160];
  for (std::size_t i = 0; i < size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.6f\n", i + 1, loss[i], val_accuracy[i], grad_norm[i],
                  seconds[i]);
    out += line;
  }
  return out;
}

Metrics evaluate_split(const wave::PfmDesign& d, const ToyDataset& ds, std::span<const std::size_t> indices,
                       const wave::PropagationSettings& s, double logit_scale) {
  if (indices.empty()) throw DomainError("evaluate_split: empty split");
  if (ds.dim() != d.input_dim()) throw DomainError("evaluate_split: dataset and design dimensions differ");
  const wave::Propagator p(d.medium, s, d.wavelength_vacuum);
  const Objective obj = classification_objective(logit_scale);
  std::vector<double> losses(indices.size());
  std::vector<int> hits(indices.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(indices.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t k = indices[i];
    const auto r = wave::infer(d, p, ds.inputs[k]);
    std::vector<double> scratch(r.size());
    losses[i] = obj(r, ds.labels[k], scratch);
    hits[i] = argmax(normalized_bins(r)) == ds.labels[k] ? 1 : 0;
  }
  Metrics m;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    m.loss += losses[i];
    m.accuracy += hits[i];
  }
  m.loss /= static_cast<double>(indices.size());
  m.accuracy /= static_cast<double>(indices.size());
  return m;
}

TrainResult train(const wave::PfmDesign& d, const ToyDataset& ds, const TrainConfig& cfg,
                  const wave::PropagationSettings& s, std::span<const std::uint8_t> trainable) {
  cfg.validate();
  s.validate();
  d.validate();
  ds.validate();
  if (ds.dim() != d.input_dim()) throw DomainError("train: dataset and design dimensions differ");
  if (ds.train.empty() || ds.validation.empty()) throw DomainError("train: empty train or validation split");
  const std::size_t voxels = d.medium.shape().voxels();
  if (!trainable.empty() && trainable.size() != voxels) throw DomainError("train: mask does not match the grid");

  const auto t0 = std::chrono::steady_clock::now();
  const Objective obj = classification_objective(cfg.logit_scale);
  TrainResult result{.design = d, .history = {}, .best_step = 0, .best_val_accuracy = 0};
  result.best_val_accuracy = evaluate_split(d, ds, ds.validation, s, cfg.logit_scale).accuracy;
  double latest_val = result.best_val_accuracy;

  wave::PfmDesign cur = d;
  BatchSampler sampler(ds.train, cfg.seed, cfg.batch_size);
  Adam adam;
  auto& h = result.history;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const auto idx = sampler.next();
    const Batch batch = make_batch(ds, idx);
    GradientResult g;
    try {
      g = cfg.gradient_mode == GradientMode::adjoint ? gradient_adjoint(cur, batch, s, obj)
                                                     : gradient_fd(cur, batch, s, obj, cfg.fd_step);
    } catch (const StabilityError& e) {
      throw TrainingDiverged(std::string("train: step ") + std::to_string(step) + ": " + e.what(), h);
    }
    if (!trainable.empty()) {
      for (std::size_t v = 0; v < voxels; ++v) {
        if (trainable[v] == 0) g.d_delta_n[v] = 0.0;
      }
    }
    double norm = 0;
    for (double x : g.d_delta_n) norm += x * x;
    norm = std::sqrt(norm);
    if (!std::isfinite(g.loss) || !std::isfinite(norm)) {
      throw TrainingDiverged("train: non-finite loss or gradient at step " + std::to_string(step), h);
    }

    if (cfg.learning_rate > 0) {
      auto dn = cur.medium.delta_n_mut();
      if (cfg.optimizer == Optimizer::adam) {
        adam.step(dn, g.d_delta_n, cfg.learning_rate, trainable);
      } else {
        for (std::size_t v = 0; v < voxels; ++v) {
          if (trainable.empty() || trainable[v] != 0) dn[v] -= cfg.learning_rate * g.d_delta_n[v];
        }
      }
      if (cfg.projection) cur.medium.project();
    }

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      latest_val = evaluate_split(cur, ds, ds.validation, s, cfg.logit_scale).accuracy;
      if (latest_val > result.best_val_accuracy) {
        result.best_val_accuracy = latest_val;
        result.best_step = step;
        result.design = cur;
      }
    }
    h.loss.push_back(g.loss);
    h.val_accuracy.push_back(latest_val);
    h.grad_norm.push_back(norm);
    h.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return result;
}

}  // namespace pfm::inverse
