#include "pfm/gradient.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>

#include "pfm/error.hpp"

namespace pfm::inverse {

using wave::Complex;

Batch make_batch(const ToyDataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.inputs.reserve(indices.size());
  b.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    b.inputs.push_back(ds.inputs.at(i));
    b.labels.push_back(ds.labels.at(i));
  }
  return b;
}

double batch_loss(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                  const Objective& objective) {
  if (batch.size() == 0) throw DomainError("batch_loss: empty batch");
  const wave::Propagator p(d.medium, s, d.wavelength_vacuum);
  std::vector<double> losses(batch.size());
  std::vector<double> scratch(d.output_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = wave::infer(d, p, batch.inputs[i]);
    losses[i] = objective(r, batch.labels[i], scratch);
  }
  double sum = 0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(batch.size());
}

GradientResult gradient_adjoint(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                                const Objective& objective, bool want_input_gradients) {
  const wave::Propagator p(d.medium, s, d.wavelength_vacuum);
  return gradient_adjoint(d, p, batch, objective, want_input_gradients);
}

GradientResult gradient_adjoint(const wave::PfmDesign& d, const wave::Propagator& p, const Batch& batch,
                                const Objective& objective, bool want_input_gradients) {
  const std::size_t n_items = batch.size();
  if (n_items == 0) throw DomainError("gradient_adjoint: empty batch");
  const std::size_t voxels = d.medium.shape().voxels();
  const std::size_t transverse = d.medium.shape().transverse();

  std::vector<std::vector<double>> item_grad(n_items);
  std::vector<double> item_loss(n_items, 0.0);
  std::vector<double> item_gain(n_items, 0.0);
  std::vector<std::vector<double>> item_input(want_input_gradients ? n_items : 0);
  std::vector<std::exception_ptr> errors(n_items);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n_items); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      item_grad[i].assign(voxels, 0.0);
      const auto field = wave::encode_input(batch.inputs[i], d);
      std::vector<Complex> lambda_in(want_input_gradients ? transverse : 0);
      wave::Propagator::Gradients g{.d_delta_n = item_grad[i], .d_gain = 0.0};
      auto seed = [&](std::span<const Complex> out, std::span<Complex> lambda) {
        wave::OpticalField f = field;
        std::copy(out.begin(), out.end(), f.amplitude.begin());
        const auto r = wave::readout(f, d);
        std::vector<double> dr(r.size());
        item_loss[i] = objective(r, batch.labels[i], dr);
        wave::readout_adjoint(out, d, dr, lambda);
      };
      p.gradient(field.amplitude, seed, g, lambda_in);
      item_gain[i] = g.d_gain;
      if (want_input_gradients) item_input[i] = wave::encode_input_gradient(batch.inputs[i], d, lambda_in);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Fixed-order reduction keeps results independent of the thread count.
  const double inv = 1.0 / static_cast<double>(n_items);
  GradientResult r;
  r.d_delta_n.assign(voxels, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    r.loss += item_loss[i];
    r.d_gain += item_gain[i];
    for (std::size_t v = 0; v < voxels; ++v) r.d_delta_n[v] += item_grad[i][v];
  }
  r.loss *= inv;
  r.d_gain *= inv;
  for (double& v : r.d_delta_n) v *= inv;
  if (want_input_gradients) {
    r.d_inputs = std::move(item_input);
    for (auto& g : r.d_inputs) {
      for (double& x : g) x *= inv;
    }
  }
  return r;
}

GradientResult gradient_fd(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                           const Objective& objective, double fd_step, std::span<const std::size_t> probe) {
  if (!(fd_step > 0)) throw DomainError("gradient_fd: fd_step must be positive");
  const std::size_t voxels = d.medium.shape().voxels();
  std::vector<std::size_t> all;
  if (probe.empty()) {
    all.resize(voxels);
    for (std::size_t v = 0; v < voxels; ++v) all[v] = v;
    probe = all;
  }
  GradientResult r;
  r.loss = batch_loss(d, batch, s, objective);
  r.d_delta_n.assign(voxels, 0.0);
  wave::PfmDesign work = d;
  for (std::size_t v : probe) {
    if (v >= voxels) throw DomainError("gradient_fd: probe index out of range");
    // Perturbations may step past delta_n_max; the oracle differentiates the
    // unconstrained map, so the medium is not re-validated here.
    const double base = d.medium.delta_n()[v];
    work.medium.delta_n_mut()[v] = base + fd_step;
    const double up = batch_loss(work, batch, s, objective);
    work.medium.delta_n_mut()[v] = base - fd_step;
    const double down = batch_loss(work, batch, s, objective);
    work.medium.delta_n_mut()[v] = base;
    r.d_delta_n[v] = (up - down) / (2.0 * fd_step);
  }
  return r;
}

double gain_gradient_fd(const wave::PfmDesign& d, const Batch& batch, const wave::PropagationSettings& s,
                        const Objective& objective, double fd_step) {
  wave::PfmDesign work = d;
  const double g = d.medium.gain_per_step();
  work.medium.set_gain_per_step(g + fd_step);
  const double up = batch_loss(work, batch, s, objective);
  work.medium.set_gain_per_step(g - fd_step);
  const double down = batch_loss(work, batch, s, objective);
  return (up - down) / (2.0 * fd_step);
}

}  // namespace pfm::inverse
