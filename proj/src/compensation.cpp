#include "pfm/compensation.hpp"

#include <cmath>
#include <optional>

#include "pfm/design_io.hpp"
#include "pfm/error.hpp"

namespace pfm::compensation {
namespace {

using wave::Complex;

struct Grad {
  std::vector<double> pre_w, pre_b, post_w, post_b;
  double loss = 0;

  Grad(std::size_t n, std::size_t k) : pre_w(n * n, 0.0), pre_b(n, 0.0), post_w(k * k, 0.0), post_b(k, 0.0) {}
};

// Loss and parameter gradients of one sample given its detector vector.
// Returns df/d(features) through the post map in `d_features`.
double post_backward(const CompensationStack& c, std::span<const double> features, std::size_t label,
                     double logit_scale, Grad& g, std::span<double> d_features) {
  const std::size_t k = c.output_dim;
  const auto z = c.apply_post(features);
  std::vector<double> logits(k), dl(k);
  for (std::size_t i = 0; i < k; ++i) logits[i] = logit_scale * z[i];
  const double loss = inverse::cross_entropy(logits, label, dl);
  for (std::size_t i = 0; i < k; ++i) {
    const double dz = logit_scale * dl[i];
    g.post_b[i] += dz;
    for (std::size_t j = 0; j < k; ++j) g.post_w[i * k + j] += dz * features[j];
  }
  if (!d_features.empty()) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += c.post_weight[i * k + j] * logit_scale * dl[i];
      d_features[j] = s;
    }
  }
  return loss;
}

void axpy(std::vector<double>& x, const std::vector<double>& g, double a) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= a * g[i];
}

bool better(const inverse::Metrics& a, const inverse::Metrics& b) {
  return a.accuracy > b.accuracy || (a.accuracy == b.accuracy && a.loss < b.loss);
}

}  // namespace

const char* to_string(CompensationKind k) { return k == CompensationKind::post_only ? "post_only" : "pre_post"; }

CompensationKind compensation_kind_from_string(const std::string& s) {
  if (s == "post_only") return CompensationKind::post_only;
  if (s == "pre_post") return CompensationKind::pre_post;
  throw DomainError("unknown compensation kind '" + s + "'");
}

CompensationStack CompensationStack::identity(std::size_t n, std::size_t k) {
  CompensationStack c;
  c.input_dim = n;
  c.output_dim = k;
  c.pre_weight.assign(n * n, 0.0);
  c.pre_bias.assign(n, 0.0);
  c.post_weight.assign(k * k, 0.0);
  c.post_bias.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) c.pre_weight[i * n + i] = 1.0;
  for (std::size_t i = 0; i < k; ++i) c.post_weight[i * k + i] = 1.0;
  return c;
}

bool CompensationStack::is_identity() const {
  const auto id = identity(input_dim, output_dim);
  return pre_weight == id.pre_weight && pre_bias == id.pre_bias && post_weight == id.post_weight &&
         post_bias == id.post_bias;
}

std::vector<double> CompensationStack::apply_pre(std::span<const double> v) const {
  if (v.size() != input_dim) throw DomainError("compensation: input dimension mismatch");
  std::vector<double> out(input_dim);
  for (std::size_t i = 0; i < input_dim; ++i) {
    double s = pre_bias[i];
    for (std::size_t j = 0; j < input_dim; ++j) s += pre_weight[i * input_dim + j] * v[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> CompensationStack::apply_post(std::span<const double> f) const {
  if (f.size() != output_dim) throw DomainError("compensation: output dimension mismatch");
  std::vector<double> out(output_dim);
  for (std::size_t i = 0; i < output_dim; ++i) {
    double s = post_bias[i];
    for (std::size_t j = 0; j < output_dim; ++j) s += post_weight[i * output_dim + j] * f[j];
    out[i] = s;
  }
  return out;
}

nlohmann::ordered_json CompensationStack::to_json() const {
  nlohmann::ordered_json j;
  j["input_dim"] = input_dim;
  j["output_dim"] = output_dim;
  j["pre"] = {{"weight", pre_weight}, {"bias", pre_bias}};
  j["post"] = {{"weight", post_weight}, {"bias", post_bias}};
  j["trained_on"] = trained_on;
  j["diverged"] = diverged;
  return j;
}

CompensationStack CompensationStack::from_json(const nlohmann::ordered_json& j) {
  CompensationStack c;
  try {
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    c.pre_weight = j.at("pre").at("weight").get<std::vector<double>>();
    c.pre_bias = j.at("pre").at("bias").get<std::vector<double>>();
    c.post_weight = j.at("post").at("weight").get<std::vector<double>>();
    c.post_bias = j.at("post").at("bias").get<std::vector<double>>();
    c.trained_on = j.at("trained_on").get<std::string>();
    c.diverged = j.at("diverged").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("compensation stack: ") + e.what());
  }
  const std::size_t n = c.input_dim, k = c.output_dim;
  if (c.pre_weight.size() != n * n || c.pre_bias.size() != n || c.post_weight.size() != k * k ||
      c.post_bias.size() != k) {
    throw FormatError("compensation stack: parameter sizes do not match the declared dimensions");
  }
  return c;
}

void CompensationConfig::validate() const {
  if (!(post_learning_rate >= 0) || !(pre_learning_rate >= 0)) {
    throw DomainError("compensation: learning rates must be >= 0");
  }
  if (batch_size == 0 || eval_every == 0) throw DomainError("compensation: batch_size and eval_every must be >= 1");
  if (!(logit_scale > 0)) throw DomainError("compensation: logit_scale must be positive");
}

std::vector<double> compensated_logits(const wave::PfmDesign& d, const wave::Propagator& p,
                                       const CompensationStack& c, std::span<const double> v, double logit_scale) {
  const auto r = wave::infer(d, p, c.apply_pre(v));
  auto z = c.apply_post(inverse::normalized_bins(r));
  for (double& x : z) x *= logit_scale;
  return z;
}

inverse::Metrics evaluate_compensated(const wave::PfmDesign& d, const CompensationStack& c,
                                      const inverse::ToyDataset& ds, std::span<const std::size_t> indices,
                                      const wave::PropagationSettings& s, double logit_scale) {
  if (indices.empty()) throw DomainError("evaluate_compensated: empty split");
  if (c.input_dim != d.input_dim() || c.output_dim != d.output_dim()) {
    throw DomainError("evaluate_compensated: stack dimensions do not match the design");
  }
  const wave::Propagator p(d.medium, s, d.wavelength_vacuum);
  std::vector<double> losses(indices.size());
  std::vector<int> hits(indices.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(indices.size()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t k = indices[i];
    const auto logits = compensated_logits(d, p, c, ds.inputs[k], logit_scale);
    losses[i] = inverse::cross_entropy(logits, ds.labels[k]);
    hits[i] = inverse::argmax(logits) == ds.labels[k] ? 1 : 0;
  }
  inverse::Metrics m;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    m.loss += losses[i];
    m.accuracy += hits[i];
  }
  m.loss /= static_cast<double>(indices.size());
  m.accuracy /= static_cast<double>(indices.size());
  return m;
}

CompensationStack fit_compensation(const wave::PfmDesign& d, const inverse::ToyDataset& ds,
                                   const CompensationConfig& cfg, const wave::PropagationSettings& s) {
  cfg.validate();
  ds.validate();
  if (ds.dim() != d.input_dim()) throw DomainError("fit_compensation: dataset and design dimensions differ");
  if (ds.train.empty() || ds.validation.empty()) throw DomainError("fit_compensation: empty split");
  const std::size_t n = d.input_dim(), k = d.output_dim();
  const wave::Propagator p(d.medium, s, d.wavelength_vacuum);
  const bool with_pre = cfg.kind == CompensationKind::pre_post;

  CompensationStack cur = CompensationStack::identity(n, k);
  cur.trained_on = wave::design_hash(d);

  // With the pre map fixed at identity the device outputs never change, so
  // post-only fitting works on cached features.
  std::vector<std::vector<double>> cached;
  if (!with_pre) {
    cached.resize(ds.inputs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ds.inputs.size()); ++i) {
      cached[static_cast<std::size_t>(i)] = inverse::normalized_bins(wave::infer(d, p, ds.inputs[static_cast<std::size_t>(i)]));
    }
  }
  auto validate_stack = [&](const CompensationStack& c) {
    if (with_pre) return evaluate_compensated(d, c, ds, ds.validation, s, cfg.logit_scale);
    inverse::Metrics m;
    for (std::size_t idx : ds.validation) {
      auto z = c.apply_post(cached[idx]);
      for (double& x : z) x *= cfg.logit_scale;
      m.loss += inverse::cross_entropy(z, ds.labels[idx]);
      m.accuracy += inverse::argmax(z) == ds.labels[idx] ? 1 : 0;
    }
    m.loss /= static_cast<double>(ds.validation.size());
    m.accuracy /= static_cast<double>(ds.validation.size());
    return m;
  };

  CompensationStack best = cur;
  inverse::Metrics best_m = validate_stack(cur);
  inverse::BatchSampler sampler(ds.train, cfg.seed, with_pre ? cfg.batch_size : ds.train.size());

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const auto idx = sampler.next();
    std::vector<Grad> grads(idx.size(), Grad(n, k));
    std::vector<std::string> errors(idx.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(idx.size()); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const std::size_t sample = idx[i];
      Grad& g = grads[i];
      try {
        if (!with_pre) {
          g.loss = post_backward(cur, cached[sample], ds.labels[sample], cfg.logit_scale, g, {});
          continue;
        }
        const auto v_pre = cur.apply_pre(ds.inputs[sample]);
        const auto field = wave::encode_input(v_pre, d);
        std::vector<Complex> lambda_in(field.amplitude.size());
        wave::Propagator::Gradients none{.d_delta_n = {}, .d_gain = 0.0};
        auto seed = [&](std::span<const Complex> out, std::span<Complex> lambda) {
          wave::OpticalField f = field;
          std::copy(out.begin(), out.end(), f.amplitude.begin());
          const auto r = wave::readout(f, d);
          const auto feats = inverse::normalized_bins(r);
          std::vector<double> df(k), dr(k);
          g.loss = post_backward(cur, feats, ds.labels[sample], cfg.logit_scale, g, df);
          inverse::normalized_bins_backward(r, df, dr);
          wave::readout_adjoint(out, d, dr, lambda);
        };
        p.gradient(field.amplitude, seed, none, lambda_in);
        const auto dv = wave::encode_input_gradient(v_pre, d, lambda_in);
        const auto& v = ds.inputs[sample];
        for (std::size_t a = 0; a < n; ++a) {
          g.pre_b[a] += dv[a];
          for (std::size_t b = 0; b < n; ++b) g.pre_w[a * n + b] += dv[a] * v[b];
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    Grad total(n, k);
    bool finite = true;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (!errors[i].empty()) finite = false;
      total.loss += grads[i].loss;
      for (std::size_t a = 0; a < total.pre_w.size(); ++a) total.pre_w[a] += grads[i].pre_w[a];
      for (std::size_t a = 0; a < n; ++a) total.pre_b[a] += grads[i].pre_b[a];
      for (std::size_t a = 0; a < total.post_w.size(); ++a) total.post_w[a] += grads[i].post_w[a];
      for (std::size_t a = 0; a < k; ++a) total.post_b[a] += grads[i].post_b[a];
    }
    if (!finite || !std::isfinite(total.loss)) {
      CompensationStack id = CompensationStack::identity(n, k);
      id.trained_on = cur.trained_on;
      id.diverged = true;
      return id;
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    axpy(cur.post_weight, total.post_w, cfg.post_learning_rate * inv);
    axpy(cur.post_bias, total.post_b, cfg.post_learning_rate * inv);
    if (with_pre) {
      axpy(cur.pre_weight, total.pre_w, cfg.pre_learning_rate * inv);
      axpy(cur.pre_bias, total.pre_b, cfg.pre_learning_rate * inv);
    }
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      inverse::Metrics m;
      try {
        m = validate_stack(cur);
      } catch (const StabilityError&) {
        continue;
      }
      if (better(m, best_m)) {
        best_m = m;
        best = cur;
      }
    }
  }
  return best;
}

}  // namespace pfm::compensation
