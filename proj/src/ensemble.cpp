#include "pfm/ensemble.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "pfm/design_io.hpp"
#include "pfm/error.hpp"

namespace pfm::ensemble {
namespace {

constexpr char kRouterMagic[8] = {'P', 'F', 'M', 'R', 'T', 'R', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

// Indices of the top_k gate scores, ties to the lower index.
std::vector<std::size_t> selected(std::span<const double> a, std::size_t top_k) {
  std::vector<std::size_t> idx(a.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (top_k == 0 || top_k >= a.size()) return idx;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return a[x] > a[y]; });
  idx.resize(top_k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> gate_scores(const Router& r, std::span<const double> v) {
  std::vector<double> a(r.experts);
  for (std::size_t e = 0; e < r.experts; ++e) {
    double s = r.bias[e];
    for (std::size_t j = 0; j < r.input_dim; ++j) s += r.weight[e * r.input_dim + j] * v[j];
    a[e] = s;
  }
  return a;
}

}  // namespace

ExpertPool::ExpertPool(std::vector<wave::PfmDesign> experts, std::string base_hash, std::vector<std::uint64_t> seeds,
                       variability::PerturbationSpec spec)
    : experts_(std::move(experts)), base_hash_(std::move(base_hash)), seeds_(std::move(seeds)), spec_(spec) {
  if (experts_.empty()) throw DomainError("expert pool: needs at least one expert");
  if (seeds_.size() != experts_.size()) throw DomainError("expert pool: one seed per expert required");
  for (const auto& e : experts_) {
    if (e.input_dim() != experts_.front().input_dim() || e.output_dim() != experts_.front().output_dim()) {
      throw DomainError("expert pool: experts differ in input or output dimension");
    }
    hashes_.push_back(wave::design_hash(e));
  }
}

void ExpertPool::verify_unchanged() const {
  for (std::size_t e = 0; e < experts_.size(); ++e) {
    if (wave::design_hash(experts_[e]) != hashes_[e]) {
      throw Error("expert pool: expert " + std::to_string(e) + " changed after construction");
    }
  }
}

nlohmann::ordered_json ExpertPool::manifest(std::span<const std::string> paths) const {
  if (!paths.empty() && paths.size() != experts_.size()) throw DomainError("pool manifest: one path per expert");
  nlohmann::ordered_json j;
  j["format"] = "pfm-expert-pool";
  j["version"] = 1;
  j["base_design_sha256"] = base_hash_;
  j["perturbation"] = {{"sigma", spec_.sigma},
                       {"correlation_length_voxels", spec_.correlation_length},
                       {"dead_voxel_rate", spec_.dead_voxel_rate},
                       {"seed", spec_.seed}};
  auto& list = j["experts"] = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < experts_.size(); ++e) {
    nlohmann::ordered_json x;
    x["seed"] = seeds_[e];
    x["design_sha256"] = hashes_[e];
    x["path"] = paths.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(paths[e]);
    list.push_back(std::move(x));
  }
  return j;
}

ExpertPool spawn_ensemble(const wave::PfmDesign& base, std::size_t k, const variability::PerturbationSpec& p) {
  if (k == 0) throw DomainError("spawn_ensemble: k must be >= 1");
  p.validate();
  std::vector<wave::PfmDesign> experts;
  std::vector<std::uint64_t> seeds;
  for (std::size_t e = 0; e < k; ++e) {
    auto spec = p;
    spec.seed = p.seed + e;
    experts.push_back(variability::perturb(base, spec));
    seeds.push_back(spec.seed);
  }
  return ExpertPool(std::move(experts), wave::design_hash(base), std::move(seeds), p);
}

Router Router::uniform(std::size_t experts, std::size_t input_dim, std::size_t top_k) {
  if (experts == 0) throw DomainError("router: needs at least one expert");
  Router r;
  r.experts = experts;
  r.input_dim = input_dim;
  r.top_k = top_k;
  r.weight.assign(experts * input_dim, 0.0);
  r.bias.assign(experts, 0.0);
  return r;
}

std::vector<double> Router::weights(std::span<const double> v) const {
  if (v.size() != input_dim) throw DomainError("router: input dimension mismatch");
  const auto a = gate_scores(*this, v);
  const auto sel = selected(a, top_k);
  double mx = -INFINITY;
  for (std::size_t e : sel) mx = std::max(mx, a[e]);
  std::vector<double> w(experts, 0.0);
  double z = 0;
  for (std::size_t e : sel) z += (w[e] = std::exp(a[e] - mx));
  for (std::size_t e : sel) w[e] /= z;
  return w;
}

std::string Router::encode() const {
  nlohmann::ordered_json h;
  h["format"] = "pfm-router";
  h["version"] = 1;
  h["experts"] = experts;
  h["input_dim"] = input_dim;
  h["top_k"] = top_k;
  h["diverged"] = diverged;
  h["data"] = {{"dtype", "float64"}, {"order", "weight_row_major_then_bias"}, {"count", weight.size() + bias.size()}};
  const std::string header = h.dump(2);
  std::string out(kRouterMagic, sizeof kRouterMagic);
  put_u64(out, header.size());
  out += header;
  auto put = [&](double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); };
  for (double x : weight) put(x);
  for (double x : bias) put(x);
  return out;
}

Router Router::decode(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kRouterMagic, 8) != 0) throw FormatError("router: bad magic");
  const std::uint64_t hl = get_u64(bytes, 8);
  if (hl > bytes.size() - 16) throw FormatError("router: truncated header");
  Router r;
  try {
    const auto h = nlohmann::json::parse(bytes.substr(16, hl));
    r.experts = h.at("experts").get<std::size_t>();
    r.input_dim = h.at("input_dim").get<std::size_t>();
    r.top_k = h.at("top_k").get<std::size_t>();
    r.diverged = h.at("diverged").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("router header: ") + e.what());
  }
  const std::size_t count = r.experts * r.input_dim + r.experts;
  if (bytes.size() != 16 + hl + 8 * count) throw FormatError("router: payload size does not match the header");
  std::size_t at = 16 + hl;
  auto get = [&] {
    const double x = std::bit_cast<double>(get_u64(bytes, at));
    at += 8;
    return x;
  };
  r.weight.resize(r.experts * r.input_dim);
  r.bias.resize(r.experts);
  for (double& x : r.weight) x = get();
  for (double& x : r.bias) x = get();
  return r;
}

ExpertFeatures expert_features(const ExpertPool& pool, const inverse::ToyDataset& ds,
                               const wave::PropagationSettings& s) {
  if (ds.dim() != pool.input_dim()) throw DomainError("expert_features: dataset and pool dimensions differ");
  ExpertFeatures f(pool.size(), std::vector<std::vector<double>>(ds.inputs.size()));
  for (std::size_t e = 0; e < pool.size(); ++e) {
    const auto& d = pool.expert(e);
    const wave::Propagator p(d.medium, s, d.wavelength_vacuum);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ds.inputs.size()); ++i) {
      const auto k = static_cast<std::size_t>(i);
      f[e][k] = inverse::normalized_bins(wave::infer(d, p, ds.inputs[k]));
    }
  }
  return f;
}

std::vector<double> combine(const Router& r, std::span<const double> v,
                            const std::vector<std::vector<double>>& per_expert) {
  if (per_expert.size() != r.experts) throw DomainError("combine: one feature vector per expert required");
  const auto w = r.weights(v);
  std::vector<double> out(per_expert.front().size(), 0.0);
  for (std::size_t e = 0; e < r.experts; ++e) {
    if (w[e] == 0) continue;
    for (std::size_t b = 0; b < out.size(); ++b) out[b] += w[e] * per_expert[e][b];
  }
  return out;
}

std::vector<double> ensemble_infer(const ExpertPool& pool, const Router& r, std::span<const double> v,
                                   const wave::PropagationSettings& s) {
  if (r.experts != pool.size()) throw DomainError("ensemble_infer: router and pool sizes differ");
  const auto w = r.weights(v);
  std::vector<std::vector<double>> per(pool.size(), std::vector<double>(pool.output_dim(), 0.0));
  for (std::size_t e = 0; e < pool.size(); ++e) {
    if (w[e] == 0) continue;
    per[e] = inverse::normalized_bins(wave::infer(pool.expert(e), v, s));
  }
  return combine(r, v, per);
}

Router train_router(const ExpertPool& pool, const inverse::ToyDataset& ds, const inverse::TrainConfig& cfg,
                    const wave::PropagationSettings& s, std::size_t top_k) {
  return train_router(pool, ds, expert_features(pool, ds, s), cfg, top_k);
}

EnsembleMetrics evaluate_ensemble(const ExpertPool& pool, const Router& r, const inverse::ToyDataset& ds,
                                  const ExpertFeatures& features, double logit_scale) {
  if (r.experts != pool.size() || features.size() != pool.size()) {
    throw DomainError("evaluate_ensemble: router, pool and features disagree on expert count");
  }
  if (ds.validation.empty()) throw DomainError("evaluate_ensemble: empty validation split");
  EnsembleMetrics m;
  m.utilization.assign(pool.size(), 0.0);
  m.expert_accuracy.assign(pool.size(), 0.0);
  m.class_routing.assign(ds.classes, std::vector<double>(pool.size(), 0.0));
  std::vector<double> class_count(ds.classes, 0.0);
  std::vector<std::vector<double>> per(pool.size());
  for (std::size_t i : ds.validation) {
    const auto& v = ds.inputs[i];
    for (std::size_t e = 0; e < pool.size(); ++e) {
      per[e] = features[e][i];
      if (inverse::argmax(per[e]) == ds.labels[i]) m.expert_accuracy[e] += 1;
    }
    auto z = combine(r, v, per);
    for (double& x : z) x *= logit_scale;
    m.loss += inverse::cross_entropy(z, ds.labels[i]);
    if (inverse::argmax(z) == ds.labels[i]) m.accuracy += 1;
    const std::size_t top = inverse::argmax(r.weights(v));
    m.utilization[top] += 1;
    m.class_routing[ds.labels[i]][top] += 1;
    class_count[ds.labels[i]] += 1;
  }
  const auto n = static_cast<double>(ds.validation.size());
  m.accuracy /= n;
  m.loss /= n;
  for (double& u : m.utilization) u /= n;
  for (double& a : m.expert_accuracy) a /= n;
  for (std::size_t c = 0; c < ds.classes; ++c) {
    if (class_count[c] > 0) {
      for (double& x : m.class_routing[c]) x /= class_count[c];
    }
  }
  return m;
}

EnsembleMetrics evaluate_ensemble(const ExpertPool& pool, const Router& r, const inverse::ToyDataset& ds,
                                  const wave::PropagationSettings& s, double logit_scale) {
  return evaluate_ensemble(pool, r, ds, expert_features(pool, ds, s), logit_scale);
}

Router train_router(const ExpertPool& pool, const inverse::ToyDataset& ds, const ExpertFeatures& features,
                    const inverse::TrainConfig& cfg, std::size_t top_k) {
  cfg.validate();
  ds.validate();
  if (ds.dim() != pool.input_dim()) throw DomainError("train_router: dataset and pool dimensions differ");
  if (features.size() != pool.size()) throw DomainError("train_router: features do not match the pool");
  const std::size_t k = pool.size(), n = pool.input_dim();
  Router cur = Router::uniform(k, n, top_k);
  if (cfg.steps == 0 || k == 1) {
    pool.verify_unchanged();
    return cur;
  }
  Router best = cur;
  auto score = [&](const Router& r) {
    const auto m = evaluate_ensemble(pool, r, ds, features, cfg.logit_scale);
    return std::pair{m.accuracy, -m.loss};
  };
  auto best_score = score(cur);

  std::vector<std::vector<double>> per(k);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<double> gw(k * n, 0.0), gb(k, 0.0);
    double loss = 0;
    for (std::size_t i : ds.train) {
      const auto& v = ds.inputs[i];
      for (std::size_t e = 0; e < k; ++e) per[e] = features[e][i];
      const auto w = cur.weights(v);
      const auto y = combine(cur, v, per);
      std::vector<double> logits(y.size()), dl(y.size());
      for (std::size_t b = 0; b < y.size(); ++b) logits[b] = cfg.logit_scale * y[b];
      loss += inverse::cross_entropy(logits, ds.labels[i], dl);
      // dL/dw_e, then through the softmax over the selected experts.
      std::vector<double> dw(k, 0.0);
      double mean = 0;
      for (std::size_t e = 0; e < k; ++e) {
        if (w[e] == 0) continue;
        for (std::size_t b = 0; b < y.size(); ++b) dw[e] += cfg.logit_scale * dl[b] * per[e][b];
        mean += w[e] * dw[e];
      }
      for (std::size_t e = 0; e < k; ++e) {
        if (w[e] == 0) continue;
        const double da = w[e] * (dw[e] - mean);
        gb[e] += da;
        for (std::size_t j = 0; j < n; ++j) gw[e * n + j] += da * v[j];
      }
    }
    const double inv = 1.0 / static_cast<double>(ds.train.size());
    if (!std::isfinite(loss)) {
      Router u = Router::uniform(k, n, top_k);
      u.diverged = true;
      pool.verify_unchanged();
      return u;
    }
    for (std::size_t a = 0; a < gw.size(); ++a) cur.weight[a] -= cfg.learning_rate * inv * gw[a];
    for (std::size_t e = 0; e < k; ++e) cur.bias[e] -= cfg.learning_rate * inv * gb[e];
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const auto sc = score(cur);
      if (sc > best_score) {
        best_score = sc;
        best = cur;
      }
    }
  }
  pool.verify_unchanged();
  return best;
}

ExpertPool specialist_pool(const wave::PfmDesign& base, const inverse::ToyDataset& ds, const SpecialistSpec& spec,
                           const wave::PropagationSettings& s) {
  if (spec.class_subsets.empty()) throw DomainError("specialist_pool: no class subsets");
  std::vector<wave::PfmDesign> experts;
  std::vector<std::uint64_t> seeds;
  for (std::size_t e = 0; e < spec.class_subsets.size(); ++e) {
    auto p = spec.perturbation;
    p.seed = spec.perturbation.seed + e;
    const auto perturbed = variability::perturb(base, p);
    const auto mask = variability::make_mask(base.medium.shape(), spec.mask_fraction, p.seed);
    const auto subset = ds.restricted_to(spec.class_subsets[e]);
    auto cfg = spec.finetune;
    cfg.seed = spec.finetune.seed + e;
    experts.push_back(variability::finetune_reprogrammable(perturbed, mask, subset, cfg, s));
    seeds.push_back(p.seed);
  }
  return ExpertPool(std::move(experts), wave::design_hash(base), std::move(seeds), spec.perturbation);
}

}  // namespace pfm::ensemble
