#include "pfm/cli/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pfm/cli/units.hpp"
#include "pfm/error.hpp"

namespace pfm::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// Typed view of one JSON object that remembers which keys were read, so
// finish() can reject the rest.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw DomainError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void read(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw DomainError(where_ + "." + key + ": wrong type");
    }
  }

  void quantity(const char* key, double& out, Dimension d) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    const auto& v = j_.at(key);
    if (!v.is_string()) {
      throw DomainError(where_ + "." + key + ": physical quantities need explicit units, e.g. \"" +
                        format_quantity(out, d) + "\"");
    }
    try {
      out = parse_quantity(v.get<std::string>(), d);
    } catch (const DomainError& e) {
      throw DomainError(where_ + "." + key + ": " + e.what());
    }
  }

  void path(const char* key, fs::path& out, const fs::path& base) {
    std::string s;
    if (!j_.contains(key)) return;
    read(key, s);
    out = fs::path(s).is_absolute() || base.empty() ? fs::path(s) : base / s;
  }

  std::optional<Section> child(const char* key) {
    if (!j_.contains(key)) return std::nullopt;
    used_.insert(key);
    return Section(j_.at(key), where_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw DomainError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

template <typename Fn>
void with_child(Section& s, const char* key, Fn&& fn) {
  if (auto c = s.child(key)) {
    fn(*c);
    c->finish();
  }
}

// ---- per-type readers and writers -----------------------------------------

void read_constants(Section& s, scaling::PhysicalConstants& c) {
  s.quantity("wavelength", c.wavelength_vacuum, dim::length);
  s.read("refractive_index", c.refractive_index);
  s.quantity("nonlinear_index", c.nonlinear_index, dim::nonlinear_index);
  s.quantity("pulse_duration", c.pulse_duration, dim::time);
  s.quantity("io_cost_per_element", c.io_cost_per_element, dim::energy);
  s.quantity("avg_power_cap", c.avg_power_cap, dim::power);
  s.read("nl_phase_target_rad", c.nl_phase_target);
  s.read("beam_area_fraction", c.beam_area_fraction);
  s.quantity("digital_op_cost", c.digital_op_cost, dim::energy);
  double cap = c.hbm_capacity * 8, bw = c.hbm_bandwidth * 8, per = c.digital_bytes_per_param * 8;
  s.quantity("hbm_capacity", cap, dim::information);
  s.quantity("hbm_bandwidth", bw, dim::bit_rate);
  s.quantity("gpu_volume", c.gpu_volume, dim::volume);
  s.quantity("digital_bytes_per_param", per, dim::information);
  c.hbm_capacity = cap / 8;
  c.hbm_bandwidth = bw / 8;
  c.digital_bytes_per_param = per / 8;
  c.validate();
}

ordered_json write_constants(const scaling::PhysicalConstants& c) {
  return {{"wavelength", format_quantity(c.wavelength_vacuum, dim::length)},
          {"refractive_index", c.refractive_index},
          {"nonlinear_index", format_quantity(c.nonlinear_index, dim::nonlinear_index)},
          {"pulse_duration", format_quantity(c.pulse_duration, dim::time)},
          {"io_cost_per_element", format_quantity(c.io_cost_per_element, dim::energy)},
          {"avg_power_cap", format_quantity(c.avg_power_cap, dim::power)},
          {"nl_phase_target_rad", c.nl_phase_target},
          {"beam_area_fraction", c.beam_area_fraction},
          {"digital_op_cost", format_quantity(c.digital_op_cost, dim::energy)},
          {"hbm_capacity", format_quantity(c.hbm_capacity * 8, dim::information)},
          {"hbm_bandwidth", format_quantity(c.hbm_bandwidth * 8, dim::bit_rate)},
          {"gpu_volume", format_quantity(c.gpu_volume, dim::volume)},
          {"digital_bytes_per_param", format_quantity(c.digital_bytes_per_param * 8, dim::information)}};
}

void read_propagation(Section& s, wave::PropagationSettings& p) {
  s.read("kerr_enabled", p.kerr_enabled);
  s.quantity("n2", p.n2, dim::nonlinear_index);
  s.read("z_steps_per_voxel", p.z_steps_per_voxel);
  std::string b = wave::to_string(p.boundary);
  s.read("boundary", b);
  p.boundary = wave::boundary_from_string(b);
  s.read("max_step_phase_rad", p.max_step_phase);
  s.read("checkpoint_interval", p.checkpoint_interval);
  double budget = static_cast<double>(p.checkpoint_budget_bytes) * 8;
  s.quantity("checkpoint_budget", budget, dim::information);
  p.checkpoint_budget_bytes = static_cast<std::size_t>(std::llround(budget / 8));
  p.validate();
}

ordered_json write_propagation(const wave::PropagationSettings& p) {
  return {{"kerr_enabled", p.kerr_enabled},
          {"n2", format_quantity(p.n2, dim::nonlinear_index)},
          {"z_steps_per_voxel", p.z_steps_per_voxel},
          {"boundary", wave::to_string(p.boundary)},
          {"max_step_phase_rad", p.max_step_phase},
          {"checkpoint_interval", p.checkpoint_interval},
          {"checkpoint_budget", format_quantity(static_cast<double>(p.checkpoint_budget_bytes) * 8, dim::information)}};
}

void read_layout(Section& s, wave::DesignLayout& l) {
  if (s.has("grid")) {
    std::vector<std::size_t> g;
    s.read("grid", g);
    if (g.size() != 3) throw DomainError("layout.grid: expected [nx, ny, nz]");
    l.shape = {g[0], g[1], g[2]};
  }
  s.quantity("voxel_pitch", l.voxel_pitch, dim::length);
  s.quantity("wavelength", l.wavelength_vacuum, dim::length);
  s.read("background_index", l.background_index);
  s.read("delta_n_max", l.delta_n_max);
  s.read("input_dim", l.input_dim);
  s.read("output_dim", l.output_dim);
  s.read("input_gap", l.input_gap);
  s.read("output_gap", l.output_gap);
  std::string enc = wave::to_string(l.encoding);
  s.read("encoding", enc);
  l.encoding = wave::encoding_from_string(enc);
  s.quantity("peak_power", l.peak_power_scale, dim::power);
  s.read("init_sigma", l.init_sigma);
  s.read("seed", l.seed);
}

ordered_json write_layout(const wave::DesignLayout& l) {
  ordered_json j = {{"grid", {l.shape.nx, l.shape.ny, l.shape.nz}}};
  // A zero pitch means lambda/n and is left out.
  if (l.voxel_pitch > 0) j["voxel_pitch"] = format_quantity(l.voxel_pitch, dim::length);
  j["wavelength"] = format_quantity(l.wavelength_vacuum, dim::length);
  j["background_index"] = l.background_index;
  j["delta_n_max"] = l.delta_n_max;
  j["input_dim"] = l.input_dim;
  j["output_dim"] = l.output_dim;
  j["input_gap"] = l.input_gap;
  j["output_gap"] = l.output_gap;
  j["encoding"] = wave::to_string(l.encoding);
  j["peak_power"] = format_quantity(l.peak_power_scale, dim::power);
  j["init_sigma"] = l.init_sigma;
  j["seed"] = l.seed;
  return j;
}

void read_dataset(Section& s, inverse::ToyDatasetSpec& d) {
  s.read("classes", d.classes);
  s.read("dim", d.dim);
  s.read("samples", d.samples);
  s.read("seed", d.seed);
  s.read("noise", d.noise);
  s.read("train_fraction", d.train_fraction);
}

ordered_json write_dataset(const inverse::ToyDatasetSpec& d) {
  return {{"classes", d.classes}, {"dim", d.dim},     {"samples", d.samples},
          {"seed", d.seed},       {"noise", d.noise}, {"train_fraction", d.train_fraction}};
}

void read_training(Section& s, inverse::TrainConfig& t) {
  s.read("learning_rate", t.learning_rate);
  s.read("steps", t.steps);
  s.read("batch_size", t.batch_size);
  std::string mode = inverse::to_string(t.gradient_mode), opt = inverse::to_string(t.optimizer);
  s.read("gradient_mode", mode);
  s.read("optimizer", opt);
  t.gradient_mode = inverse::gradient_mode_from_string(mode);
  t.optimizer = inverse::optimizer_from_string(opt);
  s.read("fd_step", t.fd_step);
  s.read("projection", t.projection);
  s.read("seed", t.seed);
  s.read("logit_scale", t.logit_scale);
  s.read("eval_every", t.eval_every);
  t.validate();
}

ordered_json write_training(const inverse::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"steps", t.steps},
          {"batch_size", t.batch_size},
          {"gradient_mode", inverse::to_string(t.gradient_mode)},
          {"optimizer", inverse::to_string(t.optimizer)},
          {"fd_step", t.fd_step},
          {"projection", t.projection},
          {"seed", t.seed},
          {"logit_scale", t.logit_scale},
          {"eval_every", t.eval_every}};
}

void read_perturbation(Section& s, variability::PerturbationSpec& p) {
  s.read("sigma", p.sigma);
  s.read("correlation_length_voxels", p.correlation_length);
  s.read("dead_voxel_rate", p.dead_voxel_rate);
  s.read("seed", p.seed);
  p.validate();
}

ordered_json write_perturbation(const variability::PerturbationSpec& p) {
  return {{"sigma", p.sigma},
          {"correlation_length_voxels", p.correlation_length},
          {"dead_voxel_rate", p.dead_voxel_rate},
          {"seed", p.seed}};
}

void read_compensation(Section& s, compensation::CompensationConfig& c) {
  std::string kind = compensation::to_string(c.kind);
  s.read("kind", kind);
  c.kind = compensation::compensation_kind_from_string(kind);
  s.read("post_learning_rate", c.post_learning_rate);
  s.read("pre_learning_rate", c.pre_learning_rate);
  s.read("steps", c.steps);
  s.read("batch_size", c.batch_size);
  s.read("eval_every", c.eval_every);
  s.read("seed", c.seed);
  s.read("logit_scale", c.logit_scale);
  c.validate();
}

ordered_json write_compensation(const compensation::CompensationConfig& c) {
  return {{"kind", compensation::to_string(c.kind)},
          {"post_learning_rate", c.post_learning_rate},
          {"pre_learning_rate", c.pre_learning_rate},
          {"steps", c.steps},
          {"batch_size", c.batch_size},
          {"eval_every", c.eval_every},
          {"seed", c.seed},
          {"logit_scale", c.logit_scale}};
}

std::string path_string(const fs::path& p) { return p.generic_string(); }

// ---- per-command sections ---------------------------------------------------

void read_scale(Section& s, ScaleConfig& c) {
  with_child(s, "constants", [&](Section& x) { read_constants(x, c.constants); });
  s.read("aspect_ratio", c.aspect_ratio);
  s.read("params", c.params);
  s.read("sweep", c.sweep);
  with_child(s, "memory_wall", [&](Section& x) {
    x.read("param_count", c.memory_wall.param_count);
    x.read("bits_per_param", c.memory_wall.bits_per_param);
    x.quantity("density", c.memory_wall.density, dim::bit_density);
    x.quantity("bandwidth", c.memory_wall.bandwidth, dim::bit_rate);
    x.quantity("layer_thickness", c.memory_wall.layer_thickness, dim::length);
  });
  with_child(s, "metasurface", [&](Section& x) {
    x.quantity("wafer_diameter", c.metasurface.wafer_diameter, dim::length);
    x.quantity("pixel_pitch", c.metasurface.pixel_pitch, dim::length);
  });
  with_child(s, "io_bandwidth", [&](Section& x) {
    x.read("dimension", c.io_bandwidth.dimension);
    x.read("bits_per_element", c.io_bandwidth.bits_per_element);
    x.quantity("rate", c.io_bandwidth.rate, dim::frequency);
  });
  if (!(c.aspect_ratio >= 1)) throw DomainError("scale.aspect_ratio must be >= 1");
  if (!c.sweep.empty()) parse_sweep(c.sweep);
}

void write_scale(ordered_json& j, const ScaleConfig& c) {
  j["constants"] = write_constants(c.constants);
  j["aspect_ratio"] = c.aspect_ratio;
  j["params"] = c.params;
  if (!c.sweep.empty()) j["sweep"] = c.sweep;
  j["memory_wall"] = {{"param_count", c.memory_wall.param_count},
                      {"bits_per_param", c.memory_wall.bits_per_param},
                      {"density", format_quantity(c.memory_wall.density, dim::bit_density)},
                      {"bandwidth", format_quantity(c.memory_wall.bandwidth, dim::bit_rate)},
                      {"layer_thickness", format_quantity(c.memory_wall.layer_thickness, dim::length)}};
  j["metasurface"] = {{"wafer_diameter", format_quantity(c.metasurface.wafer_diameter, dim::length)},
                      {"pixel_pitch", format_quantity(c.metasurface.pixel_pitch, dim::length)}};
  j["io_bandwidth"] = {{"dimension", c.io_bandwidth.dimension},
                       {"bits_per_element", c.io_bandwidth.bits_per_element},
                       {"rate", format_quantity(c.io_bandwidth.rate, dim::frequency)}};
}

}  // namespace

std::vector<double> parse_sweep(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw DomainError("sweep '" + spec + "': expected A:B:xK");
  std::string k = parts[2];
  if (!k.empty() && (k.front() == 'x' || k.front() == 'X')) k.erase(0, 1);
  if (!k.empty() && (k.back() == 'x' || k.back() == 'X')) k.pop_back();
  double a = 0, b = 0, f = 0;
  try {
    std::size_t u1 = 0, u2 = 0, u3 = 0;
    a = std::stod(parts[0], &u1);
    b = std::stod(parts[1], &u2);
    f = std::stod(k, &u3);
    if (u1 != parts[0].size() || u2 != parts[1].size() || u3 != k.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw DomainError("sweep '" + spec + "': malformed number");
  }
  if (!(a >= 1) || !(b >= a) || !(f > 1)) throw DomainError("sweep '" + spec + "': need 1 <= A <= B and K > 1");
  std::vector<double> out;
  // By exponent rather than repeated products, so decades stay exact.
  const double steps = std::log(b / a) / std::log(f);
  const auto n = static_cast<std::size_t>(std::floor(steps + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    out.push_back(a * std::pow(f, static_cast<double>(i)));
  }
  return out;
}

RunConfig default_run_config(const std::string& command) {
  static const std::set<std::string> known{"scale", "simulate", "train", "perturb", "ensemble"};
  if (!known.contains(command)) throw DomainError("unknown command '" + command + "'");
  RunConfig c;
  c.command = command;
  c.train.propagation.kerr_enabled = true;
  c.perturb.propagation.kerr_enabled = true;
  c.ensemble.propagation.kerr_enabled = true;
  c.perturb.perturbation.sigma = 0.003;
  c.perturb.perturbation.correlation_length = 8;
  c.perturb.compensation.steps = 40;
  c.perturb.finetune_training.steps = 30;
  c.perturb.finetune_training.eval_every = 5;
  c.ensemble.perturbation.sigma = 0.003;
  c.ensemble.finetune_training.steps = 40;
  c.ensemble.finetune_training.eval_every = 5;
  c.ensemble.router_training.steps = 300;
  c.ensemble.router_training.learning_rate = 2.0;
  c.train.layout.peak_power_scale = 3e7;
  c.ensemble.layout.peak_power_scale = 3e7;
  c.ensemble.layout.init_sigma = 0.01;
  c.ensemble.layout.seed = 1;
  return c;
}

RunConfig parse_run_config(const json& j, const std::string& command, const fs::path& base) {
  RunConfig c = default_run_config(command);
  Section s(j, "config");
  s.read("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw DomainError("config: schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  std::string cmd = command;
  s.read("command", cmd);
  if (cmd != command) throw DomainError("config is for command '" + cmd + "', not '" + command + "'");

  if (command == "scale") {
    read_scale(s, c.scale);
  } else if (command == "simulate") {
    auto& x = c.simulate;
    s.path("design", x.design, base);
    s.path("inputs", x.inputs, base);
    with_child(s, "propagation", [&](Section& p) { read_propagation(p, x.propagation); });
    s.read("export_fields", x.export_fields);
  } else if (command == "train") {
    auto& x = c.train;
    if (s.has("design")) {
      fs::path p;
      s.path("design", p, base);
      x.design = p;
    }
    with_child(s, "layout", [&](Section& p) { read_layout(p, x.layout); });
    with_child(s, "dataset", [&](Section& p) { read_dataset(p, x.dataset); });
    with_child(s, "propagation", [&](Section& p) { read_propagation(p, x.propagation); });
    with_child(s, "training", [&](Section& p) { read_training(p, x.training); });
  } else if (command == "perturb") {
    auto& x = c.perturb;
    s.path("design", x.design, base);
    with_child(s, "dataset", [&](Section& p) { read_dataset(p, x.dataset); });
    with_child(s, "propagation", [&](Section& p) { read_propagation(p, x.propagation); });
    with_child(s, "perturbation", [&](Section& p) { read_perturbation(p, x.perturbation); });
    s.read("sigmas", x.sigmas);
    s.read("seeds", x.seeds);
    s.read("compensate", x.compensate);
    with_child(s, "compensation", [&](Section& p) { read_compensation(p, x.compensation); });
    s.read("finetune", x.finetune);
    s.read("mask_fraction", x.mask_fraction);
    with_child(s, "finetune_training", [&](Section& p) { read_training(p, x.finetune_training); });
    for (double sg : x.sigmas) {
      if (!(sg >= 0)) throw DomainError("perturb.sigmas: values must be >= 0");
    }
  } else {
    auto& x = c.ensemble;
    if (s.has("design")) {
      fs::path p;
      s.path("design", p, base);
      x.design = p;
    }
    with_child(s, "layout", [&](Section& p) { read_layout(p, x.layout); });
    with_child(s, "dataset", [&](Section& p) { read_dataset(p, x.dataset); });
    with_child(s, "propagation", [&](Section& p) { read_propagation(p, x.propagation); });
    s.read("mode", x.mode);
    if (x.mode != "spawn" && x.mode != "specialists") throw DomainError("ensemble.mode must be spawn or specialists");
    s.read("experts", x.experts);
    with_child(s, "perturbation", [&](Section& p) { read_perturbation(p, x.perturbation); });
    s.read("class_subsets", x.class_subsets);
    s.read("mask_fraction", x.mask_fraction);
    with_child(s, "finetune_training", [&](Section& p) { read_training(p, x.finetune_training); });
    with_child(s, "router_training", [&](Section& p) { read_training(p, x.router_training); });
    s.read("top_k", x.top_k);
    if (x.experts == 0) throw DomainError("ensemble.experts must be >= 1");
  }
  s.finish();
  return c;
}

RunConfig load_run_config(const fs::path& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j, command, fs::absolute(path).parent_path());
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["command"] = c.command;
  if (c.command == "scale") {
    write_scale(j, c.scale);
  } else if (c.command == "simulate") {
    j["design"] = path_string(c.simulate.design);
    j["inputs"] = path_string(c.simulate.inputs);
    j["propagation"] = write_propagation(c.simulate.propagation);
    j["export_fields"] = c.simulate.export_fields;
  } else if (c.command == "train") {
    const auto& x = c.train;
    if (x.design) j["design"] = path_string(*x.design);
    j["layout"] = write_layout(x.layout);
    j["dataset"] = write_dataset(x.dataset);
    j["propagation"] = write_propagation(x.propagation);
    j["training"] = write_training(x.training);
  } else if (c.command == "perturb") {
    const auto& x = c.perturb;
    j["design"] = path_string(x.design);
    j["dataset"] = write_dataset(x.dataset);
    j["propagation"] = write_propagation(x.propagation);
    j["perturbation"] = write_perturbation(x.perturbation);
    j["sigmas"] = x.sigmas;
    j["seeds"] = x.seeds;
    j["compensate"] = x.compensate;
    j["compensation"] = write_compensation(x.compensation);
    j["finetune"] = x.finetune;
    j["mask_fraction"] = x.mask_fraction;
    j["finetune_training"] = write_training(x.finetune_training);
  } else {
    const auto& x = c.ensemble;
    if (x.design) j["design"] = path_string(*x.design);
    j["layout"] = write_layout(x.layout);
    j["dataset"] = write_dataset(x.dataset);
    j["propagation"] = write_propagation(x.propagation);
    j["mode"] = x.mode;
    j["experts"] = x.experts;
    j["perturbation"] = write_perturbation(x.perturbation);
    j["class_subsets"] = x.class_subsets;
    j["mask_fraction"] = x.mask_fraction;
    j["finetune_training"] = write_training(x.finetune_training);
    j["router_training"] = write_training(x.router_training);
    j["top_k"] = x.top_k;
  }
  return j;
}

}  // namespace pfm::cli
