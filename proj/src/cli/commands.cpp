#include "pfm/cli/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "pfm/cli/report_bundle.hpp"
#include "pfm/cli/units.hpp"
#include "pfm/design_io.hpp"
#include "pfm/ensemble.hpp"
#include "pfm/hash.hpp"
#include "pfm/table_format.hpp"

namespace pfm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Shortest text that reads back to the same double.
std::string num(double x) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

ordered_json base_provenance(const RunConfig& c) {
  return {{"command", c.command}, {"config_sha256", config_hash(c)}, {"code_version", code_version()}};
}

// ---- scale --------------------------------------------------------------------

ordered_json report_json(const scaling::ScalingReport& r) {
  return {{"param_count", r.param_count},
          {"volume_m3", r.volume},
          {"geometry",
           {{"side_m", r.geometry.side},
            {"length_m", r.geometry.length},
            {"cross_section_area_m2", r.geometry.cross_section_area},
            {"guided_modes", r.geometry.guided_modes}}},
          {"io_dimension", r.io_dimension},
          {"peak_power_w", r.peak_power},
          {"pulse_energy_j", r.pulse_energy},
          {"io_energy_j", r.io_energy},
          {"inference_energy_j", r.inference_energy},
          {"propagation_delay_s", r.propagation_delay},
          {"inference_time_s", r.inference_time},
          {"inference_rate_hz", r.inference_rate},
          {"critical_power_ratio", r.critical_power_ratio},
          {"digital_energy_j", r.digital_energy},
          {"digital_time_s", r.digital_time},
          {"digital_cube_side_m", r.digital_cube_side}};
}

scaling::ScalingReport report_from_json(const ordered_json& j) {
  scaling::ScalingReport r;
  r.param_count = j.at("param_count").get<double>();
  r.volume = j.at("volume_m3").get<double>();
  const auto& g = j.at("geometry");
  r.geometry.side = g.at("side_m").get<double>();
  r.geometry.length = g.at("length_m").get<double>();
  r.geometry.cross_section_area = g.at("cross_section_area_m2").get<double>();
  r.geometry.guided_modes = g.at("guided_modes").get<std::uint64_t>();
  r.io_dimension = j.at("io_dimension").get<std::uint64_t>();
  r.peak_power = j.at("peak_power_w").get<double>();
  r.pulse_energy = j.at("pulse_energy_j").get<double>();
  r.io_energy = j.at("io_energy_j").get<double>();
  r.inference_energy = j.at("inference_energy_j").get<double>();
  r.propagation_delay = j.at("propagation_delay_s").get<double>();
  r.inference_time = j.at("inference_time_s").get<double>();
  r.inference_rate = j.at("inference_rate_hz").get<double>();
  r.critical_power_ratio = j.at("critical_power_ratio").get<double>();
  r.digital_energy = j.at("digital_energy_j").get<double>();
  r.digital_time = j.at("digital_time_s").get<double>();
  r.digital_cube_side = j.at("digital_cube_side_m").get<double>();
  return r;
}

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

ordered_json checks_json(const std::vector<Check>& checks) {
  ordered_json a = ordered_json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return a;
}

bool all_passed(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<Check> scaling_checks(const ScaleConfig& sc, const std::vector<scaling::ScalingReport>& reports,
                                  const std::string& emitted_json) {
  using namespace scaling;
  std::vector<Check> out;
  const auto& c = sc.constants;
  const double p0 = 1e12;
  const double lin = std::abs(optical_volume(7 * p0, c) - 7 * optical_volume(p0, c)) / (7 * optical_volume(p0, c));
  out.push_back({"volume_linearity", lin < 1e-15, "relative deviation " + num(lin)});

  const auto r12 = scaling_report(1e12, c, sc.aspect_ratio);
  const auto r15 = scaling_report(1e15, c, sc.aspect_ratio);
  const auto r18 = scaling_report(1e18, c, sc.aspect_ratio);
  const double e1 = std::log10(r15.inference_energy / r12.inference_energy);
  const double e2 = std::log10(r18.inference_energy / r15.inference_energy);
  out.push_back({"energy_scaling_exponent", std::abs(e1 - 1) <= 0.05 && std::abs(e2 - 1) <= 0.05,
                 "decade ratios " + num(e1) + ", " + num(e2)});
  out.push_back({"digital_time_constant", r12.digital_time == r18.digital_time, num(r12.digital_time)});
  const double dl = std::abs(r18.digital_energy / r12.digital_energy - 1e6) / 1e6;
  out.push_back({"digital_energy_linear", dl < 1e-12, "relative deviation " + num(dl)});

  bool geom = true, energy_max = true;
  for (const auto& r : reports) {
    const double v = r.geometry.side * r.geometry.side * r.geometry.length;
    geom = geom && std::abs(v - r.volume) <= 1e-6 * r.volume && r.geometry.guided_modes >= r.io_dimension &&
           r.geometry.side <= r.geometry.length;
    energy_max = energy_max && r.inference_energy == std::max(r.io_energy, r.pulse_energy);
  }
  out.push_back({"tube_geometry_postconditions", geom, std::to_string(reports.size()) + " reports"});
  out.push_back({"inference_energy_is_max", energy_max, ""});

  bool round_trip = true;
  try {
    const auto parsed = ordered_json::parse(emitted_json);
    ordered_json again;
    again["reports"] = ordered_json::array();
    for (const auto& r : parsed.at("reports")) again["reports"].push_back(report_json(report_from_json(r)));
    ordered_json original;
    original["reports"] = parsed.at("reports");
    round_trip = again.dump() == original.dump();
  } catch (const std::exception&) {
    round_trip = false;
  }
  out.push_back({"report_round_trip", round_trip, "parse then re-serialize scaling.json reports"});
  return out;
}

// ---- shared helpers -----------------------------------------------------------

std::vector<std::vector<double>> read_inputs(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("cannot open inputs file " + p.string());
  std::vector<std::vector<double>> rows;
  if (p.extension() == ".json") {
    try {
      const auto j = json::parse(in);
      rows = j.at("inputs").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
      throw FormatError("inputs " + p.string() + ": " + e.what());
    }
    return rows;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("inputs " + p.string() + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double max_abs_delta_n(const wave::PfmDesign& d) {
  double m = 0;
  for (double x : d.medium.delta_n()) m = std::max(m, std::abs(x));
  return m;
}

// Smallest witness over the first few validation inputs.
double min_witness(const wave::PfmDesign& d, const inverse::ToyDataset& ds, const wave::PropagationSettings& s) {
  double w = INFINITY;
  const std::size_t n = std::min<std::size_t>(4, ds.validation.size());
  for (std::size_t i = 0; i < n; ++i) w = std::min(w, wave::nonlinearity_witness(d, ds.inputs[ds.validation[i]], s));
  return w;
}

std::string sigma_tag(std::size_t i) {
  const std::string n = std::to_string(i);
  return "s" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

}  // namespace

// ---- commands -----------------------------------------------------------------

int cmd_scale(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto& sc = cfg.scale;
  std::vector<double> params = sc.params;
  if (!sc.sweep.empty()) params = parse_sweep(sc.sweep);
  if (!opts.sweep.empty()) params = parse_sweep(opts.sweep);
  if (!opts.params.empty()) params = opts.params;
  if (params.empty()) throw DomainError("scale: no parameter counts requested");

  std::vector<scaling::ScalingReport> reports;
  for (double p : params) reports.push_back(scaling::scaling_report(p, sc.constants, sc.aspect_ratio));

  ReportBundle b(opts.out, "scale", config_hash(cfg));
  b.write_json("config.json", to_json(cfg));

  ordered_json j;
  j["reports"] = ordered_json::array();
  for (const auto& r : reports) j["reports"].push_back(report_json(r));
  const auto& mw = sc.memory_wall;
  const auto wall = scaling::memory_wall(mw.param_count, mw.bits_per_param, mw.density, mw.bandwidth, mw.layer_thickness);
  j["memory_wall"] = {{"param_count", wall.param_count},
                      {"storage_area_m2", wall.storage_area},
                      {"stacked_volume_m3", wall.stacked_volume},
                      {"read_time_s", wall.read_time},
                      {"read_time_days", wall.read_time / 86400.0}};
  j["metasurface_capacity"] = scaling::metasurface_capacity(sc.metasurface.wafer_diameter, sc.metasurface.pixel_pitch);
  j["io_bandwidth_bytes_per_s"] =
      scaling::io_bandwidth(sc.io_bandwidth.dimension, sc.io_bandwidth.bits_per_element, sc.io_bandwidth.rate);
  j["critical_power_w"] = scaling::critical_power(sc.constants);
  const std::string emitted = j.dump(2) + "\n";
  b.write("scaling.json", emitted);

  std::string csv =
      "param_count,volume_m3,side_m,length_m,guided_modes,io_dimension,peak_power_w,pulse_energy_j,io_energy_j,"
      "inference_energy_j,propagation_delay_s,inference_time_s,inference_rate_hz,critical_power_ratio,"
      "digital_energy_j,digital_time_s,digital_cube_side_m\n";
  for (const auto& r : reports) {
    csv += num(r.param_count) + "," + num(r.volume) + "," + num(r.geometry.side) + "," + num(r.geometry.length) + "," +
           std::to_string(r.geometry.guided_modes) + "," + std::to_string(r.io_dimension) + "," + num(r.peak_power) +
           "," + num(r.pulse_energy) + "," + num(r.io_energy) + "," + num(r.inference_energy) + "," +
           num(r.propagation_delay) + "," + num(r.inference_time) + "," + num(r.inference_rate) + "," +
           num(r.critical_power_ratio) + "," + num(r.digital_energy) + "," + num(r.digital_time) + "," +
           num(r.digital_cube_side) + "\n";
  }
  b.write("scaling.csv", csv);
  const std::string table = scaling::render_table(reports);
  b.write("table.txt", table);
  log << table;

  bool ok = true;
  if (opts.check) {
    const auto checks = scaling_checks(sc, reports, emitted);
    b.write_json("checks.json", checks_json(checks));
    ok = all_passed(checks);
  }
  b.set_provenance(base_provenance(cfg));
  b.finalize(ok);
  return ok ? kOk : kCheckFailed;
}

int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto& sc = cfg.simulate;
  if (sc.design.empty()) throw DomainError("simulate: config needs a design path");
  if (sc.inputs.empty()) throw DomainError("simulate: config needs an inputs path");
  const auto file = wave::load_design(sc.design);
  const auto& d = file.design;
  const auto inputs = read_inputs(sc.inputs);
  for (const auto& v : inputs) {
    if (v.size() != d.input_dim()) {
      throw DomainError("simulate: input vector has " + std::to_string(v.size()) + " entries, design expects " +
                        std::to_string(d.input_dim()));
    }
  }

  ReportBundle b(opts.out, "simulate", config_hash(cfg));
  b.write_json("config.json", to_json(cfg));
  const wave::Propagator p(d.medium, sc.propagation, d.wavelength_vacuum);
  std::string csv = "index";
  for (std::size_t k = 0; k < d.output_dim(); ++k) csv += ",bin_" + std::to_string(k);
  csv += "\n";
  ordered_json diag = ordered_json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = wave::encode_input(inputs[i], d);
    const double p_in = f.power();
    p.forward(f.amplitude);
    const double p_out = f.power();
    const auto r = wave::readout(f, d);
    csv += std::to_string(i);
    for (double x : r) csv += "," + num(x);
    csv += "\n";
    diag.push_back({{"index", i},
                    {"input_power_w", p_in},
                    {"output_power_w", p_out},
                    {"detected_power_w", std::accumulate(r.begin(), r.end(), 0.0)}});
    if (sc.export_fields) {
      const std::string stem = "fields/output_" + std::to_string(i);
      fs::create_directories(b.path("fields"));
      wave::save_field(b.path(stem), f);
      b.add_existing(stem + ".field.bin");
      b.add_existing(stem + ".field.json");
    }
  }
  b.write("outputs.csv", csv);

  bool ok = true;
  ordered_json diagnostics;
  diagnostics["design_sha256"] = wave::design_hash(d);
  diagnostics["per_input"] = diag;
  if (opts.check) {
    // Conservation suite: gain 1, periodic boundary, kerr as configured.
    auto settings = sc.propagation;
    settings.boundary = wave::Boundary::periodic;
    auto medium = d.medium;
    medium.set_gain_per_step(1.0);
    const wave::Propagator pc(medium, settings, d.wavelength_vacuum);
    double worst = 0;
    for (const auto& v : inputs) {
      auto f = wave::encode_input(v, d);
      const double p_in = f.power();
      if (p_in == 0) continue;
      pc.forward(f.amplitude);
      worst = std::max(worst, std::abs(f.power() - p_in) / p_in);
    }
    ok = worst <= 1e-9;
    diagnostics["conservation_check"] = {{"max_relative_power_error", worst}, {"tolerance", 1e-9}, {"passed", ok}};
    log << "max relative power error " << worst << (ok ? " (pass)\n" : " (FAIL)\n");
  }
  b.write_json("diagnostics.json", diagnostics);
  auto prov = base_provenance(cfg);
  prov["design_sha256"] = wave::design_hash(d);
  b.set_provenance(prov);
  b.finalize(ok);
  return ok ? kOk : kCheckFailed;
}

int cmd_train(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  auto tc = cfg.train;
  if (opts.seed) {
    tc.training.seed = *opts.seed;
    tc.layout.seed = *opts.seed;
  }
  const wave::PfmDesign start = tc.design ? wave::load_design(*tc.design).design : wave::make_design(tc.layout);
  const auto ds = inverse::make_toy_dataset(tc.dataset);

  ReportBundle b(opts.out, "train", config_hash(cfg));
  b.write_json("config.json", to_json(cfg));
  const auto result = inverse::train(start, ds, tc.training, tc.propagation);
  auto prov = base_provenance(cfg);
  prov["dataset_seed"] = tc.dataset.seed;
  prov["training_seed"] = tc.training.seed;
  prov["initial_design_sha256"] = wave::design_hash(start);
  prov["best_step"] = result.best_step;
  prov["best_validation_accuracy"] = result.best_val_accuracy;
  wave::save_design(b.path("design.pfm"), result.design, prov);
  b.add_existing("design.pfm");
  b.write("history.csv", result.history.to_csv(), true);

  ordered_json summary;
  summary["design_sha256"] = wave::design_hash(result.design);
  summary["steps"] = tc.training.steps;
  summary["best_step"] = result.best_step;
  summary["best_validation_accuracy"] = result.best_val_accuracy;
  summary["final_train_loss"] = result.history.size() ? result.history.loss.back() : NAN;
  summary["max_abs_delta_n"] = max_abs_delta_n(result.design);
  bool ok = true;
  if (opts.check) {
    std::vector<Check> checks;
    const double m = max_abs_delta_n(result.design);
    checks.push_back({"projection", m <= result.design.medium.delta_n_max(), "max |dn| " + num(m)});
    if (tc.propagation.kerr_enabled) {
      const double w = min_witness(result.design, ds, tc.propagation);
      checks.push_back({"nonlinearity_witness", w > 1e-3, "min relative departure " + num(w)});
    }
    summary["checks"] = checks_json(checks);
    ok = all_passed(checks);
  }
  b.write_json("summary.json", summary);
  b.set_provenance(prov);
  b.finalize(ok);
  log << "best validation accuracy " << result.best_val_accuracy << " at step " << result.best_step << "\n";
  return ok ? kOk : kCheckFailed;
}

int cmd_perturb(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  auto pc = cfg.perturb;
  if (opts.seed) pc.perturbation.seed = *opts.seed;
  if (pc.design.empty()) throw DomainError("perturb: config needs a design path");
  const auto file = wave::load_design(pc.design);
  const auto& d = file.design;
  const std::string base_hash = wave::design_hash(d);
  const auto ds = inverse::make_toy_dataset(pc.dataset);
  const double scale = pc.finetune_training.logit_scale;
  const std::vector<double> sigmas = pc.sigmas.empty() ? std::vector<double>{pc.perturbation.sigma} : pc.sigmas;
  const std::vector<std::uint64_t> seeds =
      pc.seeds.empty() ? std::vector<std::uint64_t>{pc.perturbation.seed} : pc.seeds;

  ReportBundle b(opts.out, "perturb", config_hash(cfg));
  b.write_json("config.json", to_json(cfg));
  const auto baseline = variability::evaluate(d, ds, nullptr, pc.propagation, scale);
  std::string csv = "sigma,dead_rate,seed,variant,accuracy,loss\n";
  auto row = [&](double sigma, std::uint64_t seed, const char* variant, const inverse::Metrics& m) {
    csv += num(sigma) + "," + num(pc.perturbation.dead_voxel_rate) + "," + std::to_string(seed) + "," + variant + "," +
           num(m.accuracy) + "," + num(m.loss) + "\n";
  };
  std::vector<Check> checks;
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> acc;
  ordered_json designs = ordered_json::array();

  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    for (std::uint64_t seed : seeds) {
      auto spec = pc.perturbation;
      spec.sigma = sigmas[si];
      spec.seed = seed;
      const auto pd = variability::perturb(d, spec);
      const std::string hash = wave::design_hash(pd);
      const std::string name = "designs/perturbed_" + sigma_tag(si) + "_seed" + std::to_string(seed) + ".pfm";
      fs::create_directories(b.path("designs"));
      auto prov = base_provenance(cfg);
      prov["base_design_sha256"] = base_hash;
      prov["perturbation"] = {{"sigma", spec.sigma},
                              {"correlation_length_voxels", spec.correlation_length},
                              {"dead_voxel_rate", spec.dead_voxel_rate},
                              {"seed", spec.seed}};
      wave::save_design(b.path(name), pd, prov);
      b.add_existing(name);
      designs.push_back({{"path", name}, {"sigma", spec.sigma}, {"seed", seed}, {"design_sha256", hash}});

      const auto raw = variability::evaluate(pd, ds, nullptr, pc.propagation, scale);
      row(spec.sigma, seed, "raw", raw);
      acc[{si, "raw"}].push_back(raw.accuracy);
      if (spec.sigma == 0 && spec.dead_voxel_rate == 0) {
        checks.push_back({"sigma_zero_noop", hash == base_hash && raw == baseline, "seed " + std::to_string(seed)});
      }
      if (pc.compensate) {
        for (auto kind : {compensation::CompensationKind::pre_post, compensation::CompensationKind::post_only}) {
          auto cc = pc.compensation;
          cc.kind = kind;
          cc.seed = pc.compensation.seed + seed;
          const auto stack = compensation::fit_compensation(pd, ds, cc, pc.propagation);
          const auto m = variability::evaluate(pd, ds, &stack, pc.propagation, cc.logit_scale);
          const std::string variant =
              kind == compensation::CompensationKind::pre_post ? "compensated" : "compensated_post_only";
          row(spec.sigma, seed, variant.c_str(), m);
          acc[{si, variant}].push_back(m.accuracy);
          const std::string sname = "compensation/" + variant + "_" + sigma_tag(si) + "_seed" + std::to_string(seed) + ".json";
          b.write_json(sname, stack.to_json());
          checks.push_back({"compensation_leaves_design", wave::design_hash(pd) == hash, sname});
        }
      }
      if (pc.finetune) {
        const auto mask = variability::make_mask(d.medium.shape(), pc.mask_fraction, seed);
        auto tcfg = pc.finetune_training;
        tcfg.seed = pc.finetune_training.seed + seed;
        const auto ft = variability::finetune_reprogrammable(pd, mask, ds, tcfg, pc.propagation);
        const auto m = variability::evaluate(ft, ds, nullptr, pc.propagation, scale);
        row(spec.sigma, seed, "finetuned", m);
        acc[{si, "finetuned"}].push_back(m.accuracy);
        bool frozen = true;
        for (std::size_t v = 0; v < mask.total(); ++v) {
          if (!mask.flags[v] && ft.medium.delta_n()[v] != pd.medium.delta_n()[v]) frozen = false;
        }
        checks.push_back({"finetune_frozen_voxels", frozen, "seed " + std::to_string(seed)});
      }
      log << "sigma " << spec.sigma << " seed " << seed << ": raw accuracy " << raw.accuracy << "\n";
    }
  }
  b.write("sweep.csv", csv);

  ordered_json summary;
  summary["base_design_sha256"] = base_hash;
  summary["baseline"] = {{"accuracy", baseline.accuracy}, {"loss", baseline.loss}};
  summary["designs"] = designs;
  ordered_json means = ordered_json::array();
  for (const auto& [key, values] : acc) {
    double s = 0;
    for (double v : values) s += v;
    means.push_back({{"sigma", sigmas[key.first]},
                     {"variant", key.second},
                     {"seeds", values.size()},
                     {"mean_accuracy", s / static_cast<double>(values.size())}});
  }
  summary["seed_averaged"] = means;
  summary["checks"] = checks_json(checks);
  b.write_json("summary.json", summary);
  const bool ok = all_passed(checks);
  auto prov = base_provenance(cfg);
  prov["base_design_sha256"] = base_hash;
  prov["dataset_seed"] = pc.dataset.seed;
  b.set_provenance(prov);
  b.finalize(ok);
  return ok ? kOk : kCheckFailed;
}

int cmd_ensemble(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  auto ec = cfg.ensemble;
  if (opts.seed) {
    ec.perturbation.seed = *opts.seed;
    ec.router_training.seed = *opts.seed;
    ec.finetune_training.seed = *opts.seed;
  }
  const wave::PfmDesign base = ec.design ? wave::load_design(*ec.design).design : wave::make_design(ec.layout);
  const auto ds = inverse::make_toy_dataset(ec.dataset);

  ReportBundle b(opts.out, "ensemble", config_hash(cfg));
  b.write_json("config.json", to_json(cfg));
  const auto pool = [&] {
    if (ec.mode == "spawn") return ensemble::spawn_ensemble(base, ec.experts, ec.perturbation);
    ensemble::SpecialistSpec spec;
    spec.class_subsets = ec.class_subsets;
    spec.perturbation = ec.perturbation;
    spec.mask_fraction = ec.mask_fraction;
    spec.finetune = ec.finetune_training;
    return ensemble::specialist_pool(base, ds, spec, ec.propagation);
  }();
  const auto features = ensemble::expert_features(pool, ds, ec.propagation);
  const auto router = ensemble::train_router(pool, ds, features, ec.router_training, ec.top_k);
  pool.verify_unchanged();
  const auto m = ensemble::evaluate_ensemble(pool, router, ds, features, ec.router_training.logit_scale);

  std::vector<std::string> paths;
  fs::create_directories(b.path("experts"));
  for (std::size_t e = 0; e < pool.size(); ++e) {
    const std::string name = "experts/expert_" + std::to_string(e) + ".pfm";
    wave::save_design(b.path(name), pool.expert(e), {{"base_design_sha256", pool.base_hash()}, {"seed", pool.seeds()[e]}});
    b.add_existing(name);
    paths.push_back(name);
  }
  b.write_json("pool.json", pool.manifest(paths));
  b.write("router.bin", router.encode());

  std::string csv = "expert,utilization,expert_accuracy\n";
  for (std::size_t e = 0; e < pool.size(); ++e) {
    csv += std::to_string(e) + "," + num(m.utilization[e]) + "," + num(m.expert_accuracy[e]) + "\n";
  }
  b.write("utilization.csv", csv);

  const double best_expert = *std::max_element(m.expert_accuracy.begin(), m.expert_accuracy.end());
  ordered_json summary;
  summary["mode"] = ec.mode;
  summary["experts"] = pool.size();
  summary["accuracy"] = m.accuracy;
  summary["loss"] = m.loss;
  summary["expert_accuracy"] = m.expert_accuracy;
  summary["best_single_expert_accuracy"] = best_expert;
  summary["utilization"] = m.utilization;
  summary["class_routing"] = m.class_routing;
  summary["router_diverged"] = router.diverged;

  bool ok = true;
  if (opts.check) {
    std::vector<Check> checks;
    double total = 0;
    for (double u : m.utilization) total += u;
    checks.push_back({"utilization_sums_to_one", std::abs(total - 1) <= 1e-9, num(total)});
    bool simplex = true;
    for (std::size_t i : ds.validation) {
      const auto w = router.weights(ds.inputs[i]);
      double s = 0;
      for (double x : w) {
        simplex = simplex && x >= 0;
        s += x;
      }
      simplex = simplex && std::abs(s - 1) <= 1e-12;
    }
    checks.push_back({"router_simplex", simplex, ""});
    bool frozen = true;
    try {
      pool.verify_unchanged();
    } catch (const Error&) {
      frozen = false;
    }
    checks.push_back({"experts_frozen", frozen, ""});
    checks.push_back({"ensemble_dominance", m.accuracy >= best_expert,
                      "ensemble " + num(m.accuracy) + " vs best expert " + num(best_expert)});
    summary["checks"] = checks_json(checks);
    ok = all_passed(checks);
  }
  b.write_json("ensemble.json", summary);
  auto prov = base_provenance(cfg);
  prov["base_design_sha256"] = pool.base_hash();
  prov["dataset_seed"] = ec.dataset.seed;
  b.set_provenance(prov);
  b.finalize(ok);
  log << "ensemble accuracy " << m.accuracy << ", best single expert " << best_expert << "\n";
  return ok ? kOk : kCheckFailed;
}

int run_cli(int argc, char** argv) {
  if (const char* t = std::getenv("PFM_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }
  CLI::App app{"Physical foundation model design engine and desk-scale simulator", "pfm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  std::string config_path;
  CommandOptions opts;
  std::uint64_t seed = 0;
  std::string params_list;

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, const CommandOptions&, std::ostream&);
  };
  const Sub subs[] = {
      {"scale", "Scaling report and table for parameter counts", cmd_scale},
      {"simulate", "Run inference through a design file", cmd_simulate},
      {"train", "Inverse-design a medium on the toy task", cmd_train},
      {"perturb", "Fabrication variability, compensation and fine-tuning", cmd_perturb},
      {"ensemble", "Expert pool and router training", cmd_ensemble},
  };
  std::map<std::string, CLI::App*> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the command's seed");
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
    sub->add_flag("--check", opts.check, "Run the command's invariant checks");
    if (std::string(s.name) == "scale") {
      sub->add_option("--params", params_list, "Comma-separated parameter counts, e.g. 1e12,1e15");
      sub->add_option("--sweep", opts.sweep, "Geometric sweep A:B:xK, e.g. 1e9:1e21:10x");
    }
    apps[s.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  for (const auto& s : subs) {
    if (!apps[s.name]->parsed()) continue;
    try {
      if (apps[s.name]->count("--seed")) opts.seed = seed;
      if (!params_list.empty()) {
        std::stringstream ss(params_list);
        for (std::string p; std::getline(ss, p, ',');) {
          std::size_t used = 0;
          double v = 0;
          try {
            v = std::stod(p, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used == 0 || used != p.size()) throw DomainError("--params: bad number '" + p + "'");
          opts.params.push_back(v);
        }
      }
      RunConfig cfg;
      try {
        cfg = config_path.empty() ? default_run_config(s.name) : load_run_config(config_path, s.name);
      } catch (const std::exception& e) {
        std::cerr << "pfm: config: " << e.what() << "\n";
        return kUsage;
      }
      return s.fn(cfg, opts, std::cout);
    } catch (const LockError& e) {
      std::cerr << "pfm: " << e.what() << "\n";
      return kLocked;
    } catch (const FormatError& e) {
      std::cerr << "pfm: " << e.what() << "\n";
      return kFormat;
    } catch (const inverse::TrainingDiverged& e) {
      std::cerr << "pfm: " << e.what() << "\n";
      return kTrainingFailed;
    } catch (const StabilityError& e) {
      std::cerr << "pfm: " << e.what() << "\n";
      return kTrainingFailed;
    } catch (const Error& e) {
      std::cerr << "pfm: " << e.what() << "\n";
      return kDomain;
    } catch (const std::exception& e) {
      std::cerr << "pfm: " << e.what() << "\n";
      return kUsage;
    }
  }
  return kUsage;
}

}  // namespace pfm::cli
