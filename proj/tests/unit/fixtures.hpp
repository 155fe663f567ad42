#pragma once

#include "pfm/dataset.hpp"
#include "pfm/design.hpp"
#include "pfm/train.hpp"

namespace pfm::test {

inline wave::DesignLayout reduced_layout(std::uint64_t seed = 1) {
  wave::DesignLayout l;
  l.shape = {24, 24, 32};
  l.input_gap = 1;
  l.output_gap = 2;
  l.init_sigma = 0.01;
  l.seed = seed;
  l.peak_power_scale = 3e7;
  return l;
}

inline wave::PropagationSettings kerr_on() {
  wave::PropagationSettings s;
  s.kerr_enabled = true;
  return s;
}

inline const inverse::ToyDataset& toy() {
  static const auto ds = inverse::make_toy_dataset({});
  return ds;
}

// Reduced-grid design trained once per process.
inline const inverse::TrainResult& trained_reduced() {
  static const auto r = [] {
    inverse::TrainConfig cfg;
    cfg.steps = 60;
    cfg.eval_every = 5;
    return inverse::train(wave::make_design(reduced_layout()), toy(), cfg, kerr_on());
  }();
  return r;
}

}  // namespace pfm::test
