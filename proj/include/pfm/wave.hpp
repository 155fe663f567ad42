#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "pfm/design.hpp"
#include "pfm/propagator.hpp"

namespace pfm::wave {

// Input facet field for vector v. Amplitude mode puts sqrt(P/A_i) * v_i on
// region i (A_i its area, P the design's peak_power_scale), so a unit-norm v
// carries total power P; phase mode puts a uniform amplitude carrying P over
// all regions with phase v_i wrapped into [0, 2 pi).
OpticalField encode_input(std::span<const double> v, const PfmDesign& d);

// d(loss)/dv from the adjoint field at the input facet.
std::vector<double> encode_input_gradient(std::span<const double> v, const PfmDesign& d,
                                          std::span<const Complex> lambda_in);

OpticalField propagate(const OpticalField& f, const VoxelMedium& m, const PropagationSettings& s);

// Detector vector for the design's readout mode, calibration applied.
std::vector<double> readout(const OpticalField& f, const PfmDesign& d);

// Adjoint seed for readout: writes lambda = 2 dL/d(conj u) given dL/d(readout).
void readout_adjoint(std::span<const Complex> field, const PfmDesign& d, std::span<const double> d_readout,
                     std::span<Complex> lambda);

// readout(propagate(encode_input(v))).
std::vector<double> infer(const PfmDesign& d, std::span<const double> v, const PropagationSettings& s);

// As infer, reusing a propagator built for d.medium.
std::vector<double> infer(const PfmDesign& d, const Propagator& p, std::span<const double> v);

// Departure from the quadratic scaling of a linear device read out in
// intensity: max_b |infer(alpha v)_b - alpha^2 infer(v)_b| / max_b |alpha^2 infer(v)_b|.
// Zero (to round-off) with kerr off; the design operates nonlinearly when it
// clearly exceeds 1e-3.
double nonlinearity_witness(const PfmDesign& d, std::span<const double> v, const PropagationSettings& s,
                            double alpha = 2.0);

// Complex mode amplitudes on the output bins, c_b = sum_bin u dA / sqrt(A_b).
// With unit-power region modes this is the field-level map of the device.
Eigen::VectorXcd bin_amplitudes(const OpticalField& f, const PfmDesign& d);
Eigen::VectorXcd field_map(const PfmDesign& d, std::span<const double> v, const PropagationSettings& s);

// Column j is the output bin amplitudes for a unit-power uniform excitation of
// input region j. Requires kerr disabled.
Eigen::MatrixXcd extract_linear_matrix(const PfmDesign& d, const PropagationSettings& s);

}  // namespace pfm::wave
