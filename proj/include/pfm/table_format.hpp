#pragma once

// Order-of-magnitude renderings of a ScalingReport in the layout of the
// optical-vs-digital comparison table. Rounding rules:
//   optical tube side/length  nearest power of ten
//   optical energy            up to the next power of ten
//   optical time              1 / (rate rounded down to a power of ten)
//   digital energy            one significant figure
//   digital time              two significant figures, last digit 0 or 5
//   digital cube side         two significant figures

#include <string>
#include <vector>

#include "pfm/scaling.hpp"

namespace pfm::scaling {

double round_up_pow10(double x);
double round_down_pow10(double x);
double round_nearest_pow10(double x);
double round_sig(double x, int digits);

// SI-prefixed value, e.g. format_si(1e-4, "J", 3) -> "100 µJ". The prefix is
// the largest one leaving a mantissa >= 1.
std::string format_si(double value, const std::string& unit, int sig_digits);

// Length in {nm, µm, mm, cm, m, km}.
std::string format_length(double meters, int sig_digits);

struct TableCells {
  std::string optical_size;
  std::string optical_energy;
  std::string optical_time;
  std::string digital_size;
  std::string digital_energy;
  std::string digital_time;
};

TableCells table_cells(const ScalingReport& r);

// Plain-text table with one column per report.
std::string render_table(const std::vector<ScalingReport>& reports);

}  // namespace pfm::scaling
