#pragma once

#include <array>
#include <string>
#include <string_view>

namespace pfm::cli {

// Exponents of (metre, kilogram, second, bit).
struct Dimension {
  std::array<int, 4> exp{};
  bool operator==(const Dimension&) const = default;
};

namespace dim {
inline constexpr Dimension none{{0, 0, 0, 0}};
inline constexpr Dimension length{{1, 0, 0, 0}};
inline constexpr Dimension area{{2, 0, 0, 0}};
inline constexpr Dimension volume{{3, 0, 0, 0}};
inline constexpr Dimension time{{0, 0, 1, 0}};
inline constexpr Dimension frequency{{0, 0, -1, 0}};
inline constexpr Dimension power{{2, 1, -3, 0}};
inline constexpr Dimension energy{{2, 1, -2, 0}};
inline constexpr Dimension nonlinear_index{{0, -1, 3, 0}};  // m^2/W
inline constexpr Dimension information{{0, 0, 0, 1}};
inline constexpr Dimension bit_rate{{0, 0, -1, 1}};
inline constexpr Dimension bit_density{{-2, 0, 0, 1}};
}  // namespace dim

// Parses "<number> <unit>" such as "1550 nm", "1e-20 m^2/W", "8 TB/s",
// "30 Gbit/mm^2" into SI (bytes count as 8 bit). The unit grammar is
// factors [prefix]symbol[^k | ² | ³] joined by '*' or '·' with at most one
// '/'. Throws DomainError if the text is malformed or its dimension is not
// `expected`.
double parse_quantity(std::string_view text, Dimension expected);

// Canonical SI rendering parse_quantity reads back to the same double.
std::string format_quantity(double si_value, Dimension d);

std::string to_string(Dimension d);

}  // namespace pfm::cli
