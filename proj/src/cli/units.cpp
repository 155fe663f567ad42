#include "pfm/cli/units.hpp"

#include <charconv>
#include <cmath>
#include <utility>
#include <vector>

#include "pfm/error.hpp"

namespace pfm::cli {
namespace {

struct Symbol {
  std::string_view name;
  Dimension dim;
  double scale;
};

constexpr Symbol kSymbols[] = {
    {"m", dim::length, 1.0},   {"g", {{0, 1, 0, 0}}, 1e-3}, {"s", dim::time, 1.0},
    {"W", dim::power, 1.0},    {"J", dim::energy, 1.0},     {"Hz", dim::frequency, 1.0},
    {"bit", dim::information, 1.0}, {"B", dim::information, 8.0},
};

constexpr std::pair<std::string_view, double> kPrefixes[] = {
    {"P", 1e15}, {"T", 1e12}, {"G", 1e9}, {"M", 1e6}, {"k", 1e3}, {"c", 1e-2},
    {"m", 1e-3}, {"u", 1e-6}, {"µ", 1e-6}, {"n", 1e-9}, {"p", 1e-12}, {"f", 1e-15},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

bool match_symbol(std::string_view t, Dimension& d, double& scale) {
  for (const auto& sym : kSymbols) {
    if (t == sym.name) {
      d = sym.dim;
      scale = sym.scale;
      return true;
    }
  }
  return false;
}

// One factor, e.g. "mm^2", "cm³", "GB".
void parse_factor(std::string_view f, int sign, Dimension& d, double& scale, std::string_view whole) {
  int power = 1;
  if (auto caret = f.find('^'); caret != std::string_view::npos) {
    const auto e = f.substr(caret + 1);
    if (std::from_chars(e.data(), e.data() + e.size(), power).ec != std::errc{}) {
      throw DomainError("bad exponent in unit '" + std::string(whole) + "'");
    }
    f = f.substr(0, caret);
  } else if (f.ends_with("²")) {
    power = 2;
    f.remove_suffix(std::string_view("²").size());
  } else if (f.ends_with("³")) {
    power = 3;
    f.remove_suffix(std::string_view("³").size());
  }
  Dimension fd;
  double fs = 1;
  bool ok = match_symbol(f, fd, fs);
  if (!ok) {
    for (const auto& [p, v] : kPrefixes) {
      if (f.size() > p.size() && f.starts_with(p) && match_symbol(f.substr(p.size()), fd, fs)) {
        fs *= v;
        ok = true;
        break;
      }
    }
  }
  if (!ok) throw DomainError("unknown unit '" + std::string(f) + "' in '" + std::string(whole) + "'");
  for (int i = 0; i < 4; ++i) d.exp[i] += sign * power * fd.exp[i];
  scale *= std::pow(fs, sign * power);
}

void parse_product(std::string_view s, int sign, Dimension& d, double& scale, std::string_view whole) {
  while (!s.empty()) {
    std::size_t cut = s.size(), skip = 0;
    if (auto a = s.find('*'); a != std::string_view::npos && a < cut) cut = a, skip = 1;
    if (auto b = s.find("·"); b != std::string_view::npos && b < cut) cut = b, skip = std::string_view("·").size();
    const auto f = trim(s.substr(0, cut));
    if (f.empty()) throw DomainError("empty unit factor in '" + std::string(whole) + "'");
    parse_factor(f, sign, d, scale, whole);
    s = cut == s.size() ? std::string_view{} : s.substr(cut + skip);
  }
}

}  // namespace

std::string to_string(Dimension d) {
  static constexpr const char* names[] = {"m", "kg", "s", "bit"};
  std::string out;
  for (int i = 0; i < 4; ++i) {
    if (d.exp[i] == 0) continue;
    if (!out.empty()) out += '*';
    out += names[i];
    if (d.exp[i] != 1) out += "^" + std::to_string(d.exp[i]);
  }
  return out.empty() ? "1" : out;
}

double parse_quantity(std::string_view text, Dimension expected) {
  const auto t = trim(text);
  const auto space = t.find(' ');
  const auto num = t.substr(0, space);
  double value = 0;
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
  if (ec != std::errc{} || ptr != num.data() + num.size() || !std::isfinite(value)) {
    throw DomainError("malformed quantity '" + std::string(text) + "'");
  }
  Dimension d;
  double scale = 1;
  if (space != std::string_view::npos) {
    const auto unit = trim(t.substr(space + 1));
    const auto slash = unit.find('/');
    parse_product(trim(unit.substr(0, slash)), +1, d, scale, text);
    if (slash != std::string_view::npos) {
      const auto den = trim(unit.substr(slash + 1));
      if (den.find('/') != std::string_view::npos) throw DomainError("more than one '/' in '" + std::string(text) + "'");
      parse_product(den, -1, d, scale, text);
    }
  }
  if (!(d == expected)) {
    throw DomainError("quantity '" + std::string(text) + "' has dimension " + to_string(d) + ", expected " +
                      to_string(expected));
  }
  return value * scale;
}

std::string format_quantity(double v, Dimension d) {
  char buf[64];
  std::string out(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  if (d == dim::none) return out;
  static const std::pair<Dimension, const char*> preferred[] = {
      {dim::power, "W"},         {dim::energy, "J"},        {dim::frequency, "Hz"},
      {dim::nonlinear_index, "m^2/W"}, {dim::bit_rate, "bit/s"}, {dim::bit_density, "bit/m^2"},
  };
  for (const auto& [pd, sym] : preferred) {
    if (pd == d) return out + " " + sym;
  }
  // Compose the unit from SI symbols so parse_quantity reproduces v exactly.
  std::vector<std::string> num, den;
  static constexpr const char* names[] = {"m", "kg", "s", "bit"};
  for (int i = 0; i < 4; ++i) {
    const int e = d.exp[i];
    if (e == 0) continue;
    std::string f = names[i];
    if (std::abs(e) != 1) f += "^" + std::to_string(std::abs(e));
    (e > 0 ? num : den).push_back(f);
  }
  out += ' ';
  if (num.empty()) {
    // Nothing in the numerator: write s^-1 style exponents instead of "1/s".
    for (std::size_t i = 0; i < 4; ++i) {
      if (d.exp[i] == 0) continue;
      if (out.back() != ' ') out += '*';
      out += std::string(names[i]) + "^" + std::to_string(d.exp[i]);
    }
    return out;
  }
  for (std::size_t i = 0; i < num.size(); ++i) out += (i ? "*" : "") + num[i];
  if (!den.empty()) {
    out += '/';
    for (std::size_t i = 0; i < den.size(); ++i) out += (i ? "*" : "") + den[i];
  }
  return out;
}

}  // namespace pfm::cli
