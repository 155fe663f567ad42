#include "pfm/table_format.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <utility>

#include "pfm/error.hpp"

namespace pfm::scaling {
namespace {

// Tolerates round-off just above an exact power of ten (1e12 * 1e-12).
constexpr double kLogSlack = 1e-9;

void require_positive(double x) {
  if (!(x > 0) || !std::isfinite(x)) throw DomainError("rounding requires a finite positive value");
}

// Fixed notation with just enough decimals for `sig_digits`; 100 stays "100".
std::string trim_number(double v, int sig_digits) {
  const int mag = v == 0 ? 0 : static_cast<int>(std::floor(std::log10(std::abs(v)) + kLogSlack));
  std::ostringstream os;
  os << std::fixed << std::setprecision(std::max(0, sig_digits - 1 - mag)) << v;
  return os.str();
}

// Pads to a display width, counting UTF-8 code points rather than bytes.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n >= width ? s + " " : s + std::string(width - n, ' ');
}

struct Prefix {
  double scale;
  const char* symbol;
};

constexpr std::array<Prefix, 9> kPrefixes{{{1e12, "T"},
                                           {1e9, "G"},
                                           {1e6, "M"},
                                           {1e3, "k"},
                                           {1.0, ""},
                                           {1e-3, "m"},
                                           {1e-6, "µ"},
                                           {1e-9, "n"},
                                           {1e-12, "p"}}};

constexpr std::array<Prefix, 6> kLengthUnits{{{1e3, "km"},
                                              {1.0, "m"},
                                              {1e-2, "cm"},
                                              {1e-3, "mm"},
                                              {1e-6, "µm"},
                                              {1e-9, "nm"}}};

template <std::size_t N>
std::pair<double, const char*> pick_unit(double value, const std::array<Prefix, N>& table) {
  for (const auto& p : table) {
    if (value / p.scale >= 1.0 - kLogSlack) return {value / p.scale, p.symbol};
  }
  return {value / table.back().scale, table.back().symbol};
}

}  // namespace

double round_up_pow10(double x) {
  require_positive(x);
  return std::pow(10.0, std::ceil(std::log10(x) - kLogSlack));
}

double round_down_pow10(double x) {
  require_positive(x);
  return std::pow(10.0, std::floor(std::log10(x) + kLogSlack));
}

double round_nearest_pow10(double x) {
  require_positive(x);
  return std::pow(10.0, std::round(std::log10(x)));
}

double round_sig(double x, int digits) {
  if (x == 0) return 0;
  const double e = std::floor(std::log10(std::abs(x)) + kLogSlack);
  const double q = std::pow(10.0, e - digits + 1);
  return std::round(x / q) * q;
}

std::string format_si(double value, const std::string& unit, int sig_digits) {
  if (value == 0) return "0 " + unit;
  const auto [mantissa, prefix] = pick_unit(value, kPrefixes);
  return trim_number(round_sig(mantissa, sig_digits), sig_digits) + " " + prefix + unit;
}

std::string format_length(double meters, int sig_digits) {
  const auto [mantissa, unit] = pick_unit(meters, kLengthUnits);
  return trim_number(round_sig(mantissa, sig_digits), sig_digits) + " " + unit;
}

TableCells table_cells(const ScalingReport& r) {
  TableCells t;
  t.optical_size = "(" + format_length(round_nearest_pow10(r.geometry.side), 1) + ")² × " +
                   format_length(round_nearest_pow10(r.geometry.length), 1);
  t.optical_energy = format_si(round_up_pow10(r.inference_energy), "J", 1);
  t.optical_time = format_si(1.0 / round_down_pow10(r.inference_rate), "s", 1);
  t.digital_size = "(" + format_length(r.digital_cube_side, 2) + ")³";
  t.digital_energy = format_si(r.digital_energy, "J", 1);

  // Two significant figures with the second one snapped to 0 or 5.
  const auto [mantissa, prefix] = pick_unit(r.digital_time, kPrefixes);
  const double step = 5.0 * std::pow(10.0, std::floor(std::log10(mantissa) + kLogSlack) - 1);
  t.digital_time = trim_number(std::round(mantissa / step) * step, 2) + " " + prefix + "s";
  return t;
}

std::string render_table(const std::vector<ScalingReport>& reports) {
  std::vector<TableCells> cells;
  cells.reserve(reports.size());
  for (const auto& r : reports) cells.push_back(table_cells(r));

  const std::size_t label_w = 32;
  const std::size_t col_w = 24;
  std::ostringstream os;
  auto emit = [&](const std::string& label, const std::vector<std::string>& values) {
    std::string line = pad(label, label_w);
    for (const auto& v : values) line += pad(v, col_w);
    line.erase(line.find_last_not_of(' ') + 1);
    os << line << '\n';
  };
  auto row = [&](const std::string& label, auto field) {
    std::vector<std::string> values;
    for (const auto& c : cells) values.push_back("~" + c.*field);
    emit(label, values);
  };
  std::vector<std::string> heads;
  for (const auto& r : reports) {
    std::ostringstream p;
    p << "P=" << std::setprecision(3) << r.param_count;
    heads.push_back(p.str());
  }
  emit("Metric", heads);
  row("Optical PFM  Size (Volume)", &TableCells::optical_size);
  row("Optical PFM  Energy/Inference", &TableCells::optical_energy);
  row("Optical PFM  Time/Inference", &TableCells::optical_time);
  row("Digital ref. Size (Volume)", &TableCells::digital_size);
  row("Digital ref. Energy/Inference", &TableCells::digital_energy);
  row("Digital ref. Time/Inference", &TableCells::digital_time);
  return os.str();
}

}  // namespace pfm::scaling
