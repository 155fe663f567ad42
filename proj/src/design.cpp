#include "pfm/design.hpp"

#include <cmath>

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

namespace pfm::wave {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;

void check_regions(const std::vector<Region>& regions, const GridShape& shape, const char* what) {
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& r = regions[i];
    if (r.width == 0 || r.height == 0 || r.x0 + r.width > shape.nx || r.y0 + r.height > shape.ny) {
      throw DomainError(std::string("design: ") + what + " region " + std::to_string(i) + " lies outside the grid");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const Region& q = regions[j];
      const bool overlap = r.x0 < q.x0 + q.width && q.x0 < r.x0 + r.width && r.y0 < q.y0 + q.height &&
                           q.y0 < r.y0 + r.height;
      if (overlap) {
        throw DomainError(std::string("design: ") + what + " regions " + std::to_string(j) + " and " +
                          std::to_string(i) + " overlap");
      }
    }
  }
}

}  // namespace

const char* to_string(Encoding e) { return e == Encoding::amplitude ? "amplitude" : "phase"; }
const char* to_string(ReadoutMode m) { return m == ReadoutMode::intensity ? "intensity" : "homodyne"; }

Encoding encoding_from_string(const std::string& s) {
  if (s == "amplitude") return Encoding::amplitude;
  if (s == "phase") return Encoding::phase;
  throw DomainError("unknown encoding '" + s + "'");
}

ReadoutMode readout_from_string(const std::string& s) {
  if (s == "intensity") return ReadoutMode::intensity;
  if (s == "homodyne") return ReadoutMode::homodyne;
  throw DomainError("unknown readout mode '" + s + "'");
}

void PfmDesign::validate() const {
  medium.validate();
  if (!(wavelength_vacuum > 0)) throw DomainError("design: wavelength must be positive");
  if (!(peak_power_scale > 0) || !std::isfinite(peak_power_scale)) {
    throw DomainError("design: peak_power_scale must be positive");
  }
  if (input_regions.empty() || output_bins.empty()) throw DomainError("design: needs input regions and output bins");
  check_regions(input_regions, medium.shape(), "input");
  check_regions(output_bins, medium.shape(), "output");
  if (calibration_gain.size() != calibration_offset.size() ||
      (!calibration_gain.empty() && calibration_gain.size() != output_bins.size())) {
    throw DomainError("design: calibration must be empty or one gain/offset per output bin");
  }
}

std::vector<Region> tile_regions(std::size_t nx, std::size_t ny, std::size_t count, std::size_t gap) {
  if (count == 0) throw DomainError("tile_regions: count must be >= 1");
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::size_t rows = (count + cols - 1) / cols;
  const std::size_t span = std::min(nx, ny);
  const std::size_t lanes = std::max(cols, rows);
  if (span < lanes * (gap + 1)) throw DomainError("tile_regions: facet too small for the requested regions");
  const std::size_t side = (span - (lanes - 1) * gap) / lanes;
  const std::size_t used_x = cols * side + (cols - 1) * gap;
  const std::size_t used_y = rows * side + (rows - 1) * gap;
  const std::size_t off_x = (nx - used_x) / 2;
  const std::size_t off_y = (ny - used_y) / 2;

  std::vector<Region> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = i / cols;
    const std::size_t c = i % cols;
    out.push_back({off_x + c * (side + gap), off_y + r * (side + gap), side, side});
  }
  return out;
}

PfmDesign make_design(const DesignLayout& layout) {
  const double pitch =
      layout.voxel_pitch > 0 ? layout.voxel_pitch : layout.wavelength_vacuum / layout.background_index;
  VoxelMedium medium(layout.shape, {pitch, pitch, pitch}, layout.background_index, layout.delta_n_max);
  if (layout.init_sigma > 0) {
    const CounterRng rng(layout.seed, kInitStream);
    auto dn = medium.delta_n_mut();
    for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = layout.init_sigma * rng.normal(i);
    medium.project();
  }
  PfmDesign d{.medium = std::move(medium),
              .wavelength_vacuum = layout.wavelength_vacuum,
              .encoding = layout.encoding,
              .input_regions = tile_regions(layout.shape.nx, layout.shape.ny, layout.input_dim, layout.input_gap),
              .output_bins = tile_regions(layout.shape.nx, layout.shape.ny, layout.output_dim, layout.output_gap),
              .readout = ReadoutMode::intensity,
              .peak_power_scale = layout.peak_power_scale,
              .calibration_gain = {},
              .calibration_offset = {}};
  d.validate();
  return d;
}

}  // namespace pfm::wave
