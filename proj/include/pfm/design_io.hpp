#pragma once

// Design file layout:
//   8 bytes   magic "PFMDSGN1"
//   8 bytes   header length H, little-endian uint64
//   H bytes   JSON header (grid, pitches, indices, facet layout, data digest,
//             optional provenance)
//   4*N bytes delta_n as little-endian float32, z-major
//
// Field dumps are interleaved (re, im) little-endian float32 pairs in
// row-major (y, x) order with a JSON sidecar describing the grid.

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "pfm/design.hpp"

namespace pfm::wave {

struct DesignFile {
  PfmDesign design;
  nlohmann::ordered_json provenance;  // null when absent
};

std::string encode_design(const PfmDesign& d, const nlohmann::ordered_json& provenance = nullptr);
DesignFile decode_design(std::string_view bytes);

void save_design(const std::filesystem::path& path, const PfmDesign& d,
                 const nlohmann::ordered_json& provenance = nullptr);
DesignFile load_design(const std::filesystem::path& path);

// Identity of the physical device: digest of the header without provenance
// plus the float32 voxel data. Equal for a design and its saved/loaded copy.
std::string design_hash(const PfmDesign& d);

// Rounds delta_n to the float32 values a design file stores.
void quantize_to_file_precision(PfmDesign& d);

void save_field(const std::filesystem::path& stem, const OpticalField& f);

}  // namespace pfm::wave
