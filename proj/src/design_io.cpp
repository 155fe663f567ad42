#include "pfm/design_io.hpp"

#include <cmath>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pfm/error.hpp"
#include "pfm/hash.hpp"

namespace pfm::wave {
namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kMagic = "PFMDSGN1";
constexpr int kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Rounds toward zero when nearest rounding would step past the bound.
float to_file_float(double v, double bound) {
  float f = static_cast<float>(v);
  if (std::abs(static_cast<double>(f)) > bound) f = std::nextafter(f, 0.0f);
  return f;
}

std::string float32_payload(const VoxelMedium& m) {
  const auto values = m.delta_n();
  std::string out;
  out.reserve(values.size() * 4);
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(to_file_float(v, m.delta_n_max())));
  return out;
}

json regions_to_json(const std::vector<Region>& regions) {
  json a = json::array();
  for (const auto& r : regions) a.push_back({r.x0, r.y0, r.width, r.height});
  return a;
}

std::vector<Region> regions_from_json(const json& a) {
  std::vector<Region> out;
  for (const auto& r : a) {
    if (!r.is_array() || r.size() != 4) throw FormatError("design file: region must be [x0, y0, width, height]");
    out.push_back({r[0].get<std::size_t>(), r[1].get<std::size_t>(), r[2].get<std::size_t>(), r[3].get<std::size_t>()});
  }
  return out;
}

json device_header(const PfmDesign& d, const std::string& payload) {
  const auto& m = d.medium;
  json h;
  h["format"] = "pfm-design";
  h["version"] = kVersion;
  h["grid"] = {m.shape().nx, m.shape().ny, m.shape().nz};
  h["voxel_pitch_m"] = {m.pitch().x, m.pitch().y, m.pitch().z};
  h["background_index"] = m.background_index();
  h["delta_n_max"] = m.delta_n_max();
  h["gain_per_step"] = m.gain_per_step();
  h["wavelength_m"] = d.wavelength_vacuum;
  h["encoding"] = {{"mode", to_string(d.encoding)},
                   {"peak_power_w", d.peak_power_scale},
                   {"input_regions", regions_to_json(d.input_regions)}};
  h["readout"] = {{"mode", to_string(d.readout)},
                  {"output_bins", regions_to_json(d.output_bins)},
                  {"calibration_gain", d.calibration_gain},
                  {"calibration_offset", d.calibration_offset}};
  h["data"] = {{"dtype", "float32le"},
               {"order", "z-major"},
               {"count", m.shape().voxels()},
               {"sha256", sha256_hex(std::as_bytes(std::span(payload.data(), payload.size())))}};
  return h;
}

}  // namespace

std::string encode_design(const PfmDesign& d, const json& provenance) {
  d.validate();
  const std::string payload = float32_payload(d.medium);
  json h = device_header(d, payload);
  if (!provenance.is_null()) h["provenance"] = provenance;
  const std::string header = h.dump(2);
  std::string out(kMagic);
  put_u64(out, header.size());
  out += header;
  out += payload;
  return out;
}

DesignFile decode_design(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kMagic) throw FormatError("design file: bad magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(raw[8 + i]) << (8 * i);
  if (header_len > bytes.size() - 16) throw FormatError("design file: header length exceeds file size");

  json h;
  try {
    h = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("design file: header is not valid JSON: ") + e.what());
  }

  try {
    if (h.at("format") != "pfm-design" || h.at("version") != kVersion) {
      throw FormatError("design file: unsupported format or version");
    }
    const auto grid = h.at("grid");
    const GridShape shape{grid.at(0).get<std::size_t>(), grid.at(1).get<std::size_t>(), grid.at(2).get<std::size_t>()};
    const auto pitch = h.at("voxel_pitch_m");
    const std::string_view payload = bytes.substr(16 + header_len);
    if (payload.size() != shape.voxels() * 4 || h.at("data").at("count").get<std::size_t>() != shape.voxels()) {
      std::ostringstream msg;
      msg << "design file: grid " << shape.nx << "x" << shape.ny << "x" << shape.nz << " needs "
          << shape.voxels() * 4 << " data bytes, file has " << payload.size();
      throw FormatError(msg.str());
    }
    const std::string digest = sha256_hex(std::as_bytes(std::span(payload.data(), payload.size())));
    if (digest != h.at("data").at("sha256").get<std::string>()) {
      throw FormatError("design file: voxel data digest mismatch (file corrupt)");
    }

    VoxelMedium medium(shape, {pitch.at(0).get<double>(), pitch.at(1).get<double>(), pitch.at(2).get<double>()},
                       h.at("background_index").get<double>(), h.at("delta_n_max").get<double>(),
                       h.at("gain_per_step").get<double>());
    std::vector<double> dn(shape.voxels());
    const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    medium.assign(std::move(dn));

    const auto& enc = h.at("encoding");
    const auto& rd = h.at("readout");
    DesignFile out{.design = {.medium = std::move(medium),
                              .wavelength_vacuum = h.at("wavelength_m").get<double>(),
                              .encoding = encoding_from_string(enc.at("mode").get<std::string>()),
                              .input_regions = regions_from_json(enc.at("input_regions")),
                              .output_bins = regions_from_json(rd.at("output_bins")),
                              .readout = readout_from_string(rd.at("mode").get<std::string>()),
                              .peak_power_scale = enc.at("peak_power_w").get<double>(),
                              .calibration_gain = rd.at("calibration_gain").get<std::vector<double>>(),
                              .calibration_offset = rd.at("calibration_offset").get<std::vector<double>>()},
                   .provenance = h.contains("provenance") ? h.at("provenance") : json(nullptr)};
    out.design.validate();
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("design file: malformed header: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("design file: invalid design: ") + e.what());
  }
}

void save_design(const std::filesystem::path& path, const PfmDesign& d, const json& provenance) {
  const std::string bytes = encode_design(d, provenance);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing " + path.string());
}

DesignFile load_design(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open design file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_design(ss.str());
}

std::string design_hash(const PfmDesign& d) {
  const std::string payload = float32_payload(d.medium);
  Sha256 h;
  h.update(device_header(d, payload).dump());
  h.update(std::as_bytes(std::span(payload.data(), payload.size())));
  return h.hex_digest();
}

void quantize_to_file_precision(PfmDesign& d) {
  const double bound = d.medium.delta_n_max();
  for (double& v : d.medium.delta_n_mut()) v = static_cast<double>(to_file_float(v, bound));
}

void save_field(const std::filesystem::path& stem, const OpticalField& f) {
  std::string payload;
  payload.reserve(f.amplitude.size() * 8);
  for (const auto& a : f.amplitude) {
    put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(a.real())));
    put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(a.imag())));
  }
  const auto bin = std::filesystem::path(stem).replace_extension(".field.bin");
  const auto meta = std::filesystem::path(stem).replace_extension(".field.json");
  std::ofstream(bin, std::ios::binary).write(payload.data(), static_cast<std::streamsize>(payload.size()));
  json j;
  j["format"] = "pfm-field";
  j["nx"] = f.nx;
  j["ny"] = f.ny;
  j["pitch_m"] = {f.pitch_x, f.pitch_y};
  j["wavelength_m"] = f.wavelength_vacuum;
  j["dtype"] = "complex64le-interleaved";
  j["order"] = "row-major (y, x)";
  j["units"] = "sqrt(W/m^2)";
  std::ofstream(meta) << j.dump(2) << '\n';
}

}  // namespace pfm::wave
