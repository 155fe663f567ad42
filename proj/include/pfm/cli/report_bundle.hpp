#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pfm/error.hpp"

namespace pfm::cli {

// Another process holds the output directory.
class LockError : public Error {
 public:
  using Error::Error;
};

// Output directory of one command run. Holds an exclusive lockfile for its
// lifetime and records every emitted file; finalize() writes manifest.json
// listing each file with its SHA-256. Volatile files (wall-clock timings)
// are listed with a null digest so the remaining bytes stay reproducible.
class ReportBundle {
 public:
  ReportBundle(std::filesystem::path dir, std::string command, std::string config_sha256);
  ~ReportBundle();
  ReportBundle(const ReportBundle&) = delete;
  ReportBundle& operator=(const ReportBundle&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, std::string_view bytes, bool is_volatile = false);
  void write_json(const std::string& name, const nlohmann::ordered_json& j, bool is_volatile = false);
  // Registers a file some other writer already put in the directory.
  void add_existing(const std::string& name, bool is_volatile = false);

  void set_provenance(nlohmann::ordered_json p) { provenance_ = std::move(p); }
  // Writes run_info.json (volatile) and manifest.json. Returns the manifest.
  nlohmann::ordered_json finalize(bool checks_passed);

 private:
  struct Entry {
    std::string name;
    bool is_volatile;
  };
  std::filesystem::path dir_;
  std::filesystem::path lock_;
  std::string command_;
  std::string config_sha256_;
  std::string started_;
  nlohmann::ordered_json provenance_;
  std::vector<Entry> files_;
};

std::string code_version();

}  // namespace pfm::cli
