#include "pfm/cli/report_bundle.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "pfm/hash.hpp"

#ifndef PFM_VERSION
#define PFM_VERSION "0.0.0"
#endif

namespace pfm::cli {
namespace {

namespace fs = std::filesystem;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string code_version() { return PFM_VERSION; }

ReportBundle::ReportBundle(fs::path dir, std::string command, std::string config_sha256)
    : dir_(std::move(dir)), command_(std::move(command)), config_sha256_(std::move(config_sha256)),
      started_(utc_now()) {
  fs::create_directories(dir_);
  lock_ = dir_ / ".pfm.lock";
  const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw LockError("output directory " + dir_.string() + " is in use (remove " + lock_.string() +
                    " if no other run is active)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

ReportBundle::~ReportBundle() {
  std::error_code ec;
  fs::remove(lock_, ec);
}

void ReportBundle::write(const std::string& name, std::string_view bytes, bool is_volatile) {
  const fs::path p = dir_ / name;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + p.string());
  add_existing(name, is_volatile);
}

void ReportBundle::write_json(const std::string& name, const nlohmann::ordered_json& j, bool is_volatile) {
  write(name, j.dump(2) + "\n", is_volatile);
}

void ReportBundle::add_existing(const std::string& name, bool is_volatile) {
  if (!fs::exists(dir_ / name)) throw Error("bundle: " + name + " was not written");
  auto it = std::find_if(files_.begin(), files_.end(), [&](const Entry& e) { return e.name == name; });
  if (it == files_.end()) {
    files_.push_back({name, is_volatile});
  } else {
    it->is_volatile = is_volatile;
  }
}

nlohmann::ordered_json ReportBundle::finalize(bool checks_passed) {
  nlohmann::ordered_json info;
  info["started_utc"] = started_;
  info["finished_utc"] = utc_now();
  write_json("run_info.json", info, true);

  std::sort(files_.begin(), files_.end(), [](const Entry& a, const Entry& b) { return a.name < b.name; });
  nlohmann::ordered_json m;
  m["format"] = "pfm-manifest";
  m["version"] = 1;
  m["command"] = command_;
  m["code_version"] = code_version();
  m["config_sha256"] = config_sha256_;
  m["provenance"] = provenance_;
  m["checks_passed"] = checks_passed;
  auto& list = m["files"] = nlohmann::ordered_json::array();
  for (const auto& e : files_) {
    const std::string bytes = read_file(dir_ / e.name);
    nlohmann::ordered_json f;
    f["path"] = e.name;
    f["bytes"] = bytes.size();
    f["sha256"] = e.is_volatile ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(sha256_hex(bytes));
    f["volatile"] = e.is_volatile;
    list.push_back(std::move(f));
  }
  std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.dump(2) << "\n";
  if (!out) throw Error("cannot write manifest.json");
  return m;
}

}  // namespace pfm::cli
