#include "ssim/artifacts.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <unistd.h>

namespace ssim {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void Metadata::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos)
    throw std::invalid_argument("metadata key '" + key + "' is empty or contains '=' or newline");
  if (value.find('\n') != std::string::npos)
    throw std::invalid_argument("metadata value for '" + key + "' contains a newline");
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void Metadata::set(const std::string& key, double value) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  set(key, std::string(buf, r.ptr));
}

const std::string* Metadata::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

std::string Metadata::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename into " + path.string());
  }
}

std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& name,
                                     std::string_view content, const Metadata& meta) {
  const auto path = dir / name;
  Metadata m = meta;
  m.set("artifact", name);
  m.set("content_fnv1a64", hex64(fnv1a64(content)));
  write_atomic(path, content);
  auto side = path;
  side += ".meta";
  write_atomic(side, m.str());
  return path;
}

}  // namespace ssim
