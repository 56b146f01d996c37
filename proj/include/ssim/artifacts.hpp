#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ssim {

inline constexpr const char* kToolVersion = "1.0.0";

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// Ordered key=value lines; keys are unique, later set() overwrites.
class Metadata {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  const std::string* get(const std::string& key) const;
  std::string str() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Writes to a sibling temp file then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

// Writes `dir/name` and `dir/name.meta`. Returns the artifact path.
std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& name,
                                     std::string_view content, const Metadata& meta);

}  // namespace ssim
