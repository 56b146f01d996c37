#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssim {

// Age of information in units of the decision interval.
using Age = std::int32_t;

// Sentinel for data that no longer carries information anywhere ("inf").
// Orders above every finite age.
inline constexpr Age kExpired = std::numeric_limits<Age>::max();

// Per-node age vector. At most one entry may be 0 (the node activated in the
// current slot).
class AoIState {
 public:
  AoIState() = default;
  explicit AoIState(std::vector<Age> ages);
  AoIState(std::initializer_list<Age> ages) : AoIState(std::vector<Age>(ages)) {}

  static AoIState all_expired(std::size_t n);

  std::size_t size() const { return ages_.size(); }
  Age operator[](std::size_t i) const { return ages_[i]; }
  bool expired(std::size_t i) const { return ages_[i] == kExpired; }
  bool all_expired() const;
  std::span<const Age> ages() const { return ages_; }

  // "[inf,2,1]"
  std::string to_string() const;
  // Accepts "[inf,2,1]", "inf,2,1" or "inf:2:1".
  static AoIState parse(std::string_view text);

  auto operator<=>(const AoIState&) const = default;
  bool operator==(const AoIState&) const = default;

 private:
  std::vector<Age> ages_;
};

struct AoIStateHash {
  std::size_t operator()(const AoIState& s) const noexcept;
};

std::string age_to_string(Age a);

}  // namespace ssim
