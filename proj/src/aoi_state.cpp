#include "ssim/aoi_state.hpp"

#include <charconv>
#include <stdexcept>

namespace ssim {

AoIState::AoIState(std::vector<Age> ages) : ages_(std::move(ages)) {
  int zeros = 0;
  for (Age a : ages_) {
    if (a < 0) throw std::invalid_argument("AoIState: negative age");
    if (a == 0) ++zeros;
  }
  if (zeros > 1) throw std::invalid_argument("AoIState: more than one node with age 0");
}

AoIState AoIState::all_expired(std::size_t n) {
  return AoIState(std::vector<Age>(n, kExpired));
}

bool AoIState::all_expired() const {
  for (Age a : ages_)
    if (a != kExpired) return false;
  return true;
}

std::string age_to_string(Age a) { return a == kExpired ? "inf" : std::to_string(a); }

std::string AoIState::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < ages_.size(); ++i) {
    if (i) out += ',';
    out += age_to_string(ages_[i]);
  }
  out += ']';
  return out;
}

AoIState AoIState::parse(std::string_view text) {
  if (!text.empty() && text.front() == '[') text.remove_prefix(1);
  if (!text.empty() && text.back() == ']') text.remove_suffix(1);
  std::vector<Age> ages;
  while (!text.empty()) {
    auto pos = text.find_first_of(",:");
    auto tok = text.substr(0, pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (tok == "inf" || tok == "INF" || tok == "expired") {
      ages.push_back(kExpired);
    } else {
      Age v{};
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw std::invalid_argument("AoIState::parse: bad age '" + std::string(tok) + "'");
      ages.push_back(v);
    }
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return AoIState(std::move(ages));
}

std::size_t AoIStateHash::operator()(const AoIState& s) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (Age a : s.ages()) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(a));
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ssim
