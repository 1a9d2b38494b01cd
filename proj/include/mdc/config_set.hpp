#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace mdc {

inline constexpr std::size_t max_configurations = 64;

/// Set of configuration indices, one bit per input network.
/// Doubles as the activity signature of a merged element.
class ConfigSet {
public:
  constexpr ConfigSet() = default;

  static constexpr ConfigSet single(std::size_t c) { return ConfigSet{std::uint64_t{1} << c}; }

  static constexpr ConfigSet all(std::size_t n) {
    return ConfigSet{n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1};
  }

  static constexpr ConfigSet from_bits(std::uint64_t bits) { return ConfigSet{bits}; }

  constexpr bool contains(std::size_t c) const { return (bits_ >> c) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr std::uint64_t bits() const { return bits_; }

  constexpr void insert(std::size_t c) { bits_ |= std::uint64_t{1} << c; }
  constexpr void erase(std::size_t c) { bits_ &= ~(std::uint64_t{1} << c); }

  constexpr ConfigSet operator|(ConfigSet o) const { return ConfigSet{bits_ | o.bits_}; }
  constexpr ConfigSet operator&(ConfigSet o) const { return ConfigSet{bits_ & o.bits_}; }
  constexpr ConfigSet operator-(ConfigSet o) const { return ConfigSet{bits_ & ~o.bits_}; }
  constexpr ConfigSet& operator|=(ConfigSet o) {
    bits_ |= o.bits_;
    return *this;
  }

  constexpr bool is_subset_of(ConfigSet o) const { return (bits_ & ~o.bits_) == 0; }

  constexpr auto operator<=>(ConfigSet const&) const = default;

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < 64; ++c) {
      if (contains(c)) {
        out.push_back(c);
      }
    }
    return out;
  }

  /// Bit string with configuration 0 first, e.g. "101" for {0,2} over 3 configurations.
  std::string to_string(std::size_t width) const {
    std::string s(width, '0');
    for (std::size_t c = 0; c < width; ++c) {
      if (contains(c)) {
        s[c] = '1';
      }
    }
    return s;
  }

private:
  constexpr explicit ConfigSet(std::uint64_t b) : bits_(b) {}
  std::uint64_t bits_ = 0;
};

inline std::size_t hamming_distance(ConfigSet a, ConfigSet b) {
  return static_cast<std::size_t>(std::popcount(a.bits() ^ b.bits()));
}

} // namespace mdc
