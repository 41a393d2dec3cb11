#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace debacer {

// 64-bit FNV-1a, rendered as 16 lowercase hex digits. Stable across builds;
// used to tag configs, datasets and fitted models in reports.
class Fingerprint {
 public:
  Fingerprint& add(std::string_view bytes);
  Fingerprint& add(std::uint64_t value);
  Fingerprint& add(double value);

  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fingerprint_of(std::string_view bytes);

}  // namespace debacer
