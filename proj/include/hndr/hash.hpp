#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace hndr {

/// Incremental 64-bit FNV-1a. Used for provenance and cache keys, not security.
class Fnv64 {
 public:
  Fnv64& update(std::string_view bytes);
  Fnv64& update(std::uint64_t value);
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view bytes);

/// Hash of a file's full contents. Throws ValidationError if unreadable.
std::string hash_file(const std::filesystem::path& path);

}  // namespace hndr
