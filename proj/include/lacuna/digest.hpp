#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "lacuna/error.hpp"

namespace lacuna {

// 64-bit FNV-1a. Used for manifest and vocabulary digests, not for security.
class Digest {
 public:
  Digest& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001B3ull;
    }
    return *this;
  }

  std::uint64_t value() const { return state_; }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ull;
};

inline std::string digest_hex(std::string_view bytes) { return Digest{}.update(bytes).hex(); }

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return digest_hex(data);
}

}  // namespace lacuna
