#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

namespace repclass {

/// Incremental SHA-256 (OpenSSL EVP).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::byte> bytes);
  void update(const void* data, std::size_t size) {
    update(std::span<const std::byte>(static_cast<const std::byte*>(data), size));
  }
  /// Lowercase hex digest; the hasher cannot be reused afterwards.
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(std::string_view text);

}  // namespace repclass
