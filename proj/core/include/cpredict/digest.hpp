#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace cpredict {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// 64-bit FNV-1a; stable across platforms, used to derive RNG stream ids.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace cpredict
