#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace banet {

// Reads a whole file; throws io_error if missing/unreadable.
std::string read_file(const std::string& path);

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, std::string_view bytes);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ull);
std::string hash_hex(std::uint64_t h);

// Hash of a directory: sorted relative paths + file contents.
std::string hash_directory(const std::string& dir);

} // namespace banet
