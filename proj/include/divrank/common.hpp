#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace divrank {

// Raised for bad user input: malformed files, inconsistent configuration,
// violated preconditions on supplied data. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hex-encoded SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never observe a
// partially written artifact.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Shortest round-trippable decimal form of a double ("%.17g").
std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index is visited
// exactly once; results must be written to per-index slots for determinism.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body);

// Stable 64-bit seed derivation for per-item random streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace divrank
