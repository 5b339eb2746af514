#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace flens {

// Shortest decimal representation that round-trips the exact double.
// Used everywhere a number lands in a CSV or JSON artifact, so reruns
// with the same inputs produce byte-identical files.
std::string format_number(double value);
std::string format_number(std::int64_t value);

// FNV-1a over the file contents, hex-encoded. Manifest integrity hash.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string fnv1a64_file_hex(const std::filesystem::path& path);

// splitmix64 step; also used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// Runs fn(0..n-1) on up to `threads` workers (0 => hardware concurrency).
// Iterations must be independent; results must not depend on schedule.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Verbosity is controlled by FAILURE_LENS_LOG (error|warn|info|debug or 0-3).
bool log_enabled(LogLevel level);
void log_line(LogLevel level, const std::string& message);

}  // namespace flens
