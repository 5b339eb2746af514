#include "failure_lens/util.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "failure_lens/errors.hpp"

namespace flens {

std::string format_number(double value) {
    // nlohmann emits the shortest round-trip form (Grisu), deterministic
    // across runs and platforms for the same bit pattern.
    return nlohmann::json(value).dump();
}

std::string format_number(std::int64_t value) {
    return std::to_string(value);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string fnv1a64_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const auto got = static_cast<std::size_t>(in.gcount());
        for (std::size_t i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned worker_count = threads > 0 ? static_cast<unsigned>(threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
    worker_count = static_cast<unsigned>(std::min<std::size_t>(worker_count, n));
    if (worker_count <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < worker_count; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

int env_log_level() {
    static const int level = [] {
        const char* raw = std::getenv("FAILURE_LENS_LOG");
        if (raw == nullptr) return 1;  // warn
        const std::string v(raw);
        if (v == "error" || v == "0") return 0;
        if (v == "warn" || v == "1") return 1;
        if (v == "info" || v == "2") return 2;
        if (v == "debug" || v == "3") return 3;
        return 1;
    }();
    return level;
}

}  // namespace

bool log_enabled(LogLevel level) {
    return static_cast<int>(level) <= env_log_level();
}

void log_line(LogLevel level, const std::string& message) {
    if (!log_enabled(level)) return;
    static std::mutex io_mutex;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(io_mutex);
    std::cerr << "[failure_lens " << names[static_cast<int>(level)] << "] " << message << "\n";
}

}  // namespace flens
