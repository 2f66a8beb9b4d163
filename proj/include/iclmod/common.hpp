#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iclmod {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad flags or config files; the CLI maps this to exit code 2.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what) {}
};

// splitmix64; used for seed derivation so that sub-streams are decorrelated.
std::uint64_t splitmix64(std::uint64_t x);

// Derives a child seed from (base, stream, index). stream separates the
// purposes a single run seed is used for (selection / ordering / needle ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

// Deterministic RNG with explicit, platform-independent sampling primitives.
// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so bounded draws and shuffles are done by hand here.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Unbiased draw in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Uniform sample of k distinct indices from [0, n), in random order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::uint64_t state_;
};

// Hex-encoded SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

// Content id for a sample without an explicit id: first 32 hex chars of
// SHA-256 over the text, so re-ingestion of the same file is idempotent.
std::string content_id(std::string_view text);

// FNV-1a 64-bit. Stable across platforms; used by the mock hash embedder.
std::uint64_t fnv1a64(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Reads a whole file; throws Error when missing/unreadable.
std::string read_file(const std::filesystem::path& path);

// Atomic write: tmp file in the same directory + rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Calls fn(line_number, line) for every line; line numbers start at 1.
// The trailing newline is stripped; a final line without '\n' is delivered.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

// Runs fn(i) for i in [0, n) on up to `workers` threads; exceptions are
// propagated. Results must be written by index so ordering never depends on
// completion order.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace iclmod
