#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcvd {

/// Deterministic PRNG used for weight init, splits and sampling.
/// Draws are derived from raw mt19937_64 output so sequences are identical
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller.
    double normal();

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// SHA-256 digest as a lowercase hex string.
std::string sha256_hex(const std::string& data);

std::vector<std::string> split_lines(const std::string& text);
std::string lowercase(std::string s);
std::string trim(const std::string& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Write to a temp file in the target directory, then rename into place.
void atomic_write_file(const std::string& path, const std::string& content);

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace dcvd
