#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace trifuse {

// Contract violations: bad shapes, bad arguments, misuse of an API.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid data: non-finite values, payload corruption.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File-format violations. Carries the byte offset of the defect.
struct ParseError : std::runtime_error {
    std::uint64_t offset;
    ParseError(const std::string& msg, std::uint64_t off)
        : std::runtime_error(msg + " (at byte offset " + std::to_string(off) + ")"),
          offset(off) {}
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic sub-stream seed: same (base, tag) always yields the same seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t s = base ^ (tag * 0xD1B54A32D192ED03ULL);
    return splitmix64(s);
}

// Seeded RNG with explicit value derivations. mt19937_64 output is pinned by
// the standard and the uniform/normal mappings below are hand-rolled, so a
// seed reproduces the same stream on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; caches the spare deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace trifuse
