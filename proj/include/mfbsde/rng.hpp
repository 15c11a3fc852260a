#pragma once

// Counter-based streams: draw k of stream s under master seed m is a pure
// function of (m, s, k), so paths can be generated in any order or thread.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfbsde {

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
};

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class StreamRng {
public:
    StreamRng(std::uint64_t master_seed, std::uint64_t stream)
        : key_(mix64(mix64(master_seed + 0x9E3779B97F4A7C15ULL) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}
    explicit StreamRng(const SeedSpec& s) : StreamRng(s.master_seed, s.stream_id) {}

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ ^ mix64(counter_ * 0x9E3779B97F4A7C15ULL));
    }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; pairs are consumed in order.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace mfbsde
