#pragma once

#include <cmath>
#include <cstdint>

namespace twofold {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a68e3eb4f9b7ULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Per-item random stream: a pure function of (seed, index). Ensembles draw
/// stream i for path/orbit i, so results do not depend on how work is split
/// across threads.
class SplitStream {
  public:
    SplitStream(std::uint64_t seed, std::uint64_t index) {
        // decorrelate the (seed, index) pair before using it as a state
        std::uint64_t s = seed ^ 0x5851f42d4c957f2dULL;
        detail::splitmix64(s);
        s ^= index * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL;
        detail::splitmix64(s);
        state_ = s;
        have_normal_ = false;
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// Uniform in (0, 1); never returns 0 or 1 exactly.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller, pairwise cached.
    double next_normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_normal_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_normal_;
};

}  // namespace twofold
