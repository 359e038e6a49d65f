#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sq {

// Counter-based random streams (Philox4x64-10). Every (key, counter) pair maps
// to the same output on every platform and thread schedule, so trajectory i of
// a run with master seed s can be generated anywhere: key = (s ^ purpose, i).

namespace detail {

inline void mul_hi_lo(std::uint64_t a, std::uint64_t b,
                      std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

} // namespace detail

struct PhiloxKey {
    std::uint64_t k0 = 0;
    std::uint64_t k1 = 0;
};

/// Philox4x64-10 block function: 256-bit counter -> 256 random bits.
inline std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> ctr,
                                               PhiloxKey key) {
    constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mul_hi_lo(M0, ctr[0], hi0, lo0);
        detail::mul_hi_lo(M1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key.k0, lo1, hi0 ^ ctr[3] ^ key.k1, lo0};
        key.k0 += W0;
        key.k1 += W1;
    }
    return ctr;
}

/// One independent random stream. Cheap to construct, 40 bytes of state,
/// no warm-up required.
class RandomStream {
public:
    RandomStream() = default;
    RandomStream(std::uint64_t key0, std::uint64_t key1) : key_{key0, key1} {}

    std::uint64_t next_u64() {
        if (idx_ == 4) {
            block_ = philox4x64({ctr_++, 0, 0, 0}, key_);
            idx_ = 0;
        }
        return block_[idx_++];
    }

    /// Uniform double in the open interval (0, 1).
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    /// Standard normal deviate (Box-Muller, second value cached).
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    PhiloxKey key_{};
    std::array<std::uint64_t, 4> block_{};
    std::uint64_t ctr_ = 0;
    int idx_ = 4;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Stream purposes keep draws for unrelated stages statistically independent
// even when they share the master seed and trajectory index.
enum class StreamPurpose : std::uint64_t {
    dynamics = 0x9A3C5E1B00000001ULL,
    photon_shot_noise = 0x9A3C5E1B00000002ULL,
    tests = 0x9A3C5E1B000000FFULL,
};

/// Stream for trajectory `traj` of sweep point `point` under `seed`.
/// Key layout is collision-free for point < 2^24 and traj < 2^40.
inline RandomStream make_stream(std::uint64_t seed, StreamPurpose purpose,
                                std::uint64_t point, std::uint64_t traj) {
    return RandomStream(seed ^ static_cast<std::uint64_t>(purpose),
                        (point << 40) | (traj & 0xFFFFFFFFFFULL));
}

} // namespace sq
