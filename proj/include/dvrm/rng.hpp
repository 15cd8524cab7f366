#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dvrm/common.hpp"

namespace dvrm {

/// splitmix64 step; used to derive independent sub-stream seeds from one
/// master seed so that e.g. weight init and batch shuffling never share state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable sub-stream labels. Mixing the label into the master seed gives each
/// consumer its own mt19937_64 stream.
enum class Stream : std::uint64_t {
    weight_init   = 0x01,
    batch_shuffle = 0x02,
    latent_noise  = 0x03,
    split         = 0x04,
    signal_synth  = 0x05,
    glyph_variant = 0x06,
    image_dropout = 0x07,
    class_template = 0x08,
    channel_offset = 0x09,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t salt = 0) {
    std::uint64_t s = master ^ (static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ULL);
    s ^= salt * 0xd1b54a32d192ed03ULL;
    return splitmix64(s);
}

/// Deterministic RNG wrapper. All distribution sampling is hand-rolled on top
/// of the raw mt19937_64 output so results are identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1). 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n). Rejection sampling on the top bits.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ParamError("Rng::below: n must be positive");
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = gen_();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller. One cached value.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Fisher-Yates. Deterministic across platforms (uses below()).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace dvrm
