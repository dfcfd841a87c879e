#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "dcd/tensor.hpp"

namespace dcd {

/// Counter-based pseudo-random generator. The i-th output word is a pure
/// function of (seed, stream, i), so sequences are reproducible across
/// platforms, independent streams never interleave, and a tensor fill can be
/// reasoned about positionally. The word function is the SplitMix64
/// finalizer applied to a per-stream key plus the counter.
class Rng {
public:
    Rng() : Rng(0, 0) {}

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

    /// Independent stream derived from this generator's identity. The child
    /// starts at counter 0 and never collides with the parent's outputs.
    Rng sub(std::uint64_t substream) const {
        return Rng(seed_, mix(stream_ ^ mix(substream + 0x9E3779B97F4A7C15ULL)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::uint64_t next_u64() { return word(counter_++); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes exactly two words per draw.
    double gaussian() {
        const std::uint64_t a = next_u64();
        const std::uint64_t b = next_u64();
        // u1 in (0,1] so the log is finite; u2 in [0,1).
        const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ mix(stream + 0xD1B54A32D192ED03ULL));
    }

    std::uint64_t word(std::uint64_t counter) const {
        return mix(key_ + counter * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Tensor of i.i.d. standard normal entries.
inline Tensor gaussian(Rng& rng, Shape shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian();
    return t;
}

/// Fixed stream ids per pipeline phase so that phases sharing one
/// experiment seed never consume overlapping random words.
namespace streams {
inline constexpr std::uint64_t kTrainCriticInit = 101;
inline constexpr std::uint64_t kTrainGeneratorInit = 102;
inline constexpr std::uint64_t kTrainData = 103;
inline constexpr std::uint64_t kTrainCriticLatent = 104;
inline constexpr std::uint64_t kTrainGeneratorLatent = 105;
inline constexpr std::uint64_t kDcdData = 201;
inline constexpr std::uint64_t kDcdLatent = 202;
inline constexpr std::uint64_t kDcdChain = 203;
inline constexpr std::uint64_t kSampleLatent = 301;
inline constexpr std::uint64_t kSampleChain = 302;
inline constexpr std::uint64_t kEval = 401;
}  // namespace streams

}  // namespace dcd
