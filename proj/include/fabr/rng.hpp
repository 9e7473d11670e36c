#pragma once

#include <array>
#include <cstdint>

namespace fabr {

// Counter-based generation: every random value is a pure function of
// (seed, stream, index), so any block can be regenerated out of order.
//
// Stream convention: stream id = purpose tag XOR sub-index (block index,
// class index, ...). Tags occupy the top byte so sub-indices never collide
// across purposes.
namespace stream {
inline constexpr std::uint64_t kFeatureWeights = 0x01ull << 56;
inline constexpr std::uint64_t kSynthFeatures = 0x02ull << 56;
inline constexpr std::uint64_t kSynthCoefficients = 0x03ull << 56;
inline constexpr std::uint64_t kSynthNoise = 0x04ull << 56;
inline constexpr std::uint64_t kSplitShuffle = 0x05ull << 56;
inline constexpr std::uint64_t kEnsembleShuffle = 0x06ull << 56;

constexpr std::uint64_t id(std::uint64_t tag, std::uint64_t sub) noexcept { return tag ^ sub; }
} // namespace stream

/// Philox4x32-10 (Salmon et al., Random123). Key = 64-bit seed,
/// counter = (64-bit index, 64-bit stream id).
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    constexpr Philox4x32(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream_id) {}

    constexpr Block operator()(std::uint64_t index) const noexcept {
        Block ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                  static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

    /// Two 64-bit words from one counter.
    constexpr std::array<std::uint64_t, 2> words(std::uint64_t index) const noexcept {
        const Block b = (*this)(index);
        return {(std::uint64_t{b[1]} << 32) | b[0], (std::uint64_t{b[3]} << 32) | b[2]};
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
};

/// Uniform in (0, 1]; never returns 0 so log() is safe.
constexpr double to_unit_open_low(std::uint64_t w) noexcept {
    return static_cast<double>((w >> 11) + 1) * 0x1.0p-53;
}

/// Uniform in [0, 1).
constexpr double to_unit(std::uint64_t w) noexcept {
    return static_cast<double>(w >> 11) * 0x1.0p-53;
}

/// Standard normal stream. Element e uses counter e/2; each counter feeds one
/// Box-Muller pair (cos branch for even e, sin branch for odd e).
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream_id) noexcept : gen_(seed, stream_id) {}

    double at(std::uint64_t element) const noexcept;

    /// Fills out[i] = at(first + i).
    void fill(std::uint64_t first, double* out, std::uint64_t count) const noexcept;

private:
    Philox4x32 gen_;
};

/// Uniform 64-bit words and bounded integers from one stream, consumed sequentially.
class UniformSequence {
public:
    UniformSequence(std::uint64_t seed, std::uint64_t stream_id) noexcept : gen_(seed, stream_id) {}

    std::uint64_t next() noexcept;

    /// Unbiased integer in [0, bound) by rejection. bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    Philox4x32 gen_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
};

} // namespace fabr
