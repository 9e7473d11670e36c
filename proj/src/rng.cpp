#include "fabr/rng.hpp"

#include <cmath>
#include <numbers>

namespace fabr {

namespace {

struct NormalPair {
    double cos_branch;
    double sin_branch;
};

NormalPair box_muller(const Philox4x32& gen, std::uint64_t counter) noexcept {
    const auto w = gen.words(counter);
    const double radius = std::sqrt(-2.0 * std::log(to_unit_open_low(w[0])));
    const double angle = 2.0 * std::numbers::pi * to_unit(w[1]);
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

} // namespace

double NormalStream::at(std::uint64_t element) const noexcept {
    const NormalPair p = box_muller(gen_, element >> 1);
    return (element & 1u) ? p.sin_branch : p.cos_branch;
}

void NormalStream::fill(std::uint64_t first, double* out, std::uint64_t count) const noexcept {
    std::uint64_t e = first;
    const std::uint64_t end = first + count;
    if (e < end && (e & 1u)) {
        *out++ = at(e++);
    }
    for (; e + 1 < end; e += 2) {
        const NormalPair p = box_muller(gen_, e >> 1);
        *out++ = p.cos_branch;
        *out++ = p.sin_branch;
    }
    if (e < end) {
        *out = at(e);
    }
}

std::uint64_t UniformSequence::next() noexcept {
    if (buffered_ == 0) {
        buffer_ = gen_.words(counter_++);
        buffered_ = 2;
    }
    return buffer_[2 - buffered_--];
}

std::uint64_t UniformSequence::below(std::uint64_t bound) noexcept {
    // Reject the top partial range so every residue is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound + 1) % bound;
    for (;;) {
        const std::uint64_t w = next();
        if (w <= limit) {
            return w % bound;
        }
    }
}

} // namespace fabr
