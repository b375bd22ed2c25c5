#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bessgnn {

/// Seeded generator with platform-independent output. std::mt19937_64 has a
/// standardized sequence; the distributions below are hand-rolled because the
/// standard library's are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). Rejection sampling avoids modulo bias.
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index (splitmix64 finalizer) so that
/// independent streams (per scenario, per epoch) never share state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

} // namespace bessgnn
