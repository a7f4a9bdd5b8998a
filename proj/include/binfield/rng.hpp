#pragma once

#include <cstdint>
#include <random>

namespace binfield {

/// Labels of the independent substreams drawn for one trial.
enum class StreamLabel : std::uint32_t {
    Locations = 0x4c4f4301u,
    Noise = 0x4e4f4902u,
    Thresholds = 0x54485203u,
};

/// One labeled random stream. Seeded from (master seed, trial counter, label)
/// so every trial's streams are reproducible regardless of scheduling.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t trial, StreamLabel label) {
        std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                          static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                          static_cast<std::uint32_t>(label)};
        engine_.seed(seq);
    }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal() { return normal_(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Seed for trial `index` of a sweep point, derived from the experiment seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32), 0x7e5eedu};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

} // namespace binfield
