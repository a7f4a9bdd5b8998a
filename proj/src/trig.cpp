#include "binfield/trig.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace binfield {

namespace {

constexpr int kLanes = 8;
constexpr long kAnchorPeriod = 256;
constexpr std::size_t kChunk = 2048;

#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define BINFIELD_SIMD_CLONES __attribute__((target_clones("arch=haswell", "default")))
#else
#define BINFIELD_SIMD_CLONES
#endif

template <class Ref>
inline void anchor(double x, long k, double sign, Ref&& re, Ref&& im) {
    // Reduce k*x mod 1 before scaling by 2 pi to keep the argument small.
    const double t = k * x;
    const double frac = t - std::floor(t);
    const double ang = 2.0 * std::numbers::pi * frac;
    re = std::cos(ang);
    im = sign * std::sin(ang);
}

typedef double LaneVec __attribute__((vector_size(kLanes * sizeof(double))));

/// Calls body(k, pr, pi) for k = first..last with pr + i pi = exp(sign 2 pi i k x_l)
/// in each lane, advancing by complex rotation and re-anchoring every
/// kAnchorPeriod frequencies.
template <class Body>
inline void sweep_frequencies(const LaneVec& x, long first, long last, double sign, Body&& body) {
    LaneVec wr, wi, pr, pi;
    for (int l = 0; l < kLanes; ++l) anchor(x[l], 1, sign, wr[l], wi[l]);
    for (long block = first; block <= last; block += kAnchorPeriod) {
        if (block == 0) {
            pr = LaneVec{} + 1.0;
            pi = LaneVec{};
        } else {
            for (int l = 0; l < kLanes; ++l) anchor(x[l], block, sign, pr[l], pi[l]);
        }
        const long block_end = std::min(last, block + kAnchorPeriod - 1);
        for (long k = block;; ++k) {
            body(k, pr, pi);
            if (k == block_end) break;
            const LaneVec r = pr * wr - pi * wi;
            pi = pr * wi + pi * wr;
            pr = r;
        }
    }
}

inline LaneVec load_lanes(std::span<const double> xs, std::size_t start, std::size_t count) {
    LaneVec x{};
    for (std::size_t l = 0; l < count; ++l) x[l] = xs[start + l];
    return x;
}

struct PairedCoefficient {
    std::complex<double> pos; // frequency +k
    std::complex<double> neg; // frequency -k
};

std::vector<PairedCoefficient> pair_up(std::span<const std::complex<double>> coeffs) {
    const std::size_t m = coeffs.size();
    const std::size_t max_k = m / 2;
    std::vector<PairedCoefficient> out(max_k + 1);
    for (std::size_t k = 1; k <= max_k; ++k) {
        if (2 * k < m) out[k].pos = coeffs[2 * k];
        if (2 * k - 1 < m) out[k].neg = coeffs[2 * k - 1];
    }
    return out;
}

} // namespace

BINFIELD_SIMD_CLONES
void fourier_synthesis(std::span<const std::complex<double>> coeffs, std::span<const double> xs,
                       std::span<std::complex<double>> out) {
    if (coeffs.empty()) {
        std::fill(out.begin(), out.end(), std::complex<double>{});
        return;
    }
    const auto pairs = pair_up(coeffs);
    const long max_k = static_cast<long>(pairs.size()) - 1;
    for (std::size_t start = 0; start < xs.size(); start += kLanes) {
        const std::size_t count = std::min<std::size_t>(kLanes, xs.size() - start);
        const LaneVec x = load_lanes(xs, start, count);
        LaneVec accr = LaneVec{} + coeffs[0].real();
        LaneVec acci = LaneVec{} + coeffs[0].imag();
        sweep_frequencies(x, 1, max_k, +1.0, [&](long k, const LaneVec& pr, const LaneVec& pi) {
            const double ar = pairs[k].pos.real(), ai = pairs[k].pos.imag();
            const double br = pairs[k].neg.real(), bi = pairs[k].neg.imag();
            accr += (ar + br) * pr + (bi - ai) * pi;
            acci += (ai + bi) * pr + (ar - br) * pi;
        });
        for (std::size_t l = 0; l < count; ++l) out[start + l] = {accr[l], acci[l]};
    }
}

BINFIELD_SIMD_CLONES
void fourier_synthesis_real(std::span<const std::complex<double>> coeffs, std::span<const double> xs,
                            std::span<double> out) {
    if (coeffs.empty()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const auto pairs = pair_up(coeffs);
    const long max_k = static_cast<long>(pairs.size()) - 1;
    std::vector<double> cr(pairs.size()), ci(pairs.size());
    for (std::size_t k = 1; k < pairs.size(); ++k) {
        cr[k] = pairs[k].pos.real() + pairs[k].neg.real();
        ci[k] = pairs[k].neg.imag() - pairs[k].pos.imag();
    }
    for (std::size_t start = 0; start < xs.size(); start += kLanes) {
        const std::size_t count = std::min<std::size_t>(kLanes, xs.size() - start);
        const LaneVec x = load_lanes(xs, start, count);
        LaneVec acc = LaneVec{} + coeffs[0].real();
        sweep_frequencies(x, 1, max_k, +1.0, [&](long k, const LaneVec& pr, const LaneVec& pi) {
            acc += cr[k] * pr + ci[k] * pi;
        });
        for (std::size_t l = 0; l < count; ++l) out[start + l] = acc[l];
    }
}

BINFIELD_SIMD_CLONES
std::vector<std::complex<double>> weighted_phasor_sums(std::span<const double> xs,
                                                       std::span<const double> weights,
                                                       long max_freq) {
    const std::size_t nk = static_cast<std::size_t>(max_freq) + 1;
    std::vector<CompensatedSum<std::complex<double>>> totals(nk);
    std::vector<LaneVec> lane_re(nk), lane_im(nk);
    for (std::size_t chunk = 0; chunk < xs.size(); chunk += kChunk) {
        const std::size_t chunk_end = std::min(xs.size(), chunk + kChunk);
        std::fill(lane_re.begin(), lane_re.end(), LaneVec{});
        std::fill(lane_im.begin(), lane_im.end(), LaneVec{});
        for (std::size_t start = chunk; start < chunk_end; start += kLanes) {
            const std::size_t count = std::min<std::size_t>(kLanes, chunk_end - start);
            const LaneVec x = load_lanes(xs, start, count);
            const LaneVec w = load_lanes(weights, start, count);
            sweep_frequencies(x, 0, max_freq, -1.0, [&](long k, const LaneVec& pr, const LaneVec& pi) {
                lane_re[static_cast<std::size_t>(k)] += w * pr;
                lane_im[static_cast<std::size_t>(k)] += w * pi;
            });
        }
        for (std::size_t k = 0; k < nk; ++k) {
            double sr = 0.0, si = 0.0;
            for (int l = 0; l < kLanes; ++l) {
                sr += lane_re[k][l];
                si += lane_im[k][l];
            }
            totals[k].add({sr, si});
        }
    }

    std::vector<std::complex<double>> out(nk);
    for (std::size_t k = 0; k < nk; ++k) out[k] = totals[k].value();
    return out;
}

} // namespace binfield
