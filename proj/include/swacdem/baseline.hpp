#pragma once

// Conventional coherent maximum-likelihood demodulator: per symbol window,
// correlate against the M carrier templates cos(2*pi*f_c*t + theta_m) and
// take the argmax. With the carrier known and the symbol templates of equal
// energy this is the exact ML detector in white Gaussian noise; it is also
// exactly the receiver whose accuracy collapses once Doppler moves the
// carrier off the templates.

#include <cmath>
#include <vector>

#include "swacdem/common.hpp"
#include "swacdem/sigproc.hpp"

namespace swacdem {

struct MleConfig {
    PskScheme scheme;
    ModulationConfig mod;  // nominal (assumed-known) carrier
};

namespace detail {

inline Mat mle_templates(const MleConfig& cfg) {
    cfg.mod.validate();
    Mat t(cfg.scheme.order, cfg.mod.samples_per_symbol);
    const double wc = 2.0 * std::numbers::pi * cfg.mod.carrier_hz / cfg.mod.sample_rate_hz;
    for (int m = 0; m < cfg.scheme.order; ++m) {
        const double theta = cfg.scheme.phase(m);
        for (int k = 0; k < cfg.mod.samples_per_symbol; ++k) t(m, k) = std::cos(wc * k + theta);
    }
    return t;
}

inline int mle_detect_window(const double* window, const Mat& templates) {
    int best = 0;
    double best_score = dot(window, templates.row(0), templates.cols);
    for (int m = 1; m < templates.rows; ++m) {
        const double score = dot(window, templates.row(m), templates.cols);
        if (score > best_score) {  // ties keep the lower index
            best_score = score;
            best = m;
        }
    }
    return best;
}

}  // namespace detail

// Symbol-synchronous detection over a received stream.
inline std::vector<int> mle_demodulate(const Waveform& received, const MleConfig& cfg) {
    const int sps = cfg.mod.samples_per_symbol;
    if (received.samples.size() % static_cast<size_t>(sps) != 0)
        throw config_error("mle_demodulate: signal length " + std::to_string(received.samples.size()) +
                           " not divisible by samples_per_symbol " + std::to_string(sps));
    const Mat templates = detail::mle_templates(cfg);
    std::vector<int> symbols;
    symbols.reserve(received.samples.size() / sps);
    for (size_t off = 0; off + sps <= received.samples.size(); off += sps)
        symbols.push_back(detail::mle_detect_window(received.samples.data() + off, templates));
    return symbols;
}

// Frame-based variant used by the experiment harness: each frame starts at a
// symbol boundary, so detection runs on its first samples_per_symbol entries.
inline std::vector<int> mle_demodulate_frames(const Mat& frames, const MleConfig& cfg) {
    if (frames.cols < cfg.mod.samples_per_symbol)
        throw config_error("mle_demodulate_frames: frames shorter than one symbol window");
    const Mat templates = detail::mle_templates(cfg);
    std::vector<int> symbols(frames.rows);
    for (int i = 0; i < frames.rows; ++i) symbols[i] = detail::mle_detect_window(frames.row(i), templates);
    return symbols;
}

// Coherent BPSK bit error rate Q(sqrt(2 Eb/N0)) = erfc(sqrt(Eb/N0)) / 2.
inline double theoretical_ber_bpsk(double ebn0_db) {
    if (std::isinf(ebn0_db)) return ebn0_db > 0 ? 0.0 : 0.5;
    const double ebn0 = std::pow(10.0, ebn0_db / 10.0);
    return 0.5 * std::erfc(std::sqrt(ebn0));
}

}  // namespace swacdem
