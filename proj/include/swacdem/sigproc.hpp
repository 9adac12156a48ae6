#pragma once

// Passband PSK waveform generation, the Doppler+AWGN channel, and the
// frame/label geometry that feeds the feature extractor.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "swacdem/common.hpp"

namespace swacdem {

struct PskScheme {
    int order = 2;            // M, one of 2/4/8/16
    int bits_per_symbol = 1;  // log2(M)

    static PskScheme of(int m) {
        if (m != 2 && m != 4 && m != 8 && m != 16)
            throw config_error("PskScheme: order must be one of 2, 4, 8, 16 (got " + std::to_string(m) + ")");
        PskScheme s;
        s.order = m;
        s.bits_per_symbol = (m == 2) ? 1 : (m == 4) ? 2 : (m == 8) ? 3 : 4;
        return s;
    }

    // theta_m = 2*pi*m/M, natural binary order, no offset.
    double phase(int symbol) const { return 2.0 * std::numbers::pi * symbol / order; }
};

struct ModulationConfig {
    double carrier_hz = 1000.0;
    double sample_rate_hz = 8000.0;
    int samples_per_symbol = 96;

    void validate() const {
        if (!(carrier_hz > 0.0) || !(sample_rate_hz > 0.0))
            throw config_error("ModulationConfig: carrier and sample rate must be positive");
        if (carrier_hz >= sample_rate_hz / 2.0)
            throw config_error("ModulationConfig: carrier violates Nyquist (f_c >= f_s/2)");
        if (samples_per_symbol < 2) throw config_error("ModulationConfig: samples_per_symbol must be >= 2");
        if (carrier_hz * symbol_period_s() < 1.0)
            throw config_error("ModulationConfig: less than one carrier cycle per symbol");
    }

    double symbol_period_s() const { return samples_per_symbol / sample_rate_hz; }
};

struct Waveform {
    std::vector<double> samples;
    double sample_rate_hz = 8000.0;

    size_t size() const { return samples.size(); }
};

struct ChannelConfig {
    double doppler_alpha = 1.0;
    double snr_db = 10.0;  // per-sample signal power over noise variance
    std::uint64_t rng_seed = 0;

    static constexpr double kAlphaMin = 0.25;
    static constexpr double kAlphaMax = 4.0;

    void validate() const {
        if (!(doppler_alpha >= kAlphaMin && doppler_alpha <= kAlphaMax))
            throw config_error("ChannelConfig: doppler_alpha outside [0.25, 4]");
    }
};

struct FrameBatch {
    Mat frames;               // num_frames x frame_len
    std::vector<int> labels;  // symbol index per frame
    int frame_len = 120;
    int hop = 96;
};

// Noise-off sentinel for add_awgn / SNR grids.
inline constexpr double kNoiselessSnrDb = std::numeric_limits<double>::infinity();

inline std::vector<int> map_bits_to_symbols(const std::vector<std::uint8_t>& bits, const PskScheme& scheme) {
    const int bps = scheme.bits_per_symbol;
    if (bits.size() % static_cast<size_t>(bps) != 0)
        throw config_error("map_bits_to_symbols: bit count " + std::to_string(bits.size()) +
                           " not divisible by bits/symbol " + std::to_string(bps) +
                           "; pad the stream to a multiple of " + std::to_string(bps));
    std::vector<int> symbols;
    symbols.reserve(bits.size() / bps);
    for (size_t i = 0; i < bits.size(); i += bps) {
        int m = 0;
        for (int j = 0; j < bps; ++j) {
            const std::uint8_t b = bits[i + j];
            if (b > 1) throw config_error("map_bits_to_symbols: input is not a 0/1 stream");
            m = (m << 1) | b;  // MSB first
        }
        symbols.push_back(m);
    }
    return symbols;
}

inline std::vector<std::uint8_t> symbols_to_bits(const std::vector<int>& symbols, const PskScheme& scheme) {
    const int bps = scheme.bits_per_symbol;
    std::vector<std::uint8_t> bits;
    bits.reserve(symbols.size() * bps);
    for (int m : symbols) {
        if (m < 0 || m >= scheme.order) throw config_error("symbols_to_bits: symbol index out of range");
        for (int j = bps - 1; j >= 0; --j) bits.push_back(static_cast<std::uint8_t>((m >> j) & 1));
    }
    return bits;
}

// x(t) = cos(2*pi*f_c*t + theta_m), t restarting at each symbol boundary.
inline Waveform modulate_psk(const std::vector<int>& symbols, const PskScheme& scheme,
                             const ModulationConfig& cfg) {
    cfg.validate();
    Waveform w;
    w.sample_rate_hz = cfg.sample_rate_hz;
    w.samples.resize(symbols.size() * static_cast<size_t>(cfg.samples_per_symbol));
    const double wc = 2.0 * std::numbers::pi * cfg.carrier_hz / cfg.sample_rate_hz;
    size_t out = 0;
    for (int m : symbols) {
        if (m < 0 || m >= scheme.order)
            throw config_error("modulate_psk: symbol index " + std::to_string(m) + " out of range for M=" +
                               std::to_string(scheme.order));
        const double theta = scheme.phase(m);
        for (int k = 0; k < cfg.samples_per_symbol; ++k) w.samples[out++] = std::cos(wc * k + theta);
    }
    return w;
}

namespace detail {

// Windowed-sinc interpolation kernel, Hann window, 16 taps per side.
inline constexpr int kSincHalfWidth = 16;

inline double sinc_hann(double d) {
    const double ad = std::fabs(d);
    if (ad >= kSincHalfWidth + 1.0) return 0.0;
    double s;
    if (ad < 1e-12) {
        s = 1.0;
    } else {
        const double pd = std::numbers::pi * d;
        s = std::sin(pd) / pd;
    }
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * d / (kSincHalfWidth + 1.0)));
    return s * w;
}

}  // namespace detail

// s(j) ~= x(alpha * j / f_s) by band-limited interpolation; output length
// floor(len/alpha). alpha == 1 reproduces the input exactly (the kernel is
// 1 at lag 0 and vanishes at the other integer lags).
inline Waveform apply_doppler(const Waveform& w, double alpha) {
    if (!(alpha >= ChannelConfig::kAlphaMin && alpha <= ChannelConfig::kAlphaMax))
        throw config_error("apply_doppler: alpha outside [0.25, 4]");
    Waveform out;
    out.sample_rate_hz = w.sample_rate_hz;
    if (alpha == 1.0) {
        out.samples = w.samples;
        return out;
    }
    const int n = static_cast<int>(w.samples.size());
    const int out_len = static_cast<int>(std::floor(n / alpha));
    out.samples.assign(static_cast<size_t>(std::max(out_len, 0)), 0.0);
    const int H = detail::kSincHalfWidth;
    for (int j = 0; j < out_len; ++j) {
        const double pos = alpha * j;
        const int k0 = std::max(0, static_cast<int>(std::ceil(pos)) - H);
        const int k1 = std::min(n - 1, static_cast<int>(std::floor(pos)) + H);
        double acc = 0.0;
        for (int k = k0; k <= k1; ++k) acc += w.samples[k] * detail::sinc_hann(pos - k);
        out.samples[j] = acc;
    }
    return out;
}

// Adds zero-mean white Gaussian noise at sigma^2 = P_signal / 10^(snr/10),
// with P_signal the mean square of the input. +inf disables the noise.
inline Waveform add_awgn(const Waveform& w, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0.0) return w;
    if (w.samples.empty()) throw config_error("add_awgn: empty waveform");
    double p = 0.0;
    for (double x : w.samples) p += x * x;
    p /= static_cast<double>(w.samples.size());
    if (p <= 0.0) throw config_error("add_awgn: zero-power input, SNR undefined");
    const double sigma = std::sqrt(p * std::pow(10.0, -snr_db / 10.0));
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Waveform out;
    out.sample_rate_hz = w.sample_rate_hz;
    out.samples.resize(w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i) out.samples[i] = w.samples[i] + gauss(rng);
    return out;
}

inline int frame_hop(int frame_len, double overlap_frac) {
    const int overlap = static_cast<int>(std::lround(overlap_frac * frame_len));
    const int hop = frame_len - overlap;
    if (hop < 1) throw config_error("frame geometry: hop < 1 (overlap too large)");
    return hop;
}

inline int frame_count(size_t signal_len, int frame_len, int hop) {
    if (signal_len < static_cast<size_t>(frame_len)) return 0;
    return static_cast<int>((signal_len - frame_len) / hop) + 1;
}

// Overlapping frames: frame i = samples [i*hop, i*hop + frame_len). The
// trailing remainder shorter than a frame is dropped.
inline Mat frame_signal(const Waveform& w, int frame_len = 120, double overlap_frac = 0.2) {
    if (frame_len < 1) throw config_error("frame_signal: frame_len must be >= 1");
    if (w.samples.size() < static_cast<size_t>(frame_len))
        throw config_error("frame_signal: signal shorter than one frame (" +
                           std::to_string(w.samples.size()) + " < " + std::to_string(frame_len) + ")");
    const int hop = frame_hop(frame_len, overlap_frac);
    const int nf = frame_count(w.samples.size(), frame_len, hop);
    Mat frames(nf, frame_len);
    for (int i = 0; i < nf; ++i)
        std::copy_n(w.samples.begin() + static_cast<size_t>(i) * hop, frame_len, frames.row(i));
    return frames;
}

// Frame i starts exactly at symbol i (hop == samples_per_symbol), so frame i
// carries symbol i plus the overlap tail of symbol i+1 as context.
inline FrameBatch label_frames(const Mat& frames, const std::vector<int>& symbols,
                               const ModulationConfig& cfg, int frame_len = 120, double overlap_frac = 0.2) {
    const int hop = frame_hop(frame_len, overlap_frac);
    if (hop != cfg.samples_per_symbol)
        throw config_error("label_frames: hop " + std::to_string(hop) + " != samples_per_symbol " +
                           std::to_string(cfg.samples_per_symbol) + "; frame/symbol alignment broken");
    if (frames.cols != frame_len) throw config_error("label_frames: frame width mismatch");
    const size_t signal_len = symbols.size() * static_cast<size_t>(cfg.samples_per_symbol);
    const int expected = frame_count(signal_len, frame_len, hop);
    if (frames.rows != expected)
        throw config_error("label_frames: got " + std::to_string(frames.rows) + " frames, geometry implies " +
                           std::to_string(expected));
    FrameBatch batch;
    batch.frames = frames;
    batch.frame_len = frame_len;
    batch.hop = hop;
    batch.labels.assign(symbols.begin(), symbols.begin() + expected);
    return batch;
}

// Per-sample SNR (dB) that realizes a given per-bit Eb/N0 (dB) for M-PSK at
// samples_per_symbol samples per symbol: rho = 2 * log2(M) * (Eb/N0) / N.
inline double ebn0_db_to_snr_db(double ebn0_db, const PskScheme& scheme, int samples_per_symbol) {
    if (std::isinf(ebn0_db)) return ebn0_db;
    return ebn0_db + 10.0 * std::log10(2.0 * scheme.bits_per_symbol / static_cast<double>(samples_per_symbol));
}

}  // namespace swacdem
