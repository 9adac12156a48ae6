#pragma once

// Dataset generation and persistence. A dataset is built from independent
// transmissions: each transmission draws its Doppler factor from the
// configured carrier distribution and its SNR from the evaluation grid
// (round-robin, i.e. a uniform mixture), is modulated, channel-distorted and
// framed, and the resulting frames are concatenated in generation order and
// split 50/20/30 into contiguous blocks. Normalization stats come from the
// training split only.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "swacdem/binio.hpp"
#include "swacdem/classify.hpp"
#include "swacdem/common.hpp"
#include "swacdem/dbn.hpp"
#include "swacdem/sigproc.hpp"

namespace swacdem {

// Doppler factor model for one transmission. The varying-carrier experiment
// draws the received carrier from a truncated normal and realizes it as
// alpha = carrier / nominal_carrier; the fixed model is a point mass.
struct AlphaDistribution {
    enum class Kind { fixed, carrier_truncnormal };
    Kind kind = Kind::fixed;
    double fixed_value = 1.0;
    double mean_hz = 1000.0;
    double std_hz = 250.0;
    double min_hz = 500.0;
    double max_hz = 2000.0;

    static AlphaDistribution fixed(double alpha = 1.0) {
        AlphaDistribution d;
        d.kind = Kind::fixed;
        d.fixed_value = alpha;
        return d;
    }

    static AlphaDistribution carrier_normal(double mean, double std_dev, double lo, double hi) {
        AlphaDistribution d;
        d.kind = Kind::carrier_truncnormal;
        d.mean_hz = mean;
        d.std_hz = std_dev;
        d.min_hz = lo;
        d.max_hz = hi;
        return d;
    }

    // Draw of the received-carrier frequency given the nominal carrier.
    double draw_alpha(double nominal_carrier_hz, Rng& rng) const {
        if (kind == Kind::fixed) return fixed_value;
        std::normal_distribution<double> gauss(mean_hz, std_hz);
        double f = gauss(rng);
        // truncation by redraw, bounded; falls back to the clamp on exhaustion
        for (int tries = 0; (f < min_hz || f > max_hz) && tries < 64; ++tries) f = gauss(rng);
        f = std::clamp(f, min_hz, max_hz);
        return f / nominal_carrier_hz;
    }
};

struct ChannelGrid {
    std::vector<double> snr_db_grid{0.0, 2.0, 4.0, 6.0, 8.0};
    bool snr_is_per_bit = true;  // grid in Eb/N0 dB, converted per scheme for the channel
    AlphaDistribution alpha = AlphaDistribution::fixed(1.0);

    void validate() const {
        if (snr_db_grid.empty()) throw config_error("ChannelGrid: SNR grid is empty");
    }
};

struct ExperimentConfig {
    std::vector<int> scheme_orders{2, 4, 8};  // schemes covered by the sweeps
    ModulationConfig mod;
    ChannelGrid channel;
    AlphaDistribution doppler_alpha =
        AlphaDistribution::carrier_normal(1000.0, 250.0, 500.0, 2000.0);  // sweep-doppler protocol
    int dataset_size_periods = 8000;
    double split_train = 0.5;
    double split_val = 0.2;
    double split_test = 0.3;
    int symbols_per_transmission = 40;
    int frame_len = 120;
    double overlap_frac = 0.2;
    std::vector<int> dbn_geometry{120, 500, 784};
    DbnTrainSpec dbn;
    ClassifierTrainConfig dense_cfg;
    ClassifierTrainConfig conv_cfg{0.2, 60, 8, 0, 10};  // small batches suit the conv net
    std::vector<int> acc_ladder{500, 1000, 2000, 0};  // 0 = full train split
    int mle_reference_symbols = 20000;                // per SNR point, for baseline-only curves
    std::uint64_t seed = 1;

    void validate() const {
        for (int m : scheme_orders) PskScheme::of(m);
        if (scheme_orders.empty()) throw config_error("ExperimentConfig: no schemes configured");
        mod.validate();
        channel.validate();
        if (dataset_size_periods < 100) throw config_error("ExperimentConfig: dataset_size_periods must be >= 100");
        const double s = split_train + split_val + split_test;
        if (std::fabs(s - 1.0) > 1e-9) throw config_error("ExperimentConfig: split fractions must sum to 1");
        if (split_train <= 0.0 || split_val <= 0.0 || split_test <= 0.0)
            throw config_error("ExperimentConfig: split fractions must be positive");
        if (symbols_per_transmission < 2)
            throw config_error("ExperimentConfig: symbols_per_transmission must be >= 2");
        if (frame_len < 1) throw config_error("ExperimentConfig: frame_len must be >= 1");
        const int hop = frame_hop(frame_len, overlap_frac);
        if (hop != mod.samples_per_symbol)
            throw config_error("ExperimentConfig: frame hop " + std::to_string(hop) +
                               " must equal samples_per_symbol for frame/symbol alignment");
        if (dbn_geometry.size() < 2 || dbn_geometry.front() != frame_len || dbn_geometry.back() != kFeatureImageSize)
            throw config_error("ExperimentConfig: dbn geometry must run from frame_len to 784");
        dbn.validate();
        dense_cfg.validate();
        conv_cfg.validate();
        if (mle_reference_symbols < 100) throw config_error("ExperimentConfig: mle_reference_symbols too small");
    }
};

// Frames plus the per-frame channel ground truth the experiments group by.
struct LabeledFrames {
    FrameBatch batch;
    std::vector<double> snr_db;      // grid value (per-bit dB if the grid is per-bit)
    std::vector<double> alpha;       // Doppler factor of the originating transmission
    std::vector<double> carrier_hz;  // alpha * nominal carrier

    int size() const { return batch.frames.rows; }

    void append(const FrameBatch& frames, double snr, double a, double carrier) {
        if (batch.frames.rows == 0) {
            batch = frames;
        } else {
            if (frames.frame_len != batch.frame_len || frames.hop != batch.hop)
                throw config_error("LabeledFrames: mixed frame geometry");
            const int old_rows = batch.frames.rows;
            Mat merged(old_rows + frames.frames.rows, batch.frames.cols);
            std::copy(batch.frames.a.begin(), batch.frames.a.end(), merged.a.begin());
            std::copy(frames.frames.a.begin(), frames.frames.a.end(),
                      merged.a.begin() + batch.frames.size());
            batch.frames = std::move(merged);
            batch.labels.insert(batch.labels.end(), frames.labels.begin(), frames.labels.end());
        }
        snr_db.resize(batch.frames.rows, snr);
        alpha.resize(batch.frames.rows, a);
        carrier_hz.resize(batch.frames.rows, carrier);
    }

    LabeledFrames slice(int begin, int end) const {
        LabeledFrames out;
        out.batch.frame_len = batch.frame_len;
        out.batch.hop = batch.hop;
        out.batch.frames = Mat(end - begin, batch.frames.cols);
        std::copy(batch.frames.row(begin), batch.frames.row(begin) + static_cast<size_t>(end - begin) * batch.frames.cols,
                  out.batch.frames.a.begin());
        out.batch.labels.assign(batch.labels.begin() + begin, batch.labels.begin() + end);
        out.snr_db.assign(snr_db.begin() + begin, snr_db.begin() + end);
        out.alpha.assign(alpha.begin() + begin, alpha.begin() + end);
        out.carrier_hz.assign(carrier_hz.begin() + begin, carrier_hz.begin() + end);
        return out;
    }
};

struct DatasetSplit {
    PskScheme scheme;
    ModulationConfig mod;
    int frame_len = 120;
    double overlap_frac = 0.2;
    bool snr_is_per_bit = true;
    LabeledFrames train, val, test;
    NormStats stats;                // fitted on train only
    std::uint64_t train_hash = 0;   // fnv1a64 over the raw training frames
};

namespace detail {

// Frames one received transmission so that frame i starts at symbol i's
// position in received time (round(i*hop/alpha)). At alpha == 1 this is
// exactly the frame_signal/label_frames geometry.
inline FrameBatch frame_transmission(const Waveform& rx, const std::vector<int>& symbols,
                                     const ModulationConfig& mod, int frame_len, double overlap_frac,
                                     double alpha) {
    const int hop = frame_hop(frame_len, overlap_frac);
    if (alpha == 1.0) {
        const Mat frames = frame_signal(rx, frame_len, overlap_frac);
        return label_frames(frames, symbols, mod, frame_len, overlap_frac);
    }
    FrameBatch batch;
    batch.frame_len = frame_len;
    batch.hop = hop;
    std::vector<std::pair<size_t, int>> starts;  // (offset, symbol)
    for (size_t i = 0; i < symbols.size(); ++i) {
        const size_t start = static_cast<size_t>(std::llround(i * hop / alpha));
        if (start + frame_len > rx.samples.size()) break;
        starts.emplace_back(start, symbols[i]);
    }
    batch.frames = Mat(static_cast<int>(starts.size()), frame_len);
    batch.labels.resize(starts.size());
    for (size_t i = 0; i < starts.size(); ++i) {
        std::copy_n(rx.samples.begin() + starts[i].first, frame_len, batch.frames.row(static_cast<int>(i)));
        batch.labels[i] = starts[i].second;
    }
    return batch;
}

inline std::uint64_t hash_frames(const Mat& frames) {
    return fnv1a64(frames.a.data(), frames.a.size() * sizeof(double));
}

}  // namespace detail

// Full generation pipeline for one scheme. `alpha_dist` is usually
// cfg.channel.alpha; the Doppler sweep passes cfg.doppler_alpha instead.
inline DatasetSplit generate_dataset(const ExperimentConfig& cfg, const PskScheme& scheme,
                                     const AlphaDistribution& alpha_dist, std::uint64_t seed) {
    cfg.validate();
    const int spt = cfg.symbols_per_transmission;
    const int num_tx = (cfg.dataset_size_periods + spt - 1) / spt;
    const auto& grid = cfg.channel.snr_db_grid;

    LabeledFrames all;
    for (int t = 0; t < num_tx; ++t) {
        const std::uint64_t tx_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
        Rng rng(tx_seed);
        std::uniform_int_distribution<int> sym(0, scheme.order - 1);
        const int n_sym = std::min(spt, cfg.dataset_size_periods - t * spt);
        if (n_sym < 2) break;
        std::vector<int> symbols(n_sym);
        for (int& s : symbols) s = sym(rng);

        const double alpha = alpha_dist.draw_alpha(cfg.mod.carrier_hz, rng);
        const double grid_snr = grid[t % grid.size()];
        const double sample_snr =
            cfg.channel.snr_is_per_bit ? ebn0_db_to_snr_db(grid_snr, scheme, cfg.mod.samples_per_symbol) : grid_snr;

        Waveform w = modulate_psk(symbols, scheme, cfg.mod);
        w = apply_doppler(w, alpha);
        w = add_awgn(w, sample_snr, derive_seed(tx_seed, 0xa7));

        const FrameBatch frames =
            detail::frame_transmission(w, symbols, cfg.mod, cfg.frame_len, cfg.overlap_frac, alpha);
        all.append(frames, grid_snr, alpha, alpha * cfg.mod.carrier_hz);
    }
    const int n = all.size();
    if (n < 3) throw config_error("generate_dataset: configuration yields fewer than 3 frames");

    const int n_train = static_cast<int>(std::lround(cfg.split_train * n));
    const int n_val = static_cast<int>(std::lround(cfg.split_val * n));
    if (n_train < 1 || n_val < 1 || n_train + n_val >= n)
        throw config_error("generate_dataset: split fractions leave an empty split");

    DatasetSplit ds;
    ds.scheme = scheme;
    ds.mod = cfg.mod;
    ds.frame_len = cfg.frame_len;
    ds.overlap_frac = cfg.overlap_frac;
    ds.snr_is_per_bit = cfg.channel.snr_is_per_bit;
    ds.train = all.slice(0, n_train);
    ds.val = all.slice(n_train, n_train + n_val);
    ds.test = all.slice(n_train + n_val, n);
    ds.stats = fit_norm_stats(ds.train.batch.frames);
    ds.train_hash = detail::hash_frames(ds.train.batch.frames);
    return ds;
}

inline DatasetSplit generate_dataset(const ExperimentConfig& cfg) {
    return generate_dataset(cfg, PskScheme::of(cfg.scheme_orders.front()), cfg.channel.alpha, cfg.seed);
}

// ---------------------------------------------------------------------------
// Dataset file: magic "SWACDS01" | u32 version | payload | u32 CRC-32.

namespace detail {

constexpr char kDatasetMagic[9] = "SWACDS01";

inline void write_labeled(binio::Writer& w, const LabeledFrames& lf) {
    binio::mat_write(w, lf.batch.frames);
    binio::ivec_write(w, lf.batch.labels);
    w.i32(lf.batch.frame_len);
    w.i32(lf.batch.hop);
    binio::vec_write(w, lf.snr_db);
    binio::vec_write(w, lf.alpha);
    binio::vec_write(w, lf.carrier_hz);
}

inline LabeledFrames read_labeled(binio::Reader& r) {
    LabeledFrames lf;
    lf.batch.frames = binio::mat_read(r);
    lf.batch.labels = binio::ivec_read(r);
    lf.batch.frame_len = r.i32();
    lf.batch.hop = r.i32();
    lf.snr_db = binio::vec_read(r);
    lf.alpha = binio::vec_read(r);
    lf.carrier_hz = binio::vec_read(r);
    return lf;
}

}  // namespace detail

inline void save_dataset(const DatasetSplit& ds, const std::string& path) {
    binio::Writer out;
    out.raw(detail::kDatasetMagic, 8);
    out.u32(1);
    out.i32(ds.scheme.order);
    out.f64(ds.mod.carrier_hz);
    out.f64(ds.mod.sample_rate_hz);
    out.i32(ds.mod.samples_per_symbol);
    out.i32(ds.frame_len);
    out.f64(ds.overlap_frac);
    out.u8(ds.snr_is_per_bit ? 1 : 0);
    detail::write_labeled(out, ds.train);
    detail::write_labeled(out, ds.val);
    detail::write_labeled(out, ds.test);
    out.f64(ds.stats.min);
    out.f64(ds.stats.max);
    out.u64(ds.train_hash);
    out.u32(binio::crc32(out.bytes.data(), out.bytes.size()));
    binio::write_file(path, out.bytes);
}

inline DatasetSplit load_dataset(const std::string& path) {
    const std::vector<unsigned char> bytes = binio::read_file(path);
    if (bytes.size() < 16) throw io_error(path + ": truncated dataset file");
    if (std::memcmp(bytes.data(), detail::kDatasetMagic, 8) != 0)
        throw io_error(path + ": not a dataset file (bad magic)");
    const std::uint32_t computed = binio::crc32(bytes.data(), bytes.size() - 4);
    binio::Reader tail(bytes.data() + bytes.size() - 4, 4, path);
    if (tail.u32() != computed) throw io_error(path + ": dataset CRC mismatch");
    binio::Reader r(bytes.data(), bytes.size() - 4, path);
    r.pos = 8;
    const std::uint32_t version = r.u32();
    if (version != 1) throw io_error(path + ": unsupported dataset version " + std::to_string(version));
    DatasetSplit ds;
    ds.scheme = PskScheme::of(r.i32());
    ds.mod.carrier_hz = r.f64();
    ds.mod.sample_rate_hz = r.f64();
    ds.mod.samples_per_symbol = r.i32();
    ds.frame_len = r.i32();
    ds.overlap_frac = r.f64();
    ds.snr_is_per_bit = r.u8() != 0;
    ds.train = detail::read_labeled(r);
    ds.val = detail::read_labeled(r);
    ds.test = detail::read_labeled(r);
    ds.stats.min = r.f64();
    ds.stats.max = r.f64();
    ds.train_hash = r.u64();
    return ds;
}

}  // namespace swacdem
