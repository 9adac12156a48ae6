#pragma once

// Experiment orchestration: pipeline training, BER/accuracy measurement,
// the three experiments (fixed-channel BER sweep, varying-carrier sweep,
// accuracy versus training-set size) and the CSV outputs.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "swacdem/artifact.hpp"
#include "swacdem/baseline.hpp"
#include "swacdem/classify.hpp"
#include "swacdem/common.hpp"
#include "swacdem/dataset.hpp"
#include "swacdem/dbn.hpp"
#include "swacdem/sigproc.hpp"

namespace swacdem {

struct BerPoint {
    double snr_db = 0.0;
    long long bit_errors = 0;
    long long bits_tested = 0;
    double ber = 0.0;
};

struct BerCurve {
    std::string method;  // DBN-NN | DBN-CNN | MLE | MLE-doppler
    int scheme_order = 2;
    std::vector<BerPoint> points;  // sorted by snr_db
};

struct AccuracyPoint {
    std::string method;
    int scheme_order = 2;
    int train_periods = 0;
    double accuracy = 0.0;
};

inline int bit_errors_between(int a, int b) { return std::popcount(static_cast<unsigned>(a ^ b)); }

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// Bit-error counts of predicted vs true labels, grouped by the frame's grid
// SNR value, emitted in grid order.
inline BerCurve tally_curve(const std::string& method, const PskScheme& scheme,
                            const std::vector<double>& grid, const LabeledFrames& frames,
                            const std::vector<int>& predicted) {
    if (static_cast<int>(predicted.size()) != frames.size())
        throw config_error("tally_curve: prediction count mismatch");
    BerCurve curve;
    curve.method = method;
    curve.scheme_order = scheme.order;
    for (double snr : grid) {
        BerPoint pt;
        pt.snr_db = snr;
        for (int i = 0; i < frames.size(); ++i) {
            if (frames.snr_db[i] != snr) continue;
            pt.bit_errors += bit_errors_between(frames.batch.labels[i], predicted[i]);
            pt.bits_tested += scheme.bits_per_symbol;
        }
        if (pt.bits_tested > 0) {
            pt.ber = static_cast<double>(pt.bit_errors) / static_cast<double>(pt.bits_tested);
            curve.points.push_back(pt);
        }
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const BerPoint& a, const BerPoint& b) { return a.snr_db < b.snr_db; });
    return curve;
}

}  // namespace detail

inline void write_ber_csv(const std::string& path, const std::vector<BerCurve>& curves) {
    std::string out = "method,scheme,snr_db,bit_errors,bits_tested,ber\n";
    for (const BerCurve& c : curves)
        for (const BerPoint& p : c.points) {
            out += c.method;
            out += ',';
            out += std::to_string(c.scheme_order);
            out += ',';
            out += detail::fmt_double(p.snr_db);
            out += ',';
            out += std::to_string(p.bit_errors);
            out += ',';
            out += std::to_string(p.bits_tested);
            out += ',';
            out += detail::fmt_double(p.ber);
            out += '\n';
        }
    binio::write_file(path, std::vector<unsigned char>(out.begin(), out.end()));
}

inline void write_accuracy_csv(const std::string& path, const std::vector<AccuracyPoint>& points) {
    std::string out = "method,scheme,train_periods,accuracy\n";
    for (const AccuracyPoint& p : points) {
        out += p.method;
        out += ',';
        out += std::to_string(p.scheme_order);
        out += ',';
        out += std::to_string(p.train_periods);
        out += ',';
        out += detail::fmt_double(p.accuracy);
        out += '\n';
    }
    binio::write_file(path, std::vector<unsigned char>(out.begin(), out.end()));
}

// ---------------------------------------------------------------------------
// Pipeline training and evaluation

inline LabeledImages make_images(const DbnModel& dbn, const NormStats& stats, const LabeledFrames& frames) {
    LabeledImages set;
    set.images = extract_features_batch(dbn, normalize_frames(frames.batch.frames, stats));
    set.labels = frames.batch.labels;
    return set;
}

// Layer-1 mean squared reconstruction error, a cheap health figure recorded
// in the artifact metadata.
inline double dbn_reconstruction_error(const DbnModel& model, const Mat& normalized_frames, int max_rows = 256) {
    if (model.layers.empty() || normalized_frames.rows == 0) return 0.0;
    const int n = std::min(max_rows, normalized_frames.rows);
    const RbmLayer& l0 = model.layers.front();
    double err = 0.0;
    std::vector<double> v(normalized_frames.cols);
    for (int i = 0; i < n; ++i) {
        v.assign(normalized_frames.row(i), normalized_frames.row(i) + normalized_frames.cols);
        const std::vector<double> rec = visible_activation(l0, hidden_activation(l0, v));
        for (size_t k = 0; k < v.size(); ++k) err += (v[k] - rec[k]) * (v[k] - rec[k]);
    }
    return err / (static_cast<double>(n) * normalized_frames.cols);
}

// Feature images standardized with the artifact's stored moments; this is
// what both classifiers consume.
inline LabeledImages make_classifier_inputs(const DbnModel& dbn, const NormStats& stats,
                                            const FeatureMoments& fm, const LabeledFrames& frames) {
    LabeledImages set = make_images(dbn, stats, frames);
    standardize_images(set.images, fm);
    return set;
}

// Trains DBN + both classifiers on a dataset and packages the artifact.
inline ModelArtifact train_pipelines(const DatasetSplit& ds, const ExperimentConfig& cfg,
                                     std::uint64_t pipeline_seed) {
    const Mat train_frames = normalize_frames(ds.train.batch.frames, ds.stats);

    DbnTrainSpec dbn_spec = cfg.dbn;
    dbn_spec.rng_seed = derive_seed(pipeline_seed, 0x1);
    const DbnModel dbn = train_dbn_greedy(train_frames, cfg.dbn_geometry, dbn_spec);

    LabeledImages train_imgs{extract_features_batch(dbn, train_frames), ds.train.batch.labels};
    const FeatureMoments fm = fit_feature_moments(train_imgs.images);
    standardize_images(train_imgs.images, fm);
    const LabeledImages val_imgs = make_classifier_inputs(dbn, ds.stats, fm, ds.val);

    ClassifierTrainConfig dense_cfg = cfg.dense_cfg;
    dense_cfg.rng_seed = derive_seed(pipeline_seed, 0x2);
    TrainResult<DenseNet> dense = train_dense(paper_dense_net(ds.scheme.order, derive_seed(pipeline_seed, 0x3)),
                                              train_imgs, val_imgs, dense_cfg);

    ClassifierTrainConfig conv_cfg = cfg.conv_cfg;
    conv_cfg.rng_seed = derive_seed(pipeline_seed, 0x4);
    TrainResult<ConvNet> conv = train_conv(paper_conv_net(ds.scheme.order, derive_seed(pipeline_seed, 0x5)),
                                           train_imgs, val_imgs, conv_cfg);

    ModelArtifact artifact;
    artifact.scheme = ds.scheme;
    artifact.mod = ds.mod;
    artifact.stats = ds.stats;
    artifact.moments = fm;
    artifact.dbn = dbn;
    artifact.dense = std::move(dense.net);
    artifact.conv = std::move(conv.net);
    artifact.meta.master_seed = pipeline_seed;
    artifact.meta.dbn_spec = dbn_spec;
    artifact.meta.dense_cfg = dense_cfg;
    artifact.meta.conv_cfg = conv_cfg;
    artifact.meta.dbn_final_recon_error = dbn_reconstruction_error(dbn, train_frames);
    artifact.meta.dense_final_val_loss = dense.history.val_loss.empty() ? 0.0 : dense.history.val_loss.back();
    artifact.meta.conv_final_val_loss = conv.history.val_loss.empty() ? 0.0 : conv.history.val_loss.back();
    artifact.meta.train_split_hash = ds.train_hash;
    return artifact;
}

inline std::vector<int> predict_labels_dense(const DenseNet& net, const LabeledImages& set) {
    const Mat probs = dense_class_probs_batch(net, set.images);
    std::vector<int> out(probs.rows);
    for (int i = 0; i < probs.rows; ++i) {
        int best = 0;
        const double* pi = probs.row(i);
        for (int j = 1; j < probs.cols; ++j)
            if (pi[j] > pi[best]) best = j;
        out[i] = best;
    }
    return out;
}

inline std::vector<int> predict_labels_conv(const ConvNet& net, const LabeledImages& set) {
    std::vector<int> out(set.size());
    for (int i = 0; i < set.size(); ++i) out[i] = conv_forward_flat(net, set.images.row(i)).label;
    return out;
}

// Evaluates the learned demodulators of an artifact over a test split,
// grouping by the per-frame grid SNR. The artifact's normalization stats are
// used verbatim; their provenance must match the dataset they came from when
// both are supplied by file (checked by the CLI).
inline std::vector<BerCurve> evaluate_model_curves(const ModelArtifact& artifact, const LabeledFrames& test,
                                                   const std::vector<double>& grid) {
    std::vector<BerCurve> curves;
    const LabeledImages imgs = make_classifier_inputs(artifact.dbn, artifact.stats, artifact.moments, test);
    if (artifact.dense)
        curves.push_back(detail::tally_curve("DBN-NN", artifact.scheme, grid, test,
                                             predict_labels_dense(*artifact.dense, imgs)));
    if (artifact.conv)
        curves.push_back(detail::tally_curve("DBN-CNN", artifact.scheme, grid, test,
                                             predict_labels_conv(*artifact.conv, imgs)));
    return curves;
}

inline BerCurve evaluate_mle_on_frames(const std::string& method, const LabeledFrames& test,
                                       const PskScheme& scheme, const ModulationConfig& mod,
                                       const std::vector<double>& grid) {
    const MleConfig mle{scheme, mod};
    return detail::tally_curve(method, scheme, grid, test, mle_demodulate_frames(test.batch.frames, mle));
}

// Baseline-only curve on dedicated alpha = 1 streams (the Fig.-5 protocol
// for the MLE reference, and the analytic-agreement acceptance runs).
inline BerCurve mle_stream_curve(const PskScheme& scheme, const ModulationConfig& mod,
                                 const std::vector<double>& grid, bool grid_is_per_bit, int symbols_per_point,
                                 std::uint64_t seed) {
    BerCurve curve;
    curve.method = "MLE";
    curve.scheme_order = scheme.order;
    const MleConfig mle{scheme, mod};
    constexpr int kChunk = 4096;
    int point_index = 0;
    for (double grid_snr : grid) {
        const double sample_snr =
            grid_is_per_bit ? ebn0_db_to_snr_db(grid_snr, scheme, mod.samples_per_symbol) : grid_snr;
        BerPoint pt;
        pt.snr_db = grid_snr;
        const std::uint64_t point_seed = derive_seed(seed, 0xb000 + point_index++);
        int remaining = symbols_per_point;
        std::uint64_t chunk = 0;
        while (remaining > 0) {
            const int n = std::min(kChunk, remaining);
            remaining -= n;
            const std::uint64_t chunk_seed = derive_seed(point_seed, chunk++);
            Rng rng(chunk_seed);
            std::uniform_int_distribution<int> sym(0, scheme.order - 1);
            std::vector<int> symbols(n);
            for (int& s : symbols) s = sym(rng);
            Waveform w = modulate_psk(symbols, scheme, mod);
            w = add_awgn(w, sample_snr, derive_seed(chunk_seed, 0x11));
            const std::vector<int> detected = mle_demodulate(w, mle);
            for (int i = 0; i < n; ++i) pt.bit_errors += bit_errors_between(symbols[i], detected[i]);
            pt.bits_tested += static_cast<long long>(n) * scheme.bits_per_symbol;
        }
        pt.ber = static_cast<double>(pt.bit_errors) / static_cast<double>(pt.bits_tested);
        curve.points.push_back(pt);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// The three experiments

// Experiment 1: fixed channel, one trained pipeline per scheme, evaluated
// against the coherent MLE on the same test split.
inline std::vector<BerCurve> run_ber_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<BerCurve> curves;
    for (int order : cfg.scheme_orders) {
        const PskScheme scheme = PskScheme::of(order);
        const std::uint64_t scheme_seed = derive_seed(cfg.seed, 0xd5 + static_cast<std::uint64_t>(order));
        const DatasetSplit ds = generate_dataset(cfg, scheme, cfg.channel.alpha, scheme_seed);
        const ModelArtifact artifact = train_pipelines(ds, cfg, derive_seed(scheme_seed, 0x717));
        std::vector<BerCurve> model_curves = evaluate_model_curves(artifact, ds.test, cfg.channel.snr_db_grid);
        curves.insert(curves.end(), model_curves.begin(), model_curves.end());
        curves.push_back(evaluate_mle_on_frames("MLE", ds.test, scheme, cfg.mod, cfg.channel.snr_db_grid));
    }
    return curves;
}

// Experiment 2: the whole dataset (train, val, test) sees the randomized
// carrier; the MLE reference follows the paper's protocol and is fed
// Doppler-free signals, while the extension curve runs the MLE on the same
// Doppler-distorted test frames the learned models see.
inline std::vector<BerCurve> run_doppler_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<BerCurve> curves;
    for (int order : cfg.scheme_orders) {
        const PskScheme scheme = PskScheme::of(order);
        const std::uint64_t scheme_seed = derive_seed(cfg.seed, 0xd5 + static_cast<std::uint64_t>(order));
        const DatasetSplit ds = generate_dataset(cfg, scheme, cfg.doppler_alpha, scheme_seed);
        const ModelArtifact artifact = train_pipelines(ds, cfg, derive_seed(scheme_seed, 0x717));
        std::vector<BerCurve> model_curves = evaluate_model_curves(artifact, ds.test, cfg.channel.snr_db_grid);
        curves.insert(curves.end(), model_curves.begin(), model_curves.end());
        curves.push_back(mle_stream_curve(scheme, cfg.mod, cfg.channel.snr_db_grid, cfg.channel.snr_is_per_bit,
                                          cfg.mle_reference_symbols, derive_seed(scheme_seed, 0x3e)));
        BerCurve extension =
            evaluate_mle_on_frames("MLE-doppler", ds.test, scheme, cfg.mod, cfg.channel.snr_db_grid);
        curves.push_back(std::move(extension));
    }
    return curves;
}

inline double label_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw config_error("label_accuracy: size mismatch");
    int correct = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

// Experiment 3: nested training-set prefixes of increasing size, fixed test
// split; both pipelines retrained per rung (ladder entry 0 = full split).
inline std::vector<AccuracyPoint> run_accuracy_vs_trainsize(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<AccuracyPoint> points;
    for (int order : cfg.scheme_orders) {
        const PskScheme scheme = PskScheme::of(order);
        const std::uint64_t scheme_seed = derive_seed(cfg.seed, 0xacc + static_cast<std::uint64_t>(order));
        const DatasetSplit ds = generate_dataset(cfg, scheme, cfg.channel.alpha, scheme_seed);

        std::vector<int> sizes;
        for (int entry : cfg.acc_ladder) {
            int n = (entry == 0) ? ds.train.size() : std::min(entry, ds.train.size());
            if (n < 2) throw config_error("run_accuracy_vs_trainsize: ladder size too small");
            if (sizes.empty() || n > sizes.back()) sizes.push_back(n);
        }

        for (size_t rung = 0; rung < sizes.size(); ++rung) {
            DatasetSplit subset = ds;
            subset.train = ds.train.slice(0, sizes[rung]);
            subset.stats = fit_norm_stats(subset.train.batch.frames);
            subset.train_hash = detail::hash_frames(subset.train.batch.frames);
            const ModelArtifact artifact =
                train_pipelines(subset, cfg, derive_seed(scheme_seed, 0x900 + rung));
            const LabeledImages test_imgs =
                make_classifier_inputs(artifact.dbn, artifact.stats, artifact.moments, ds.test);
            points.push_back({"DBN-NN", order, sizes[rung],
                              label_accuracy(predict_labels_dense(*artifact.dense, test_imgs), test_imgs.labels)});
            points.push_back({"DBN-CNN", order, sizes[rung],
                              label_accuracy(predict_labels_conv(*artifact.conv, test_imgs), test_imgs.labels)});
        }
    }
    return points;
}

// Scatter export of the first three latent features for every frame of a
// split, with the symbol label and true received carrier.
inline void export_feature_scatter(const DbnModel& model, const NormStats& stats, const LabeledFrames& frames,
                                   const std::string& path) {
    const Mat features = extract_features_batch(model, normalize_frames(frames.batch.frames, stats));
    if (features.cols < 3) throw config_error("export_feature_scatter: model emits fewer than 3 features");
    std::string out = "feature1,feature2,feature3,symbol_label,carrier_hz\n";
    for (int i = 0; i < features.rows; ++i) {
        out += detail::fmt_double(features(i, 0));
        out += ',';
        out += detail::fmt_double(features(i, 1));
        out += ',';
        out += detail::fmt_double(features(i, 2));
        out += ',';
        out += std::to_string(frames.batch.labels[i]);
        out += ',';
        out += detail::fmt_double(frames.carrier_hz[i]);
        out += '\n';
    }
    binio::write_file(path, std::vector<unsigned char>(out.begin(), out.end()));
}

// ---------------------------------------------------------------------------
// Curve post-processing shared by the acceptance checks and the CLI

// Continuity correction for measured zero-error points: half an error over
// the tested bits.
inline double corrected_ber(const BerPoint& p) {
    return p.bit_errors > 0 ? p.ber : 0.5 / static_cast<double>(p.bits_tested);
}

// SNR at which a monotone-decreasing reference reaches `ber`; log-linear
// interpolation over (snr, ber) pairs with end extrapolation.
inline double snr_at_ber(const std::vector<std::pair<double, double>>& snr_ber, double ber) {
    if (snr_ber.size() < 2) throw config_error("snr_at_ber: need at least two reference points");
    std::vector<std::pair<double, double>> pts;  // (snr, log10 ber)
    for (const auto& [snr, b] : snr_ber) pts.emplace_back(snr, std::log10(b));
    const double target = std::log10(ber);
    // walk segments; curve assumed non-increasing in BER as SNR grows
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto [s0, b0] = pts[i];
        const auto [s1, b1] = pts[i + 1];
        if ((target <= b0 && target >= b1) || (target >= b0 && target <= b1)) {
            if (b0 == b1) return s0;
            return s0 + (target - b0) * (s1 - s0) / (b1 - b0);
        }
    }
    // extrapolate from the nearest end segment
    if (target > pts.front().second) {
        const auto [s0, b0] = pts[0];
        const auto [s1, b1] = pts[1];
        if (b0 == b1) return s0;
        return s0 + (target - b0) * (s1 - s0) / (b1 - b0);
    }
    const auto [s0, b0] = pts[pts.size() - 2];
    const auto [s1, b1] = pts.back();
    if (b0 == b1) return s1;
    return s0 + (target - b0) * (s1 - s0) / (b1 - b0);
}

inline std::vector<std::pair<double, double>> curve_to_pairs(const BerCurve& curve) {
    std::vector<std::pair<double, double>> pts;
    for (const BerPoint& p : curve.points) pts.emplace_back(p.snr_db, corrected_ber(p));
    return pts;
}

// Horizontal dB offset of a measured point against a reference curve:
// positive when the method needs that many more dB than the reference for
// the same BER.
inline double horizontal_offset_db(const BerPoint& point, const std::vector<std::pair<double, double>>& reference) {
    return point.snr_db - snr_at_ber(reference, corrected_ber(point));
}

// Analytic 2-PSK ML reference over a per-bit grid.
inline std::vector<std::pair<double, double>> analytic_bpsk_reference(const std::vector<double>& ebn0_grid) {
    std::vector<std::pair<double, double>> pts;
    for (double s : ebn0_grid) pts.emplace_back(s, theoretical_ber_bpsk(s));
    return pts;
}

}  // namespace swacdem
