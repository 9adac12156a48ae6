// Acceptance suite: one pass/fail line per criterion. Criteria 5-7 train the
// full desk-scale pipelines and dominate the runtime. An optional argv
// filter runs a subset, e.g. `acceptance 1 4 9`.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "oracle_fft.hpp"
#include "swacdem/swacdem.hpp"

using namespace swacdem;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string title;
    bool passed = false;
    std::string note;
    double seconds = 0.0;
};

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

RbmLayer random_rbm(int uv, int uh, std::uint64_t seed, double scale) {
    RbmLayer l;
    l.weights = Mat(uh, uv);
    l.vbias.resize(uv);
    l.hbias.resize(uh);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& x : l.weights.a) x = u(rng);
    for (double& x : l.vbias) x = u(rng);
    for (double& x : l.hbias) x = u(rng);
    return l;
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-4}); }

// Desk-scale configuration for the experiment criteria.
ExperimentConfig experiment_config() {
    ExperimentConfig cfg;
    cfg.scheme_orders = {2};
    cfg.dataset_size_periods = 8000;
    cfg.symbols_per_transmission = 40;
    cfg.channel.snr_db_grid = {0.0, 2.0, 4.0, 6.0, 8.0};
    cfg.channel.snr_is_per_bit = true;
    cfg.dbn_geometry = {120, 500, 784};
    cfg.dbn.epochs = 10;
    cfg.dbn.learning_rate = 0.05;
    cfg.dbn.batch_size = 64;
    cfg.dense_cfg.learning_rate = 0.1;
    cfg.dense_cfg.epochs = 80;
    cfg.dense_cfg.batch_size = 64;
    cfg.dense_cfg.early_stop_patience = 15;
    cfg.conv_cfg.learning_rate = 0.2;
    cfg.conv_cfg.epochs = 60;
    cfg.conv_cfg.batch_size = 8;
    cfg.conv_cfg.early_stop_patience = 10;
    cfg.mle_reference_symbols = 20000;
    cfg.seed = 2027;
    return cfg;
}

const BerCurve& find_curve(const std::vector<BerCurve>& curves, const std::string& method, int order) {
    for (const BerCurve& c : curves)
        if (c.method == method && c.scheme_order == order) return c;
    throw std::runtime_error("curve not found: " + method);
}

// --------------------------------------------------------------------------

Criterion criterion1_mle_analytic() {
    Criterion c{1, "MLE 2-PSK BER matches Q(sqrt(2 Eb/N0)) within binomial 99% CI at 1e5 bits/point"};
    const double t0 = now_seconds();
    const PskScheme scheme = PskScheme::of(2);
    const ModulationConfig mod;
    const std::vector<double> grid{0.0, 2.0, 4.0, 6.0, 8.0};
    const BerCurve measured = mle_stream_curve(scheme, mod, grid, true, 100000, 20260809);
    bool ok = true;
    std::string detail;
    for (const BerPoint& p : measured.points) {
        const double expected = theoretical_ber_bpsk(p.snr_db);
        const double slack = 2.576 * std::sqrt(expected * (1.0 - expected) * p.bits_tested);
        const double diff = std::fabs(static_cast<double>(p.bit_errors) - expected * p.bits_tested);
        if (diff > slack) {
            ok = false;
            detail += " [" + std::to_string(p.snr_db) + " dB off]";
        }
    }
    c.seconds = now_seconds() - t0;
    if (c.seconds >= 60.0) {
        ok = false;
        detail += " [runtime over 60 s]";
    }
    c.passed = ok;
    c.note = detail;
    return c;
}

Criterion criterion2_rbm_exactness() {
    Criterion c{2, "RBM exactness: joint probabilities sum to 1 and analytic gradient matches FD (20 RBMs)"};
    const double t0 = now_seconds();
    bool ok = true;
    std::string detail;
    const std::vector<std::pair<int, int>> sizes{
        {3, 3}, {4, 2}, {4, 3}, {4, 4}, {5, 4}, {5, 5}, {6, 5},  {6, 6},   {7, 6},   {7, 7},
        {8, 7}, {8, 8}, {9, 8}, {9, 9}, {10, 9}, {10, 10}, {11, 11}, {12, 10}, {12, 11}, {12, 12}};
    for (size_t idx = 0; idx < sizes.size(); ++idx) {
        const auto [uv, uh] = sizes[idx];
        const RbmLayer layer = random_rbm(uv, uh, derive_seed(555, idx), 0.7);

        // sum of p(v,h) over every binary configuration, via one logZ
        const double log_z = rbm_log_partition_exact(layer);
        double sum = 0.0;
        std::vector<double> v(uv);
        std::vector<double> wv(uh);
        for (std::uint32_t mv = 0; mv < (1u << uv); ++mv) {
            double bv = 0.0;
            for (int k = 0; k < uv; ++k) {
                v[k] = (mv >> k) & 1u ? 1.0 : 0.0;
                if (v[k] != 0.0) bv += layer.vbias[k];
            }
            for (int j = 0; j < uh; ++j) wv[j] = dot(layer.weights.row(j), v.data(), uv);
            for (std::uint32_t mh = 0; mh < (1u << uh); ++mh) {
                double e = bv;
                for (int j = 0; j < uh; ++j)
                    if ((mh >> j) & 1u) e += wv[j] + layer.hbias[j];
                sum += std::exp(e - log_z);
            }
        }
        if (std::fabs(sum - 1.0) > 1e-9) {
            ok = false;
            detail += " [sum!=1 at " + std::to_string(uv) + "x" + std::to_string(uh) + "]";
        }

        // analytic gradient of the exact NLL vs central differences
        Mat data(4, uv);
        Rng rng(derive_seed(556, idx));
        std::uniform_int_distribution<int> bit(0, 1);
        for (double& x : data.a) x = bit(rng);
        const RbmGradient g = rbm_exact_gradient(layer, data);
        const double h = 1e-5;  // larger machines need the larger step to beat FD roundoff
        double worst = 0.0;
        for (int j = 0; j < uh; ++j)
            for (int k = 0; k < uv; ++k) {
                RbmLayer lp = layer, lm = layer;
                lp.weights(j, k) += h;
                lm.weights(j, k) -= h;
                const double fd = (rbm_exact_nll(lp, data) - rbm_exact_nll(lm, data)) / (2 * h);
                worst = std::max(worst, rel_err(fd, g.d_weights(j, k)));
            }
        for (int k = 0; k < uv; ++k) {
            RbmLayer lp = layer, lm = layer;
            lp.vbias[k] += h;
            lm.vbias[k] -= h;
            worst = std::max(worst, rel_err((rbm_exact_nll(lp, data) - rbm_exact_nll(lm, data)) / (2 * h),
                                            g.d_vbias[k]));
        }
        for (int j = 0; j < uh; ++j) {
            RbmLayer lp = layer, lm = layer;
            lp.hbias[j] += h;
            lm.hbias[j] -= h;
            worst = std::max(worst, rel_err((rbm_exact_nll(lp, data) - rbm_exact_nll(lm, data)) / (2 * h),
                                            g.d_hbias[j]));
        }
        if (worst > 1e-5) {
            ok = false;
            detail += " [grad err " + std::to_string(worst) + " at " + std::to_string(uv) + "x" +
                      std::to_string(uh) + "]";
        }
    }
    c.seconds = now_seconds() - t0;
    if (c.seconds >= 30.0) {
        ok = false;
        detail += " [runtime over 30 s]";
    }
    c.passed = ok;
    c.note = detail;
    return c;
}

Criterion criterion3_gradient_audit() {
    Criterion c{3, "full finite-difference audit of DenseNet (784/300/50/2) and shrunk ConvNet"};
    const double t0 = now_seconds();
    bool ok = true;
    std::string detail;
    const double h = 1e-6;

    {
        const DenseNet net = paper_dense_net(2, 31);
        Mat batch(1, kFeatureImageSize);
        Rng rng(32);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& x : batch.a) x = u(rng);
        const std::vector<int> labels{1};

        DenseNet stepped = net;
        detail::dense_train_step(stepped, batch, labels, 1.0);

        // Forward caches for the single sample. A perturbed parameter in
        // layer l only changes one pre-activation row there, so everything
        // below layer l and the other rows of layer l are reused; the reused
        // values are bitwise identical to a full re-evaluation.
        const double* x = batch.row(0);
        const int dims[4] = {kFeatureImageSize, 300, 50, 2};
        std::vector<std::vector<double>> base_act(4);
        base_act[0].assign(x, x + dims[0]);
        for (int l = 0; l < 3; ++l) {
            base_act[l + 1].resize(dims[l + 1]);
            for (int j = 0; j < dims[l + 1]; ++j) {
                const double z = net.layers[l].bias[j] +
                                 dot(net.layers[l].weights.row(j), base_act[l].data(), dims[l]);
                base_act[l + 1][j] = (l < 2) ? sigmoid(z) : z;  // logits stay raw in the last slot
            }
        }
        const int truth = labels[0];
        // loss given layer index l with row j's activation replaced
        auto loss_from = [&](int l, int j, double new_unit) {
            std::vector<double> act = base_act[l + 1];
            act[j] = (l < 2) ? sigmoid(new_unit) : new_unit;
            for (int m = l + 1; m < 3; ++m) {
                std::vector<double> next(dims[m + 1]);
                for (int r = 0; r < dims[m + 1]; ++r) {
                    const double z = net.layers[m].bias[r] + dot(net.layers[m].weights.row(r), act.data(), dims[m]);
                    next[r] = (m < 2) ? sigmoid(z) : z;
                }
                act = std::move(next);
            }
            return cross_entropy(one_hot(truth, 2), softmax(act));
        };

        double worst = 0.0;
        DenseNet probe = net;
        for (int l = 0; l < 3; ++l) {
            for (int j = 0; j < dims[l + 1]; ++j) {
                for (int k = 0; k <= dims[l]; ++k) {  // k == dims[l] probes the bias
                    double* slot = (k < dims[l]) ? &probe.layers[l].weights(j, k) : &probe.layers[l].bias[j];
                    const double analytic = (k < dims[l])
                                                ? net.layers[l].weights(j, k) - stepped.layers[l].weights(j, k)
                                                : net.layers[l].bias[j] - stepped.layers[l].bias[j];
                    const double orig = *slot;
                    *slot = orig + h;
                    const double zp = probe.layers[l].bias[j] +
                                      dot(probe.layers[l].weights.row(j), base_act[l].data(), dims[l]);
                    *slot = orig - h;
                    const double zm = probe.layers[l].bias[j] +
                                      dot(probe.layers[l].weights.row(j), base_act[l].data(), dims[l]);
                    *slot = orig;
                    const double fd = (loss_from(l, j, zp) - loss_from(l, j, zm)) / (2 * h);
                    worst = std::max(worst, rel_err(fd, analytic));
                }
            }
        }
        if (worst > 1e-5) {
            ok = false;
            detail += " [dense worst rel err " + std::to_string(worst) + "]";
        }
    }
    {
        ConvGeometry g;
        g.input_hw = 8;
        g.padded_hw = 8;
        g.stages = {{3, 2, true}, {3, 2, false}};
        g.dense_hidden = {5};
        g.num_classes = 2;
        const ConvNet net = ConvNet::make(g, 41);
        Mat images(2, 64);
        Rng rng(42);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& x : images.a) x = u(rng);
        const std::vector<int> labels{0, 1};

        auto loss = [&](const ConvNet& n) {
            double acc = 0.0;
            for (int i = 0; i < images.rows; ++i) {
                const auto cache = detail::conv_forward_cached(n, images.row(i));
                acc -= std::log(std::clamp(cache.probs[labels[i]], 1e-12, 1.0 - 1e-12));
            }
            return acc / images.rows;
        };
        detail::ConvGrads grads = detail::ConvGrads::zeros_like(net);
        for (int i = 0; i < images.rows; ++i) {
            const auto cache = detail::conv_forward_cached(net, images.row(i));
            detail::conv_backward_accumulate(net, cache, labels[i], 1.0 / images.rows, grads);
        }

        double worst = 0.0;
        ConvNet probe = net;
        auto check = [&](double& slot, double analytic) {
            const double orig = slot;
            slot = orig + h;
            const double lp = loss(probe);
            slot = orig - h;
            const double lm = loss(probe);
            slot = orig;
            worst = std::max(worst, rel_err((lp - lm) / (2 * h), analytic));
        };
        for (size_t s = 0; s < net.conv_weights.size(); ++s) {
            for (size_t i = 0; i < net.conv_weights[s].size(); ++i)
                check(probe.conv_weights[s].a[i], grads.conv_dw[s].a[i]);
            for (size_t i = 0; i < net.conv_bias[s].size(); ++i)
                check(probe.conv_bias[s][i], grads.conv_db[s][i]);
        }
        for (size_t l = 0; l < net.dense.size(); ++l) {
            for (size_t i = 0; i < net.dense[l].weights.size(); ++i)
                check(probe.dense[l].weights.a[i], grads.dense_dw[l].a[i]);
            for (size_t i = 0; i < net.dense[l].bias.size(); ++i)
                check(probe.dense[l].bias[i], grads.dense_db[l][i]);
        }
        if (worst > 1e-5) {
            ok = false;
            detail += " [conv worst rel err " + std::to_string(worst) + "]";
        }
    }
    c.seconds = now_seconds() - t0;
    if (c.seconds >= 120.0) {
        ok = false;
        detail += " [runtime over 2 min]";
    }
    c.passed = ok;
    c.note = detail;
    return c;
}

Criterion criterion4_doppler_bins() {
    Criterion c{4, "Doppler resampler: tone peaks land on alpha*f0 within one 4096-point FFT bin"};
    const double t0 = now_seconds();
    bool ok = true;
    std::string detail;
    const double fs = 8000.0;
    const int nfft = 4096;
    for (double f0 : {100.0, 400.0, 1000.0})
        for (double alpha : {0.5, 0.9, 1.1, 2.0}) {
            Waveform tone;
            tone.sample_rate_hz = fs;
            const size_t in_len = static_cast<size_t>(nfft * alpha) + 64;
            tone.samples.resize(in_len);
            for (size_t k = 0; k < in_len; ++k)
                tone.samples[k] = std::cos(2.0 * std::numbers::pi * f0 * k / fs);
            const Waveform out = apply_doppler(tone, alpha);
            const int bin = dominant_fft_bin(out.samples, nfft);
            const int expected = static_cast<int>(std::lround(alpha * f0 / fs * nfft));
            if (std::abs(bin - expected) > 1) {
                ok = false;
                detail += " [f0=" + std::to_string(f0) + " a=" + std::to_string(alpha) + " bin " +
                          std::to_string(bin) + " vs " + std::to_string(expected) + "]";
            }
        }
    c.seconds = now_seconds() - t0;
    c.passed = ok;
    c.note = detail;
    return c;
}

// Shared state between criteria 5 and 6 (6 reuses the fixed-carrier curve).
struct ExperimentOutputs {
    std::vector<BerCurve> fixed;
    bool have_fixed = false;
};

Criterion criterion5_experiment1(ExperimentOutputs& shared) {
    Criterion c{5, "experiment 1 (8000 periods, 2-PSK): DBN-NN within 2 dB of the MLE curve at 6 dB"};
    const double t0 = now_seconds();
    const ExperimentConfig cfg = experiment_config();
    shared.fixed = run_ber_sweep(cfg);
    shared.have_fixed = true;
    const BerCurve& nn = find_curve(shared.fixed, "DBN-NN", 2);

    // reference: the analytic coherent-ML curve (criterion 1 pins the
    // measured MLE to it); dense grid for interpolation
    std::vector<double> dense_grid;
    for (double s = -4.0; s <= 14.0; s += 0.5) dense_grid.push_back(s);
    const auto reference = analytic_bpsk_reference(dense_grid);

    const BerPoint* at6 = nullptr;
    for (const BerPoint& p : nn.points)
        if (p.snr_db == 6.0) at6 = &p;
    bool ok = false;
    std::string detail;
    if (!at6) {
        detail = " [no 6 dB point]";
    } else {
        const double offset = horizontal_offset_db(*at6, reference);
        char buf[160];
        std::snprintf(buf, sizeof(buf), " [BER@6dB = %lld/%lld = %.3g, offset %+.2f dB vs analytic ML]",
                      at6->bit_errors, at6->bits_tested, at6->ber, offset);
        detail = buf;
        ok = offset <= 2.0;
    }
    c.seconds = now_seconds() - t0;
    if (c.seconds >= 1200.0) {
        ok = false;
        detail += " [runtime over 20 min]";
    }
    c.passed = ok;
    c.note = detail;
    return c;
}

Criterion criterion6_experiment2(ExperimentOutputs& shared) {
    Criterion c{6, "experiment 2: Doppler-varied DBN-NN within 3 dB of its fixed curve; MLE strictly degraded"};
    const double t0 = now_seconds();
    ExperimentConfig cfg = experiment_config();
    if (!shared.have_fixed) {
        shared.fixed = run_ber_sweep(cfg);
        shared.have_fixed = true;
    }
    const std::vector<BerCurve> doppler = run_doppler_sweep(cfg);

    const BerCurve& nn_fixed = find_curve(shared.fixed, "DBN-NN", 2);
    const BerCurve& nn_doppler = find_curve(doppler, "DBN-NN", 2);
    const BerCurve& mle_clean = find_curve(doppler, "MLE", 2);
    const BerCurve& mle_doppler = find_curve(doppler, "MLE-doppler", 2);

    bool ok = true;
    std::string detail;

    const auto fixed_ref = curve_to_pairs(nn_fixed);
    double worst_offset = -1e9;
    int usable = 0;
    for (const BerPoint& p : nn_doppler.points) {
        if (p.bit_errors < 10) continue;  // below measurement resolution
        ++usable;
        worst_offset = std::max(worst_offset, horizontal_offset_db(p, fixed_ref));
    }
    if (usable == 0) {
        ok = false;
        detail += " [no measurable doppler points]";
    } else {
        char buf[96];
        std::snprintf(buf, sizeof(buf), " [max offset %+.2f dB over %d points]", worst_offset, usable);
        detail += buf;
        if (worst_offset > 3.0) ok = false;
    }

    for (const BerPoint& p : mle_doppler.points) {
        if (p.snr_db < 0.0) continue;
        const BerPoint* clean = nullptr;
        for (const BerPoint& q : mle_clean.points)
            if (q.snr_db == p.snr_db) clean = &q;
        if (!clean || !(p.ber > clean->ber)) {
            ok = false;
            detail += " [MLE not strictly degraded at " + std::to_string(p.snr_db) + " dB]";
        }
    }
    c.seconds = now_seconds() - t0;
    c.passed = ok;
    c.note = detail;
    return c;
}

Criterion criterion7_experiment3() {
    Criterion c{7, "experiment 3: accuracy at the largest training size >= smallest, both pipelines, 2/4/8-PSK"};
    const double t0 = now_seconds();
    ExperimentConfig cfg = experiment_config();
    cfg.scheme_orders = {2, 4, 8};
    cfg.dataset_size_periods = 4000;
    cfg.acc_ladder = {250, 1000, 0};
    cfg.dbn.epochs = 6;
    cfg.dense_cfg.epochs = 40;
    cfg.conv_cfg.epochs = 15;
    const std::vector<AccuracyPoint> points = run_accuracy_vs_trainsize(cfg);

    bool ok = true;
    std::string detail;
    for (int order : cfg.scheme_orders)
        for (const char* method : {"DBN-NN", "DBN-CNN"}) {
            const AccuracyPoint* smallest = nullptr;
            const AccuracyPoint* largest = nullptr;
            for (const AccuracyPoint& p : points) {
                if (p.scheme_order != order || p.method != method) continue;
                if (!smallest || p.train_periods < smallest->train_periods) smallest = &p;
                if (!largest || p.train_periods > largest->train_periods) largest = &p;
            }
            if (!smallest || !largest) {
                ok = false;
                detail += " [missing points]";
                continue;
            }
            char buf[120];
            std::snprintf(buf, sizeof(buf), " [%s %d-PSK: %.3f@%d -> %.3f@%d]", method, order, smallest->accuracy,
                          smallest->train_periods, largest->accuracy, largest->train_periods);
            detail += buf;
            if (largest->accuracy < smallest->accuracy) ok = false;
        }

    // soft check, logged only: size at which each method reaches within 1%
    // of its plateau (largest-size) accuracy
    for (int order : cfg.scheme_orders) {
        int nn_reach = -1, cnn_reach = -1;
        for (const char* method : {"DBN-NN", "DBN-CNN"}) {
            double plateau = 0.0;
            for (const AccuracyPoint& p : points)
                if (p.scheme_order == order && p.method == method) plateau = std::max(plateau, p.accuracy);
            int reach = -1;
            for (const AccuracyPoint& p : points)
                if (p.scheme_order == order && p.method == method && p.accuracy >= plateau - 0.01)
                    if (reach < 0 || p.train_periods < reach) reach = p.train_periods;
            (method[4] == 'N' ? nn_reach : cnn_reach) = reach;
        }
        std::printf("  note: %d-PSK plateau reach: DBN-NN @%d periods, DBN-CNN @%d periods%s\n", order, nn_reach,
                    cnn_reach, cnn_reach <= nn_reach ? " (CNN earlier or equal, as the paper reports)" : "");
    }
    c.seconds = now_seconds() - t0;
    c.passed = ok;
    c.note = detail;
    return c;
}

Criterion criterion8_cli_determinism() {
    Criterion c{8, "CLI determinism: sweep-ber --seed 7 twice produces byte-identical CSV"};
    const double t0 = now_seconds();
#ifndef SWACDEM_CLI_PATH
    c.note = " [CLI path not configured]";
    c.passed = false;
    return c;
#else
    const fs::path dir = fs::temp_directory_path();
    const fs::path cfg_path = dir / "swacdem_accept_cfg.json";
    const fs::path out_a = dir / "swacdem_accept_a.csv";
    const fs::path out_b = dir / "swacdem_accept_b.csv";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "schemes": [2],
  "channel": {"snr_db_grid": [2.0, 6.0], "snr_reference": "per_bit"},
  "dataset": {"size_periods": 600, "symbols_per_transmission": 40},
  "dbn": {"geometry": [120, 60, 784], "epochs": 2},
  "dense": {"epochs": 4},
  "conv": {"epochs": 2},
  "mle_reference_symbols": 2000
})";
    }
    const std::string base = std::string("\"") + SWACDEM_CLI_PATH + "\" sweep-ber --config \"" +
                             cfg_path.string() + "\" --seed 7 --out \"";
    bool ok = std::system((base + out_a.string() + "\" > /dev/null").c_str()) == 0;
    ok = ok && std::system((base + out_b.string() + "\" > /dev/null").c_str()) == 0;
    if (ok) {
        const auto a = binio::read_file(out_a.string());
        const auto b = binio::read_file(out_b.string());
        ok = !a.empty() && a == b;
        c.note = ok ? " [" + std::to_string(a.size()) + " bytes identical]" : " [outputs differ]";
    } else {
        c.note = " [CLI run failed]";
    }
    fs::remove(cfg_path);
    fs::remove(out_a);
    fs::remove(out_b);
    c.seconds = now_seconds() - t0;
    c.passed = ok;
    return c;
#endif
}

Criterion criterion9_serialization() {
    Criterion c{9, "serialization: 1000 randomized save/load round trips, corrupted files rejected"};
    const double t0 = now_seconds();
    const fs::path path = fs::temp_directory_path() / "swacdem_accept_artifact.bin";
    bool ok = true;
    std::string detail;
    int mismatches = 0;
    Rng rng(20250809);
    std::uniform_int_distribution<int> dim(1, 10);
    for (int it = 0; it < 1000; ++it) {
        ModelArtifact m;
        m.scheme = PskScheme::of(std::vector<int>{2, 4, 8, 16}[rng() % 4]);
        m.stats = {-1.0 - dim(rng) * 0.01, 1.0 + dim(rng) * 0.01};
        m.dbn.layers.push_back(random_rbm(dim(rng), dim(rng), rng(), 1.5));
        if (it % 2 == 0)
            m.dbn.layers.push_back(random_rbm(m.dbn.layers[0].hidden_units(), dim(rng), rng(), 1.5));
        if (it % 3 != 2) m.dense = DenseNet::make({4, 3, m.scheme.order}, rng());
        m.meta.master_seed = rng();
        m.meta.train_split_hash = rng();
        save_model(m, path.string());
        const ModelArtifact r = load_model(path.string());
        bool same = r.dbn.layers.size() == m.dbn.layers.size() && r.scheme.order == m.scheme.order &&
                    r.stats.min == m.stats.min && r.stats.max == m.stats.max &&
                    r.meta.master_seed == m.meta.master_seed &&
                    r.meta.train_split_hash == m.meta.train_split_hash &&
                    r.dense.has_value() == m.dense.has_value();
        for (size_t l = 0; same && l < m.dbn.layers.size(); ++l)
            same = r.dbn.layers[l].weights.a == m.dbn.layers[l].weights.a &&
                   r.dbn.layers[l].vbias == m.dbn.layers[l].vbias && r.dbn.layers[l].hbias == m.dbn.layers[l].hbias;
        if (same && m.dense)
            for (size_t l = 0; l < m.dense->layers.size(); ++l)
                same = same && r.dense->layers[l].weights.a == m.dense->layers[l].weights.a &&
                       r.dense->layers[l].bias == m.dense->layers[l].bias;
        if (!same) ++mismatches;
    }
    if (mismatches != 0) {
        ok = false;
        detail += " [" + std::to_string(mismatches) + " round-trip mismatches]";
    }

    // corruption classes on the last artifact written
    auto bytes = binio::read_file(path.string());
    {
        auto cut = bytes;
        cut.resize(bytes.size() - 5);
        binio::write_file(path.string(), cut);
        try {
            load_model(path.string());
            ok = false;
            detail += " [truncation accepted]";
        } catch (const artifact_error&) {
        }
    }
    {
        auto corrupt = bytes;
        corrupt[corrupt.size() / 3] ^= 0x01;
        binio::write_file(path.string(), corrupt);
        try {
            load_model(path.string());
            ok = false;
            detail += " [corruption accepted]";
        } catch (const artifact_error& e) {
            if (e.kind != artifact_error::Kind::checksum_mismatch) {
                ok = false;
                detail += " [corruption misclassified]";
            }
        }
    }
    {
        auto versioned = bytes;
        versioned[8] = 9;
        const std::uint32_t crc = binio::crc32(versioned.data(), versioned.size() - 4);
        for (int i = 0; i < 4; ++i)
            versioned[versioned.size() - 4 + i] = static_cast<unsigned char>(crc >> (8 * i));
        binio::write_file(path.string(), versioned);
        try {
            load_model(path.string());
            ok = false;
            detail += " [old version accepted]";
        } catch (const artifact_error& e) {
            if (e.kind != artifact_error::Kind::version_mismatch) {
                ok = false;
                detail += " [version error misclassified]";
            }
        }
    }
    fs::remove(path);
    c.seconds = now_seconds() - t0;
    c.passed = ok;
    c.note = detail;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

    std::vector<Criterion> results;
    ExperimentOutputs shared;
    try {
        if (wanted(1)) results.push_back(criterion1_mle_analytic());
        if (wanted(2)) results.push_back(criterion2_rbm_exactness());
        if (wanted(3)) results.push_back(criterion3_gradient_audit());
        if (wanted(4)) results.push_back(criterion4_doppler_bins());
        if (wanted(5)) results.push_back(criterion5_experiment1(shared));
        if (wanted(6)) results.push_back(criterion6_experiment2(shared));
        if (wanted(7)) results.push_back(criterion7_experiment3());
        if (wanted(8)) results.push_back(criterion8_cli_determinism());
        if (wanted(9)) results.push_back(criterion9_serialization());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
        return 1;
    }

    int failures = 0;
    std::printf("\n");
    for (const Criterion& r : results) {
        std::printf("[%s] criterion %d: %s (%.1f s)%s\n", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str(),
                    r.seconds, r.note.c_str());
        if (!r.passed) ++failures;
    }
    std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}
