#pragma once

// Built-in oracle suite behind the `selftest` CLI subcommand: quick
// enumeration, finite-difference and determinism checks that exercise the
// numeric core without any input files.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "swacdem/artifact.hpp"
#include "swacdem/baseline.hpp"
#include "swacdem/classify.hpp"
#include "swacdem/dbn.hpp"
#include "swacdem/sigproc.hpp"

namespace swacdem {

namespace detail {

inline RbmLayer random_rbm(int uv, int uh, std::uint64_t seed, double scale = 0.5) {
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

// Direct DFT magnitude at one bin; independent of the resampler under test.
inline double dft_bin_mag(const std::vector<double>& x, int n, int bin) {
    double re = 0.0, im = 0.0;
    for (int k = 0; k < n; ++k) {
        const double ph = -2.0 * std::numbers::pi * bin * k / n;
        re += x[k] * std::cos(ph);
        im += x[k] * std::sin(ph);
    }
    return re * re + im * im;
}

}  // namespace detail

// Runs the oracle checks, printing one line each; returns true when all pass.
inline bool run_selftest() {
    struct Check {
        std::string name;
        std::function<bool()> fn;
    };
    std::vector<Check> checks;

    checks.push_back({"partition function of zero-parameter RBMs", [] {
        RbmLayer l;
        l.weights = Mat(1, 1);
        l.vbias = {0.0};
        l.hbias = {0.0};
        if (std::fabs(rbm_partition_exact(l) - 4.0) > 1e-12) return false;
        RbmLayer l2;
        l2.weights = Mat(1, 2);
        l2.vbias = {0.0, 0.0};
        l2.hbias = {0.0};
        return std::fabs(rbm_partition_exact(l2) - 8.0) < 1e-12;
    }});

    checks.push_back({"joint probabilities sum to one (4x3 RBM)", [] {
        const RbmLayer l = detail::random_rbm(4, 3, 42);
        double sum = 0.0;
        std::vector<double> v(4), h(3);
        for (int mv = 0; mv < 16; ++mv)
            for (int mh = 0; mh < 8; ++mh) {
                for (int k = 0; k < 4; ++k) v[k] = (mv >> k) & 1;
                for (int j = 0; j < 3; ++j) h[j] = (mh >> j) & 1;
                sum += rbm_joint_prob(l, v, h);
            }
        return std::fabs(sum - 1.0) < 1e-9;
    }});

    checks.push_back({"exact NLL gradient vs finite differences (5x3 RBM)", [] {
        RbmLayer l = detail::random_rbm(5, 3, 7);
        Mat data(4, 5);
        Rng rng(11);
        std::uniform_int_distribution<int> bit(0, 1);
        for (double& x : data.a) x = bit(rng);
        const RbmGradient g = rbm_exact_gradient(l, data);
        const double h = 1e-6;
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 5; ++k) {
                RbmLayer lp = l, lm = l;
                lp.weights(j, k) += h;
                lm.weights(j, k) -= h;
                const double fd = (rbm_exact_nll(lp, data) - rbm_exact_nll(lm, data)) / (2 * h);
                const double an = g.d_weights(j, k);
                if (std::fabs(fd - an) > 1e-5 * std::max({std::fabs(fd), std::fabs(an), 1e-4})) return false;
            }
        return true;
    }});

    checks.push_back({"softmax and cross-entropy identities", [] {
        const std::vector<double> p = softmax({0.0, 0.0});
        if (std::fabs(p[0] - 0.5) > 1e-15) return false;
        const std::vector<double> q = softmax({std::log(2.0), 0.0});
        if (std::fabs(q[0] - 2.0 / 3.0) > 1e-12) return false;
        return std::fabs(cross_entropy({0.0, 1.0}, {0.5, 0.5}) - std::log(2.0)) < 1e-12;
    }});

    checks.push_back({"Doppler resampler moves a tone to alpha*f0", [] {
        const double fs = 8000.0, f0 = 400.0, alpha = 2.0;
        const int n = 1024;
        Waveform tone;
        tone.sample_rate_hz = fs;
        tone.samples.resize(static_cast<size_t>(n * alpha) + 64);
        for (size_t k = 0; k < tone.samples.size(); ++k)
            tone.samples[k] = std::cos(2.0 * std::numbers::pi * f0 * k / fs);
        const Waveform shifted = apply_doppler(tone, alpha);
        if (shifted.samples.size() < static_cast<size_t>(n)) return false;
        int best = 1;
        double best_mag = 0.0;
        for (int bin = 1; bin < n / 2; ++bin) {
            const double m = detail::dft_bin_mag(shifted.samples, n, bin);
            if (m > best_mag) {
                best_mag = m;
                best = bin;
            }
        }
        const int expected = static_cast<int>(std::lround(alpha * f0 / fs * n));
        return std::abs(best - expected) <= 1;
    }});

    checks.push_back({"bit/symbol mapping round trip", [] {
        Rng rng(5);
        std::uniform_int_distribution<int> bit(0, 1);
        for (int order : {2, 4, 8, 16}) {
            const PskScheme scheme = PskScheme::of(order);
            std::vector<std::uint8_t> bits(static_cast<size_t>(scheme.bits_per_symbol) * 64);
            for (auto& b : bits) b = static_cast<std::uint8_t>(bit(rng));
            if (symbols_to_bits(map_bits_to_symbols(bits, scheme), scheme) != bits) return false;
        }
        return true;
    }});

    checks.push_back({"noiseless MLE demodulation is exact", [] {
        const ModulationConfig mod;
        for (int order : {2, 16}) {
            const PskScheme scheme = PskScheme::of(order);
            Rng rng(3);
            std::uniform_int_distribution<int> sym(0, order - 1);
            std::vector<int> symbols(64);
            for (int& s : symbols) s = sym(rng);
            const Waveform w = modulate_psk(symbols, scheme, mod);
            if (mle_demodulate(w, MleConfig{scheme, mod}) != symbols) return false;
        }
        return true;
    }});

    checks.push_back({"theoretical BPSK BER at 0 dB", [] {
        return std::fabs(theoretical_ber_bpsk(0.0) - 0.0786496) < 1e-6;
    }});

    checks.push_back({"AWGN determinism per seed", [] {
        Waveform w;
        w.samples.assign(512, 1.0);
        const Waveform a = add_awgn(w, 3.0, 99);
        const Waveform b = add_awgn(w, 3.0, 99);
        return a.samples == b.samples;
    }});

    checks.push_back({"artifact save/load round trip", [] {
        ModelArtifact m;
        m.scheme = PskScheme::of(4);
        m.stats = {-2.5, 3.5};
        m.dbn.layers.push_back(detail::random_rbm(6, 5, 21));
        m.dense = DenseNet::make({5, 4, 4}, 22);
        const auto path =
            (std::filesystem::temp_directory_path() / "swacdem_selftest_model.bin").string();
        save_model(m, path);
        const ModelArtifact r = load_model(path);
        std::filesystem::remove(path);
        return r.dbn.layers[0].weights.a == m.dbn.layers[0].weights.a &&
               r.dense->layers[1].weights.a == m.dense->layers[1].weights.a && r.stats.min == m.stats.min;
    }});

    bool all_ok = true;
    for (const Check& c : checks) {
        bool ok = false;
        std::string note;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            note = std::string(" (") + e.what() + ")";
        }
        std::printf("[%s] %s%s\n", ok ? "ok" : "FAIL", c.name.c_str(), note.c_str());
        all_ok = all_ok && ok;
    }
    return all_ok;
}

}  // namespace swacdem
