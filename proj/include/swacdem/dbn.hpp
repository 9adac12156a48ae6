#pragma once

// Restricted Boltzmann Machines stacked into a Deep Belief Network.
// Greedy layer-wise unsupervised pre-training with contrastive divergence;
// deterministic feature extraction mapping a 120-sample frame to a 28x28
// feature image of hidden-unit activation probabilities.
//
// The energy of a joint configuration is E(v,h) = -h'Wv - b'v - c'h with
// W: u_h x u_v, visible bias b, hidden bias c. Exact-partition routines are
// provided for small machines (<= 24 total units) and back the test oracles
// as well as the `selftest` CLI subcommand.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "swacdem/common.hpp"

namespace swacdem {

struct RbmLayer {
    Mat weights;                  // u_h x u_v
    std::vector<double> vbias;    // u_v
    std::vector<double> hbias;    // u_h

    int visible_units() const { return weights.cols; }
    int hidden_units() const { return weights.rows; }

    void check_dims() const {
        if (weights.rows < 1 || weights.cols < 1) throw config_error("RbmLayer: empty weight matrix");
        if (static_cast<int>(vbias.size()) != weights.cols || static_cast<int>(hbias.size()) != weights.rows)
            throw config_error("RbmLayer: bias lengths inconsistent with weights");
    }
};

struct DbnModel {
    std::vector<RbmLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().visible_units(); }
    int output_dim() const { return layers.empty() ? 0 : layers.back().hidden_units(); }
};

constexpr int kFeatureImageSide = 28;
constexpr int kFeatureImageSize = kFeatureImageSide * kFeatureImageSide;

// 28x28 matrix of final-layer activation probabilities, row-major.
struct FeatureImage {
    std::array<double, kFeatureImageSize> values{};

    double at(int r, int c) const { return values[static_cast<size_t>(r) * kFeatureImageSide + c]; }
};

struct DbnTrainSpec {
    int cd_steps = 1;
    double learning_rate = 0.05;
    int epochs = 30;
    int batch_size = 64;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (cd_steps < 1) throw config_error("DbnTrainSpec: cd_steps must be >= 1");
        if (!(learning_rate >= 0.0)) throw config_error("DbnTrainSpec: learning_rate must be >= 0");
        if (epochs < 0) throw config_error("DbnTrainSpec: epochs must be >= 0");
        if (batch_size < 1) throw config_error("DbnTrainSpec: batch_size must be >= 1");
    }
};

// Dataset-wide affine normalization: x -> (x - min)/(max - min), fitted on
// the training split only and clamped to [0,1] when reapplied elsewhere.
struct NormStats {
    double min = 0.0;
    double max = 1.0;
};

inline NormStats fit_norm_stats(const Mat& frames) {
    if (frames.size() == 0) throw config_error("fit_norm_stats: empty frame matrix");
    if (!all_finite(frames)) throw config_error("fit_norm_stats: non-finite amplitude");
    double lo = frames.a[0], hi = frames.a[0];
    for (double x : frames.a) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi == lo) throw config_error("fit_norm_stats: degenerate signal (max == min)");
    return NormStats{lo, hi};
}

inline double normalize_value(double x, const NormStats& s) {
    return std::clamp((x - s.min) / (s.max - s.min), 0.0, 1.0);
}

inline Mat normalize_frames(const Mat& frames, const NormStats& s) {
    if (s.max == s.min) throw config_error("normalize_frames: degenerate stats (max == min)");
    Mat out(frames.rows, frames.cols);
    for (size_t i = 0; i < frames.size(); ++i) out.a[i] = std::clamp((frames.a[i] - s.min) / (s.max - s.min), 0.0, 1.0);
    return out;
}

// E(v,h) = -h'Wv - b'v - c'h
inline double rbm_energy(const RbmLayer& layer, const std::vector<double>& v, const std::vector<double>& h) {
    layer.check_dims();
    if (static_cast<int>(v.size()) != layer.visible_units() || static_cast<int>(h.size()) != layer.hidden_units())
        throw config_error("rbm_energy: configuration dimensions do not match layer");
    if (!all_finite(v) || !all_finite(h)) throw config_error("rbm_energy: non-finite configuration");
    double e = 0.0;
    for (int j = 0; j < layer.hidden_units(); ++j) e -= h[j] * dot(layer.weights.row(j), v.data(), layer.weights.cols);
    e -= dot(layer.vbias.data(), v.data(), static_cast<int>(v.size()));
    e -= dot(layer.hbias.data(), h.data(), static_cast<int>(h.size()));
    return e;
}

inline constexpr int kExactUnitLimit = 24;

namespace detail {

inline void check_exact_guard(const RbmLayer& layer) {
    layer.check_dims();
    if (layer.visible_units() + layer.hidden_units() > kExactUnitLimit)
        throw config_error("exact partition: u_v + u_h exceeds " + std::to_string(kExactUnitLimit) +
                           " units; enumeration infeasible");
}

}  // namespace detail

// Free energy F(v) = -b'v - sum_j softplus(c_j + W_j v); p(v) = exp(-F)/Z.
inline double rbm_free_energy(const RbmLayer& layer, const std::vector<double>& v) {
    layer.check_dims();
    if (static_cast<int>(v.size()) != layer.visible_units())
        throw config_error("rbm_free_energy: dimension mismatch");
    double f = -dot(layer.vbias.data(), v.data(), static_cast<int>(v.size()));
    for (int j = 0; j < layer.hidden_units(); ++j)
        f -= softplus(layer.hbias[j] + dot(layer.weights.row(j), v.data(), layer.weights.cols));
    return f;
}

// log Z over all binary (v,h), marginalizing the larger side analytically so
// only 2^min(u_v,u_h) configurations are enumerated.
inline double rbm_log_partition_exact(const RbmLayer& layer) {
    detail::check_exact_guard(layer);
    const int uv = layer.visible_units();
    const int uh = layer.hidden_units();
    std::vector<double> terms;
    if (uv <= uh) {
        // enumerate v, marginalize h: log sum_v exp(b'v + sum_j softplus(c_j + W_j v))
        terms.reserve(size_t(1) << uv);
        std::vector<double> v(uv, 0.0);
        for (std::uint32_t mask = 0; mask < (1u << uv); ++mask) {
            for (int k = 0; k < uv; ++k) v[k] = (mask >> k) & 1u ? 1.0 : 0.0;
            terms.push_back(-rbm_free_energy(layer, v));
        }
    } else {
        // enumerate h, marginalize v symmetrically
        terms.reserve(size_t(1) << uh);
        for (std::uint32_t mask = 0; mask < (1u << uh); ++mask) {
            double t = 0.0;
            for (int j = 0; j < uh; ++j)
                if ((mask >> j) & 1u) t += layer.hbias[j];
            for (int k = 0; k < uv; ++k) {
                double pre = layer.vbias[k];
                for (int j = 0; j < uh; ++j)
                    if ((mask >> j) & 1u) pre += layer.weights(j, k);
                t += softplus(pre);
            }
            terms.push_back(t);
        }
    }
    return logsumexp(terms);
}

inline double rbm_partition_exact(const RbmLayer& layer) { return std::exp(rbm_log_partition_exact(layer)); }

// p(v,h) = exp(-E(v,h)) / Z
inline double rbm_joint_prob(const RbmLayer& layer, const std::vector<double>& v, const std::vector<double>& h) {
    detail::check_exact_guard(layer);
    return std::exp(-rbm_energy(layer, v, h) - rbm_log_partition_exact(layer));
}

// p(h_j = 1 | v) = logistic(c_j + W_j v)
inline std::vector<double> hidden_activation(const RbmLayer& layer, const std::vector<double>& v) {
    layer.check_dims();
    if (static_cast<int>(v.size()) != layer.visible_units())
        throw config_error("hidden_activation: dimension mismatch");
    std::vector<double> h(layer.hidden_units());
    for (int j = 0; j < layer.hidden_units(); ++j)
        h[j] = sigmoid(layer.hbias[j] + dot(layer.weights.row(j), v.data(), layer.weights.cols));
    return h;
}

// p(v_k = 1 | h) = logistic(b_k + (W'h)_k)
inline std::vector<double> visible_activation(const RbmLayer& layer, const std::vector<double>& h) {
    layer.check_dims();
    if (static_cast<int>(h.size()) != layer.hidden_units())
        throw config_error("visible_activation: dimension mismatch");
    std::vector<double> v(layer.vbias.begin(), layer.vbias.end());
    for (int j = 0; j < layer.hidden_units(); ++j) axpy(h[j], layer.weights.row(j), v.data(), layer.weights.cols);
    for (double& x : v) x = sigmoid(x);
    return v;
}

namespace detail {

// Batched activation probabilities: rows of V are visible vectors.
inline Mat hidden_probs_batch(const RbmLayer& layer, const Mat& V) {
    Mat H = matmul_nt(V, layer.weights);  // n x u_h
    for (int i = 0; i < H.rows; ++i) {
        double* hi = H.row(i);
        for (int j = 0; j < H.cols; ++j) hi[j] = sigmoid(hi[j] + layer.hbias[j]);
    }
    return H;
}

inline Mat visible_probs_batch(const RbmLayer& layer, const Mat& H) {
    Mat V = matmul_nn(H, layer.weights);  // n x u_v
    for (int i = 0; i < V.rows; ++i) {
        double* vi = V.row(i);
        for (int k = 0; k < V.cols; ++k) vi[k] = sigmoid(vi[k] + layer.vbias[k]);
    }
    return V;
}

}  // namespace detail

// One contrastive-divergence step over a mini-batch. Positive statistics use
// activation probabilities; the Gibbs chain samples hidden states between
// steps and keeps visible units at their probabilities. Deterministic per
// spec.rng_seed.
inline RbmLayer cd_update(const RbmLayer& layer, const Mat& batch, const DbnTrainSpec& spec) {
    layer.check_dims();
    spec.validate();
    if (batch.rows == 0) throw config_error("cd_update: empty batch");
    if (batch.cols != layer.visible_units()) throw config_error("cd_update: batch width != visible units");
    for (double x : batch.a)
        if (!(x >= 0.0 && x <= 1.0)) throw config_error("cd_update: batch entries must lie in [0,1]");

    Rng rng(spec.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const Mat h0 = detail::hidden_probs_batch(layer, batch);
    Mat hs = h0;
    for (double& x : hs.a) x = (unit(rng) < x) ? 1.0 : 0.0;

    Mat v = detail::visible_probs_batch(layer, hs);
    Mat h = detail::hidden_probs_batch(layer, v);
    for (int step = 1; step < spec.cd_steps; ++step) {
        hs = h;
        for (double& x : hs.a) x = (unit(rng) < x) ? 1.0 : 0.0;
        v = detail::visible_probs_batch(layer, hs);
        h = detail::hidden_probs_batch(layer, v);
    }

    RbmLayer out = layer;
    const double scale = spec.learning_rate / batch.rows;
    add_at_b(h0, batch, out.weights, scale);  // positive phase
    add_at_b(h, v, out.weights, -scale);      // negative phase
    for (int n = 0; n < batch.rows; ++n) {
        axpy(scale, batch.row(n), out.vbias.data(), batch.cols);
        axpy(-scale, v.row(n), out.vbias.data(), batch.cols);
        axpy(scale, h0.row(n), out.hbias.data(), h0.cols);
        axpy(-scale, h.row(n), out.hbias.data(), h.cols);
    }
    if (!all_finite(out.weights) || !all_finite(out.vbias) || !all_finite(out.hbias))
        throw numeric_error("cd_update: non-finite parameter after update (lr=" +
                            std::to_string(spec.learning_rate) + ", batch=" + std::to_string(batch.rows) + ")");
    return out;
}

// Seeded initialization: weights N(0, 0.01^2), biases zero.
inline RbmLayer rbm_init(int visible, int hidden, std::uint64_t seed) {
    if (visible < 1 || hidden < 1) throw config_error("rbm_init: units must be >= 1");
    RbmLayer layer;
    layer.weights = Mat(hidden, visible);
    layer.vbias.assign(visible, 0.0);
    layer.hbias.assign(hidden, 0.0);
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.01);
    for (double& w : layer.weights.a) w = gauss(rng);
    return layer;
}

// Greedy layer-wise pre-training: layer 1 on the raw frames, layer k > 1 on
// the activation probabilities of the trained stack below it.
inline DbnModel train_dbn_greedy(const Mat& frames, const std::vector<int>& geometry, const DbnTrainSpec& spec) {
    spec.validate();
    if (geometry.size() < 2) throw config_error("train_dbn_greedy: geometry needs at least two sizes");
    if (frames.rows == 0) throw config_error("train_dbn_greedy: no training frames");
    if (geometry.front() != frames.cols)
        throw config_error("train_dbn_greedy: geometry input " + std::to_string(geometry.front()) +
                           " != frame width " + std::to_string(frames.cols));
    for (double x : frames.a)
        if (!(x >= 0.0 && x <= 1.0)) throw config_error("train_dbn_greedy: frames must be normalized to [0,1]");

    DbnModel model;
    Mat data = frames;
    for (size_t li = 0; li + 1 < geometry.size(); ++li) {
        const std::uint64_t layer_seed = derive_seed(spec.rng_seed, li);
        RbmLayer layer = rbm_init(geometry[li], geometry[li + 1], layer_seed);

        const int n = data.rows;
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(layer_seed, 0x5u));
        std::uint64_t batch_counter = 0;
        for (int epoch = 0; epoch < spec.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (int start = 0; start < n; start += spec.batch_size) {
                const int bs = std::min(spec.batch_size, n - start);
                Mat batch(bs, data.cols);
                for (int r = 0; r < bs; ++r)
                    std::copy_n(data.row(order[start + r]), data.cols, batch.row(r));
                DbnTrainSpec step = spec;
                step.rng_seed = derive_seed(layer_seed, 0x100u + batch_counter++);
                layer = cd_update(layer, batch, step);
            }
        }
        data = detail::hidden_probs_batch(layer, data);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

// Deterministic forward pass (activation probabilities, no sampling); final
// 784-vector reshaped row-major into 28x28.
inline FeatureImage extract_features(const DbnModel& model, const std::vector<double>& frame) {
    if (model.layers.empty()) throw config_error("extract_features: empty model");
    if (static_cast<int>(frame.size()) != model.input_dim())
        throw config_error("extract_features: frame width != model input dim");
    if (model.output_dim() != kFeatureImageSize)
        throw config_error("extract_features: model output dim != 784");
    for (double x : frame)
        if (!(x >= -1e-9 && x <= 1.0 + 1e-9))
            throw config_error("extract_features: frame not normalized to [0,1]");
    std::vector<double> act(frame);
    for (double& x : act) x = std::clamp(x, 0.0, 1.0);
    for (const RbmLayer& layer : model.layers) act = hidden_activation(layer, act);
    FeatureImage img;
    std::copy_n(act.begin(), kFeatureImageSize, img.values.begin());
    return img;
}

// Batched feature extraction for dataset-scale inference.
inline Mat extract_features_batch(const DbnModel& model, const Mat& frames) {
    if (model.layers.empty()) throw config_error("extract_features_batch: empty model");
    if (frames.cols != model.input_dim()) throw config_error("extract_features_batch: frame width mismatch");
    for (double x : frames.a)
        if (!(x >= -1e-9 && x <= 1.0 + 1e-9))
            throw config_error("extract_features_batch: frames not normalized to [0,1]");
    Mat act = frames;
    for (double& x : act.a) x = std::clamp(x, 0.0, 1.0);
    for (const RbmLayer& layer : model.layers) act = detail::hidden_probs_batch(layer, act);
    return act;
}

// ---------------------------------------------------------------------------
// Exact-gradient utilities for enumerable machines. These compute the
// analytic gradient of the mean negative log-likelihood (the layer objective)
// via exact model expectations, and back the oracle tests / selftest.

struct RbmGradient {
    Mat d_weights;
    std::vector<double> d_vbias;
    std::vector<double> d_hbias;
};

// Mean negative log-likelihood of the rows of `data` under the RBM.
inline double rbm_exact_nll(const RbmLayer& layer, const Mat& data) {
    detail::check_exact_guard(layer);
    if (data.rows == 0 || data.cols != layer.visible_units()) throw config_error("rbm_exact_nll: bad data");
    const double log_z = rbm_log_partition_exact(layer);
    double nll = 0.0;
    std::vector<double> v(data.cols);
    for (int i = 0; i < data.rows; ++i) {
        v.assign(data.row(i), data.row(i) + data.cols);
        nll += rbm_free_energy(layer, v) + log_z;
    }
    return nll / data.rows;
}

// Analytic gradient of rbm_exact_nll: data statistics minus exact model
// expectations, with the model side enumerated over the visible space.
inline RbmGradient rbm_exact_gradient(const RbmLayer& layer, const Mat& data) {
    detail::check_exact_guard(layer);
    if (data.rows == 0 || data.cols != layer.visible_units()) throw config_error("rbm_exact_gradient: bad data");
    const int uv = layer.visible_units();
    const int uh = layer.hidden_units();

    RbmGradient g;
    g.d_weights = Mat(uh, uv);
    g.d_vbias.assign(uv, 0.0);
    g.d_hbias.assign(uh, 0.0);

    // data (positive-phase) expectations, negated into the NLL gradient
    std::vector<double> v(uv);
    for (int i = 0; i < data.rows; ++i) {
        v.assign(data.row(i), data.row(i) + uv);
        const std::vector<double> h = hidden_activation(layer, v);
        const double scale = -1.0 / data.rows;
        for (int j = 0; j < uh; ++j) axpy(scale * h[j], v.data(), g.d_weights.row(j), uv);
        axpy(scale, v.data(), g.d_vbias.data(), uv);
        axpy(scale, h.data(), g.d_hbias.data(), uh);
    }

    // model expectations by enumeration of the binary visible space
    const double log_z = rbm_log_partition_exact(layer);
    for (std::uint32_t mask = 0; mask < (1u << uv); ++mask) {
        for (int k = 0; k < uv; ++k) v[k] = (mask >> k) & 1u ? 1.0 : 0.0;
        const double pv = std::exp(-rbm_free_energy(layer, v) - log_z);
        const std::vector<double> h = hidden_activation(layer, v);
        for (int j = 0; j < uh; ++j) axpy(pv * h[j], v.data(), g.d_weights.row(j), uv);
        axpy(pv, v.data(), g.d_vbias.data(), uv);
        axpy(pv, h.data(), g.d_hbias.data(), uh);
    }
    return g;
}

}  // namespace swacdem
