#pragma once

// Supervised classifiers mapping a FeatureImage to a symbol label:
//   - a 3-layer feed-forward net (784 -> 300 -> 50 -> M), sigmoid hidden
//     layers, softmax output;
//   - a 7-layer convolutional net (conv 5x5x6, pool, conv 5x5x16, pool,
//     conv 5x5x120, dense 84, dense M) on the 28x28 image zero-padded
//     to 32x32.
// Both train by plain mini-batch gradient descent on cross-entropy with
// early stopping on validation loss.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "swacdem/common.hpp"
#include "swacdem/dbn.hpp"

namespace swacdem {

struct Prediction {
    std::vector<double> class_probs;
    int label = 0;
};

// argmax with ties broken toward the lower index.
inline int argmax_label(const std::vector<double>& probs) {
    if (probs.empty()) throw config_error("argmax_label: empty probability vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i)
        if (probs[i] > probs[best]) best = i;
    return best;
}

// Numerically stable softmax: exp(z_i - max z) / sum exp(z_j - max z).
inline std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw config_error("softmax: empty logits");
    if (!all_finite(logits)) throw config_error("softmax: non-finite logit");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double s = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        s += p[i];
    }
    for (double& x : p) x /= s;
    return p;
}

inline std::vector<double> one_hot(int label, int num_classes) {
    if (label < 0 || label >= num_classes) throw config_error("one_hot: label out of range");
    std::vector<double> y(num_classes, 0.0);
    y[label] = 1.0;
    return y;
}

// -sum_i y_i log(p_i), predictions clamped to [1e-12, 1 - 1e-12]. For two
// classes this is exactly the binary cross-entropy of the true-class
// probability.
inline double cross_entropy(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        throw config_error("cross_entropy: distribution sizes differ");
    constexpr double eps = 1e-12;
    double loss = 0.0;
    for (size_t i = 0; i < y_true.size(); ++i) {
        const double p = y_pred[i];
        if (!(p >= -1e-9 && p <= 1.0 + 1e-9)) throw config_error("cross_entropy: y_pred is not a probability vector");
        if (y_true[i] != 0.0) loss -= y_true[i] * std::log(std::clamp(p, eps, 1.0 - eps));
    }
    return loss;
}

struct ClassifierTrainConfig {
    double learning_rate = 0.1;
    int epochs = 80;
    int batch_size = 64;
    std::uint64_t rng_seed = 0;
    int early_stop_patience = 15;

    void validate() const {
        if (!(learning_rate >= 0.0)) throw config_error("ClassifierTrainConfig: learning_rate must be >= 0");
        if (epochs < 0) throw config_error("ClassifierTrainConfig: epochs must be >= 0");
        if (batch_size < 1) throw config_error("ClassifierTrainConfig: batch_size must be >= 1");
        if (early_stop_patience < 1) throw config_error("ClassifierTrainConfig: patience must be >= 1");
    }
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    bool diverged = false;
};

// ---------------------------------------------------------------------------
// Dense net

struct DenseLayer {
    Mat weights;  // out x in
    std::vector<double> bias;
};

struct DenseNet {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().weights.cols; }
    int num_classes() const { return layers.empty() ? 0 : layers.back().weights.rows; }

    // Arbitrary-width factory (used by the gradient-audit tests); weights
    // N(0, 1/sqrt(fan_in)), biases zero.
    static DenseNet make(const std::vector<int>& dims, std::uint64_t seed) {
        if (dims.size() < 2) throw config_error("DenseNet::make: need at least input and output widths");
        DenseNet net;
        Rng rng(seed);
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            if (dims[l] < 1 || dims[l + 1] < 1) throw config_error("DenseNet::make: widths must be >= 1");
            DenseLayer layer;
            layer.weights = Mat(dims[l + 1], dims[l]);
            layer.bias.assign(dims[l + 1], 0.0);
            std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dims[l])));
            for (double& w : layer.weights.a) w = gauss(rng);
            net.layers.push_back(std::move(layer));
        }
        return net;
    }
};

// The feed-forward geometry from the paper's layer table, generalized to M
// output nodes (one per symbol class).
inline DenseNet paper_dense_net(int num_classes, std::uint64_t seed) {
    return DenseNet::make({kFeatureImageSize, 300, 50, num_classes}, seed);
}

namespace detail {

// Forward over a batch; returns activations A0..AL with AL = class probs.
inline std::vector<Mat> dense_forward_batch(const DenseNet& net, const Mat& input) {
    if (net.layers.empty()) throw config_error("dense_forward: empty net");
    if (input.cols != net.input_dim()) throw config_error("dense_forward: input width != net input dim");
    std::vector<Mat> acts;
    acts.reserve(net.layers.size() + 1);
    acts.push_back(input);
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        Mat z = matmul_nt(acts.back(), layer.weights);
        const bool last = (l + 1 == net.layers.size());
        for (int i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (int j = 0; j < z.cols; ++j) zi[j] += layer.bias[j];
            if (last) {
                const double m = *std::max_element(zi, zi + z.cols);
                double s = 0.0;
                for (int j = 0; j < z.cols; ++j) {
                    zi[j] = std::exp(zi[j] - m);
                    s += zi[j];
                }
                for (int j = 0; j < z.cols; ++j) zi[j] /= s;
            } else {
                for (int j = 0; j < z.cols; ++j) zi[j] = sigmoid(zi[j]);
            }
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

inline double mean_cross_entropy(const Mat& probs, const std::vector<int>& labels) {
    if (probs.rows != static_cast<int>(labels.size()) || probs.rows == 0)
        throw config_error("mean_cross_entropy: size mismatch");
    constexpr double eps = 1e-12;
    double loss = 0.0;
    for (int i = 0; i < probs.rows; ++i)
        loss -= std::log(std::clamp(probs(i, labels[i]), eps, 1.0 - eps));
    return loss / probs.rows;
}

// One gradient-descent step on a mini-batch; returns the batch loss.
inline double dense_train_step(DenseNet& net, const Mat& batch, const std::vector<int>& labels, double lr) {
    const std::vector<Mat> acts = dense_forward_batch(net, batch);
    const Mat& probs = acts.back();
    const double loss = mean_cross_entropy(probs, labels);
    if (lr == 0.0) return loss;

    const int bs = batch.rows;
    Mat delta = probs;  // dL/dZ for the softmax layer: (p - y)/bs
    for (int i = 0; i < bs; ++i) {
        delta(i, labels[i]) -= 1.0;
        double* di = delta.row(i);
        for (int j = 0; j < delta.cols; ++j) di[j] /= bs;
    }
    for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
        DenseLayer& layer = net.layers[l];
        Mat d_weights(layer.weights.rows, layer.weights.cols);
        add_at_b(delta, acts[l], d_weights);
        std::vector<double> d_bias(layer.bias.size(), 0.0);
        for (int i = 0; i < delta.rows; ++i) axpy(1.0, delta.row(i), d_bias.data(), delta.cols);
        if (l > 0) {
            Mat d_act = matmul_nn(delta, layer.weights);
            const Mat& a = acts[l];
            for (size_t i = 0; i < d_act.size(); ++i) d_act.a[i] *= a.a[i] * (1.0 - a.a[i]);
            delta = std::move(d_act);
        }
        for (size_t i = 0; i < layer.weights.size(); ++i) layer.weights.a[i] -= lr * d_weights.a[i];
        for (size_t j = 0; j < layer.bias.size(); ++j) layer.bias[j] -= lr * d_bias[j];
    }
    return loss;
}

inline bool net_params_finite(const DenseNet& net) {
    for (const DenseLayer& l : net.layers)
        if (!all_finite(l.weights) || !all_finite(l.bias)) return false;
    return true;
}

}  // namespace detail

inline Prediction dense_forward(const DenseNet& net, const FeatureImage& img) {
    Mat input(1, kFeatureImageSize);
    std::copy(img.values.begin(), img.values.end(), input.row(0));
    const std::vector<Mat> acts = detail::dense_forward_batch(net, input);
    Prediction pred;
    pred.class_probs.assign(acts.back().row(0), acts.back().row(0) + acts.back().cols);
    pred.label = argmax_label(pred.class_probs);
    return pred;
}

inline Mat dense_class_probs_batch(const DenseNet& net, const Mat& images) {
    return detail::dense_forward_batch(net, images).back();
}

// ---------------------------------------------------------------------------
// Conv net

struct ConvStage {
    int kernel = 5;
    int maps = 6;
    bool pool_after = true;  // 2x2 max pool, stride 2
};

struct ConvGeometry {
    int input_hw = kFeatureImageSide;
    int padded_hw = 32;
    std::vector<ConvStage> stages;
    std::vector<int> dense_hidden;
    int num_classes = 2;

    // Spatial sizes before each stage plus the final one; throws if the
    // chain does not type-check (kernel larger than its input, odd size
    // before a pool, non-centered padding).
    std::vector<int> spatial_chain() const {
        if (stages.empty()) throw config_error("ConvGeometry: no conv stages");
        if (num_classes < 2) throw config_error("ConvGeometry: need at least two classes");
        if (padded_hw < input_hw || (padded_hw - input_hw) % 2 != 0)
            throw config_error("ConvGeometry: padding must be non-negative and centered");
        std::vector<int> sizes{padded_hw};
        for (const ConvStage& st : stages) {
            int hw = sizes.back();
            if (st.kernel < 1 || st.maps < 1) throw config_error("ConvGeometry: bad stage");
            if (hw < st.kernel)
                throw config_error("ConvGeometry: spatial size " + std::to_string(hw) +
                                   " smaller than kernel " + std::to_string(st.kernel));
            hw = hw - st.kernel + 1;
            if (st.pool_after) {
                if (hw % 2 != 0)
                    throw config_error("ConvGeometry: spatial size " + std::to_string(hw) +
                                       " not divisible by pool window 2");
                hw /= 2;
            }
            sizes.push_back(hw);
        }
        return sizes;
    }

    int flatten_dim() const {
        const std::vector<int> sizes = spatial_chain();
        return stages.back().maps * sizes.back() * sizes.back();
    }
};

struct ConvNet {
    ConvGeometry geom;
    std::vector<Mat> conv_weights;                // stage s: maps_out x (maps_in * k * k)
    std::vector<std::vector<double>> conv_bias;   // stage s: maps_out
    std::vector<DenseLayer> dense;                // hidden widths then the class layer

    int num_classes() const { return geom.num_classes; }

    static ConvNet make(const ConvGeometry& geometry, std::uint64_t seed) {
        geometry.spatial_chain();  // validates; throws at construction
        ConvNet net;
        net.geom = geometry;
        Rng rng(seed);
        int maps_in = 1;
        for (const ConvStage& st : geometry.stages) {
            const int fan_in = maps_in * st.kernel * st.kernel;
            Mat w(st.maps, fan_in);
            std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
            for (double& x : w.a) x = gauss(rng);
            net.conv_weights.push_back(std::move(w));
            net.conv_bias.emplace_back(st.maps, 0.0);
            maps_in = st.maps;
        }
        std::vector<int> dims{geometry.flatten_dim()};
        dims.insert(dims.end(), geometry.dense_hidden.begin(), geometry.dense_hidden.end());
        dims.push_back(geometry.num_classes);
        DenseNet tail = DenseNet::make(dims, derive_seed(seed, 0xd));
        net.dense = std::move(tail.layers);
        return net;
    }
};

// The CNN layer table: conv 5x5x6, pool, conv 5x5x16, pool, conv 5x5x120,
// dense 84, dense M, on input zero-padded from 28x28 to 32x32.
inline ConvNet paper_conv_net(int num_classes, std::uint64_t seed) {
    ConvGeometry g;
    g.input_hw = kFeatureImageSide;
    g.padded_hw = 32;
    g.stages = {{5, 6, true}, {5, 16, true}, {5, 120, false}};
    g.dense_hidden = {84};
    g.num_classes = num_classes;
    return ConvNet::make(g, seed);
}

// Max over non-overlapping 2x2 windows.
inline Mat max_pool(const Mat& map, int window = 2) {
    if (window != 2) throw config_error("max_pool: only window 2 supported");
    if (map.rows % window != 0 || map.cols % window != 0)
        throw config_error("max_pool: spatial dims not divisible by window");
    Mat out(map.rows / window, map.cols / window);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            double m = map(2 * r, 2 * c);
            m = std::max(m, map(2 * r, 2 * c + 1));
            m = std::max(m, map(2 * r + 1, 2 * c));
            m = std::max(m, map(2 * r + 1, 2 * c + 1));
            out(r, c) = m;
        }
    return out;
}

namespace detail {

// Valid correlation of multi-channel maps with one kernel row
// (layout: channel-major, then kernel row, then kernel column).
inline void conv_valid_accumulate(const std::vector<double>& in, int in_hw, int maps_in, const double* kernel,
                                  int k, double bias, double* out, int out_hw) {
    for (int x = 0; x < out_hw; ++x)
        for (int y = 0; y < out_hw; ++y) out[x * out_hw + y] = bias;
    for (int cin = 0; cin < maps_in; ++cin) {
        const double* in_map = in.data() + static_cast<size_t>(cin) * in_hw * in_hw;
        const double* kc = kernel + static_cast<size_t>(cin) * k * k;
        for (int x = 0; x < out_hw; ++x)
            for (int u = 0; u < k; ++u) {
                const double* in_row = in_map + static_cast<size_t>(x + u) * in_hw;
                const double* k_row = kc + static_cast<size_t>(u) * k;
                double* out_row = out + static_cast<size_t>(x) * out_hw;
                for (int y = 0; y < out_hw; ++y) out_row[y] += dot(k_row, in_row + y, k);
            }
    }
}

struct ConvCache {
    std::vector<std::vector<double>> stage_in;    // maps entering each stage (stage_in[0] = padded input)
    std::vector<std::vector<double>> stage_act;   // post-sigmoid, pre-pool maps
    std::vector<std::vector<int>> pool_argmax;    // flat index into stage_act, per pooled cell
    std::vector<std::vector<double>> dense_act;   // dense activations, [0] = flattened conv output
    std::vector<double> probs;
};

// Zero-pads a flat input_hw x input_hw image to padded_hw, centered.
inline std::vector<double> pad_input(const double* img, const ConvGeometry& g) {
    const int pad = (g.padded_hw - g.input_hw) / 2;
    std::vector<double> out(static_cast<size_t>(g.padded_hw) * g.padded_hw, 0.0);
    for (int r = 0; r < g.input_hw; ++r)
        for (int c = 0; c < g.input_hw; ++c)
            out[static_cast<size_t>(r + pad) * g.padded_hw + (c + pad)] =
                img[static_cast<size_t>(r) * g.input_hw + c];
    return out;
}

inline ConvCache conv_forward_cached(const ConvNet& net, const double* img) {
    const std::vector<int> sizes = net.geom.spatial_chain();
    ConvCache cache;
    cache.stage_in.push_back(pad_input(img, net.geom));

    int maps_in = 1;
    for (size_t s = 0; s < net.geom.stages.size(); ++s) {
        const ConvStage& st = net.geom.stages[s];
        const int hw_in = sizes[s];
        const int hw_conv = hw_in - st.kernel + 1;
        std::vector<double> act(static_cast<size_t>(st.maps) * hw_conv * hw_conv);
        for (int m = 0; m < st.maps; ++m) {
            conv_valid_accumulate(cache.stage_in[s], hw_in, maps_in, net.conv_weights[s].row(m), st.kernel,
                                  net.conv_bias[s][m], act.data() + static_cast<size_t>(m) * hw_conv * hw_conv,
                                  hw_conv);
        }
        for (double& x : act) x = sigmoid(x);
        cache.stage_act.push_back(act);

        if (st.pool_after) {
            const int hw_out = hw_conv / 2;
            std::vector<double> pooled(static_cast<size_t>(st.maps) * hw_out * hw_out);
            std::vector<int> argmax(pooled.size());
            for (int m = 0; m < st.maps; ++m) {
                const double* a = act.data() + static_cast<size_t>(m) * hw_conv * hw_conv;
                for (int r = 0; r < hw_out; ++r)
                    for (int c = 0; c < hw_out; ++c) {
                        int best = (2 * r) * hw_conv + 2 * c;
                        // row-major order within the window; first wins ties
                        const int cand[4] = {best, best + 1, best + hw_conv, best + hw_conv + 1};
                        for (int t = 1; t < 4; ++t)
                            if (a[cand[t]] > a[best]) best = cand[t];
                        const size_t oi = static_cast<size_t>(m) * hw_out * hw_out + r * hw_out + c;
                        pooled[oi] = a[best];
                        argmax[oi] = best + m * hw_conv * hw_conv;
                    }
            }
            cache.pool_argmax.push_back(std::move(argmax));
            cache.stage_in.push_back(std::move(pooled));
        } else {
            cache.pool_argmax.emplace_back();
            cache.stage_in.push_back(act);
        }
        maps_in = st.maps;
    }

    cache.dense_act.push_back(cache.stage_in.back());
    for (size_t l = 0; l < net.dense.size(); ++l) {
        const DenseLayer& layer = net.dense[l];
        if (static_cast<int>(cache.dense_act.back().size()) != layer.weights.cols)
            throw config_error("conv_forward: dense layer width mismatch");
        std::vector<double> z(layer.weights.rows);
        for (int j = 0; j < layer.weights.rows; ++j)
            z[j] = layer.bias[j] + dot(layer.weights.row(j), cache.dense_act.back().data(), layer.weights.cols);
        if (l + 1 == net.dense.size()) {
            cache.probs = softmax(z);
        } else {
            for (double& x : z) x = sigmoid(x);
            cache.dense_act.push_back(std::move(z));
        }
    }
    return cache;
}

struct ConvGrads {
    std::vector<Mat> conv_dw;
    std::vector<std::vector<double>> conv_db;
    std::vector<Mat> dense_dw;
    std::vector<std::vector<double>> dense_db;

    static ConvGrads zeros_like(const ConvNet& net) {
        ConvGrads g;
        for (const Mat& w : net.conv_weights) g.conv_dw.emplace_back(w.rows, w.cols);
        for (const auto& b : net.conv_bias) g.conv_db.emplace_back(b.size(), 0.0);
        for (const DenseLayer& l : net.dense) {
            g.dense_dw.emplace_back(l.weights.rows, l.weights.cols);
            g.dense_db.emplace_back(l.bias.size(), 0.0);
        }
        return g;
    }
};

// Accumulates one sample's gradients (scaled by `scale`) into `grads`.
inline void conv_backward_accumulate(const ConvNet& net, const ConvCache& cache, int label, double scale,
                                     ConvGrads& grads) {
    const std::vector<int> sizes = net.geom.spatial_chain();

    // dense tail
    std::vector<double> delta = cache.probs;
    delta[label] -= 1.0;
    for (double& x : delta) x *= scale;
    for (int l = static_cast<int>(net.dense.size()) - 1; l >= 0; --l) {
        const DenseLayer& layer = net.dense[l];
        const std::vector<double>& a_in = cache.dense_act[l];
        for (int j = 0; j < layer.weights.rows; ++j) {
            axpy(delta[j], a_in.data(), grads.dense_dw[l].row(j), layer.weights.cols);
            grads.dense_db[l][j] += delta[j];
        }
        std::vector<double> d_in(layer.weights.cols, 0.0);
        for (int j = 0; j < layer.weights.rows; ++j) axpy(delta[j], layer.weights.row(j), d_in.data(), layer.weights.cols);
        if (l > 0) {
            const std::vector<double>& a = cache.dense_act[l];
            for (size_t i = 0; i < d_in.size(); ++i) d_in[i] *= a[i] * (1.0 - a[i]);
            delta = std::move(d_in);
        } else {
            delta = std::move(d_in);  // gradient wrt the flattened conv output
        }
    }

    // conv stack, backwards
    std::vector<double> d_out = delta;  // gradient wrt stage_in[last] (= flatten)
    for (int s = static_cast<int>(net.geom.stages.size()) - 1; s >= 0; --s) {
        const ConvStage& st = net.geom.stages[s];
        const int hw_in = (s == 0) ? net.geom.padded_hw : sizes[s];
        const int hw_conv = hw_in - st.kernel + 1;
        const int maps_in = (s == 0) ? 1 : net.geom.stages[s - 1].maps;

        // undo pooling: route gradient to the argmax cell
        std::vector<double> d_act(static_cast<size_t>(st.maps) * hw_conv * hw_conv, 0.0);
        if (st.pool_after) {
            const std::vector<int>& argmax = cache.pool_argmax[s];
            for (size_t i = 0; i < argmax.size(); ++i) d_act[argmax[i]] += d_out[i];
        } else {
            d_act = d_out;
        }

        // through the sigmoid
        const std::vector<double>& act = cache.stage_act[s];
        for (size_t i = 0; i < d_act.size(); ++i) d_act[i] *= act[i] * (1.0 - act[i]);

        // kernel/bias gradients and input gradient
        const std::vector<double>& in = cache.stage_in[s];
        std::vector<double> d_in(static_cast<size_t>(maps_in) * hw_in * hw_in, 0.0);
        for (int m = 0; m < st.maps; ++m) {
            const double* dm = d_act.data() + static_cast<size_t>(m) * hw_conv * hw_conv;
            double* dk_base = grads.conv_dw[s].row(m);
            const double* k_base = net.conv_weights[s].row(m);
            for (int x = 0; x < hw_conv; ++x)
                for (int y = 0; y < hw_conv; ++y) {
                    const double d = dm[x * hw_conv + y];
                    if (d == 0.0) continue;
                    grads.conv_db[s][m] += d;
                    for (int cin = 0; cin < maps_in; ++cin) {
                        const double* in_map = in.data() + static_cast<size_t>(cin) * hw_in * hw_in;
                        double* din_map = d_in.data() + static_cast<size_t>(cin) * hw_in * hw_in;
                        double* dk = dk_base + static_cast<size_t>(cin) * st.kernel * st.kernel;
                        const double* kk = k_base + static_cast<size_t>(cin) * st.kernel * st.kernel;
                        for (int u = 0; u < st.kernel; ++u) {
                            const double* in_row = in_map + static_cast<size_t>(x + u) * hw_in + y;
                            double* din_row = din_map + static_cast<size_t>(x + u) * hw_in + y;
                            double* dk_row = dk + static_cast<size_t>(u) * st.kernel;
                            const double* k_row = kk + static_cast<size_t>(u) * st.kernel;
                            axpy(d, in_row, dk_row, st.kernel);
                            axpy(d, k_row, din_row, st.kernel);
                        }
                    }
                }
        }
        d_out = std::move(d_in);
    }
}

inline bool net_params_finite(const ConvNet& net) {
    for (const Mat& w : net.conv_weights)
        if (!all_finite(w)) return false;
    for (const auto& b : net.conv_bias)
        if (!all_finite(b)) return false;
    for (const DenseLayer& l : net.dense)
        if (!all_finite(l.weights) || !all_finite(l.bias)) return false;
    return true;
}

}  // namespace detail

// Forward pass on a flat input_hw^2 image row (any geometry).
inline Prediction conv_forward_flat(const ConvNet& net, const double* img) {
    const detail::ConvCache cache = detail::conv_forward_cached(net, img);
    Prediction pred;
    pred.class_probs = cache.probs;
    pred.label = argmax_label(pred.class_probs);
    return pred;
}

inline Prediction conv_forward(const ConvNet& net, const FeatureImage& img) {
    if (net.geom.input_hw != kFeatureImageSide)
        throw config_error("conv_forward: net geometry does not take a 28x28 feature image");
    return conv_forward_flat(net, img.values.data());
}

inline Prediction predict(const DenseNet& net, const FeatureImage& img) { return dense_forward(net, img); }
inline Prediction predict(const ConvNet& net, const FeatureImage& img) { return conv_forward(net, img); }

inline int predict_label(const DenseNet& net, const FeatureImage& img) { return dense_forward(net, img).label; }
inline int predict_label(const ConvNet& net, const FeatureImage& img) { return conv_forward(net, img).label; }

// ---------------------------------------------------------------------------
// Training loops

struct LabeledImages {
    Mat images;  // n x 784, row-major flattened feature images
    std::vector<int> labels;

    int size() const { return images.rows; }
    FeatureImage image(int i) const {
        FeatureImage img;
        std::copy_n(images.row(i), kFeatureImageSize, img.values.begin());
        return img;
    }
};

// Per-feature first and second moments of a training image set. DBN
// activation probabilities cluster tightly around their per-unit means, so
// the classifiers are fed standardized images; the moments are part of the
// trained model and travel with the artifact.
struct FeatureMoments {
    std::vector<double> mean;
    std::vector<double> stddev;
};

inline FeatureMoments fit_feature_moments(const Mat& images) {
    if (images.rows == 0) throw config_error("fit_feature_moments: empty image set");
    FeatureMoments fm;
    fm.mean.assign(images.cols, 0.0);
    fm.stddev.assign(images.cols, 0.0);
    for (int i = 0; i < images.rows; ++i) axpy(1.0, images.row(i), fm.mean.data(), images.cols);
    for (double& m : fm.mean) m /= images.rows;
    for (int i = 0; i < images.rows; ++i) {
        const double* row = images.row(i);
        for (int k = 0; k < images.cols; ++k) {
            const double d = row[k] - fm.mean[k];
            fm.stddev[k] += d * d;
        }
    }
    for (double& s : fm.stddev) s = std::sqrt(s / images.rows) + 1e-8;
    return fm;
}

inline void standardize_images(Mat& images, const FeatureMoments& fm) {
    if (images.cols != static_cast<int>(fm.mean.size()))
        throw config_error("standardize_images: width mismatch with stored moments");
    for (int i = 0; i < images.rows; ++i) {
        double* row = images.row(i);
        for (int k = 0; k < images.cols; ++k) row[k] = (row[k] - fm.mean[k]) / fm.stddev[k];
    }
}

template <typename Net>
struct TrainResult {
    Net net;
    TrainHistory history;
};

// Mini-batch gradient descent with early stopping on validation loss; on
// divergence (non-finite loss or parameters) training stops and the best
// checkpoint so far is returned.
inline TrainResult<DenseNet> train_dense(const DenseNet& initial, const LabeledImages& train,
                                         const LabeledImages& val, const ClassifierTrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0 || val.size() == 0) throw config_error("train_dense: empty split");
    for (int y : train.labels)
        if (y < 0 || y >= initial.num_classes()) throw config_error("train_dense: label out of range");

    TrainResult<DenseNet> result{initial, {}};
    DenseNet current = initial;
    DenseNet best = initial;
    double best_val = detail::mean_cross_entropy(dense_class_probs_batch(current, val.images), val.labels);
    int best_epoch = -1;
    int since_best = 0;

    const int n = train.size();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(cfg.rng_seed, 0x7ee));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bs = std::min(cfg.batch_size, n - start);
            Mat batch(bs, train.images.cols);
            std::vector<int> labels(bs);
            for (int r = 0; r < bs; ++r) {
                std::copy_n(train.images.row(order[start + r]), train.images.cols, batch.row(r));
                labels[r] = train.labels[order[start + r]];
            }
            epoch_loss += detail::dense_train_step(current, batch, labels, cfg.learning_rate);
            ++batches;
        }
        epoch_loss /= std::max(batches, 1);
        const bool finite = std::isfinite(epoch_loss) && detail::net_params_finite(current);
        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (finite) val_loss = detail::mean_cross_entropy(dense_class_probs_batch(current, val.images), val.labels);
        result.history.train_loss.push_back(epoch_loss);
        result.history.val_loss.push_back(val_loss);
        if (!finite || !std::isfinite(val_loss)) {
            result.history.diverged = true;
            break;
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            best = current;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    result.history.best_epoch = best_epoch;
    result.net = std::move(best);  // last good checkpoint on divergence, best-val otherwise
    if (cfg.learning_rate == 0.0) result.net = initial;  // bitwise no-op contract
    return result;
}

inline double conv_set_loss(const ConvNet& net, const LabeledImages& set) {
    if (set.images.cols != net.geom.input_hw * net.geom.input_hw)
        throw config_error("conv_set_loss: image width != geometry input");
    double loss = 0.0;
    for (int i = 0; i < set.size(); ++i) {
        const detail::ConvCache cache = detail::conv_forward_cached(net, set.images.row(i));
        constexpr double eps = 1e-12;
        loss -= std::log(std::clamp(cache.probs[set.labels[i]], eps, 1.0 - eps));
    }
    return loss / std::max(set.size(), 1);
}

inline TrainResult<ConvNet> train_conv(const ConvNet& initial, const LabeledImages& train,
                                       const LabeledImages& val, const ClassifierTrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0 || val.size() == 0) throw config_error("train_conv: empty split");
    for (int y : train.labels)
        if (y < 0 || y >= initial.num_classes()) throw config_error("train_conv: label out of range");

    if (train.images.cols != initial.geom.input_hw * initial.geom.input_hw)
        throw config_error("train_conv: image width != geometry input");

    TrainResult<ConvNet> result{initial, {}};
    ConvNet current = initial;
    ConvNet best = initial;
    double best_val = conv_set_loss(current, val);
    int best_epoch = -1;
    int since_best = 0;

    const int n = train.size();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(cfg.rng_seed, 0xc0));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bs = std::min(cfg.batch_size, n - start);
            detail::ConvGrads grads = detail::ConvGrads::zeros_like(current);
            double batch_loss = 0.0;
            for (int r = 0; r < bs; ++r) {
                const int idx = order[start + r];
                const detail::ConvCache cache = detail::conv_forward_cached(current, train.images.row(idx));
                constexpr double eps = 1e-12;
                batch_loss -= std::log(std::clamp(cache.probs[train.labels[idx]], eps, 1.0 - eps));
                if (cfg.learning_rate != 0.0)
                    detail::conv_backward_accumulate(current, cache, train.labels[idx], 1.0 / bs, grads);
            }
            batch_loss /= bs;
            if (cfg.learning_rate != 0.0) {
                for (size_t s = 0; s < current.conv_weights.size(); ++s) {
                    for (size_t i = 0; i < current.conv_weights[s].size(); ++i)
                        current.conv_weights[s].a[i] -= cfg.learning_rate * grads.conv_dw[s].a[i];
                    for (size_t i = 0; i < current.conv_bias[s].size(); ++i)
                        current.conv_bias[s][i] -= cfg.learning_rate * grads.conv_db[s][i];
                }
                for (size_t l = 0; l < current.dense.size(); ++l) {
                    for (size_t i = 0; i < current.dense[l].weights.size(); ++i)
                        current.dense[l].weights.a[i] -= cfg.learning_rate * grads.dense_dw[l].a[i];
                    for (size_t i = 0; i < current.dense[l].bias.size(); ++i)
                        current.dense[l].bias[i] -= cfg.learning_rate * grads.dense_db[l][i];
                }
            }
            epoch_loss += batch_loss;
            ++batches;
        }
        epoch_loss /= std::max(batches, 1);
        const bool finite = std::isfinite(epoch_loss) && detail::net_params_finite(current);
        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (finite) val_loss = conv_set_loss(current, val);
        result.history.train_loss.push_back(epoch_loss);
        result.history.val_loss.push_back(val_loss);
        if (!finite || !std::isfinite(val_loss)) {
            result.history.diverged = true;
            break;
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            best = current;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    result.history.best_epoch = best_epoch;
    result.net = std::move(best);
    if (cfg.learning_rate == 0.0) result.net = initial;
    return result;
}

}  // namespace swacdem
