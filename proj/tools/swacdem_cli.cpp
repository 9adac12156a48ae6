// Command-line driver: dataset generation, pipeline training, evaluation,
// the three experiment sweeps, feature scatter export and the built-in
// selftest. Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "swacdem/swacdem.hpp"

using nlohmann::json;
using namespace swacdem;

namespace {

double parse_snr_value(const json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "Inf" || s == "INF") return kNoiselessSnrDb;
        throw config_error("config: SNR value '" + s + "' is neither a number nor \"inf\"");
    }
    return v.get<double>();
}

double parse_snr_string(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF") return kNoiselessSnrDb;
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw config_error("--snr-grid: cannot parse '" + s + "'");
    }
}

AlphaDistribution parse_alpha(const json& j) {
    const std::string kind = j.value("kind", "fixed");
    if (kind == "fixed") return AlphaDistribution::fixed(j.value("value", 1.0));
    if (kind == "carrier_normal")
        return AlphaDistribution::carrier_normal(j.value("mean_hz", 1000.0), j.value("std_hz", 250.0),
                                                 j.value("min_hz", 500.0), j.value("max_hz", 2000.0));
    throw config_error("config: alpha kind must be 'fixed' or 'carrier_normal', got '" + kind + "'");
}

ExperimentConfig load_config_file(const std::string& path) {
    ExperimentConfig cfg;
    if (path.empty()) return cfg;
    json j;
    try {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file '" + path + "'");
        in >> j;
    } catch (const json::exception& e) {
        throw config_error("config parse error in '" + path + "': " + e.what());
    }
    try {
        if (j.contains("schemes")) cfg.scheme_orders = j["schemes"].get<std::vector<int>>();
        if (j.contains("mod")) {
            const json& m = j["mod"];
            cfg.mod.carrier_hz = m.value("carrier_hz", cfg.mod.carrier_hz);
            cfg.mod.sample_rate_hz = m.value("sample_rate_hz", cfg.mod.sample_rate_hz);
            cfg.mod.samples_per_symbol = m.value("samples_per_symbol", cfg.mod.samples_per_symbol);
        }
        if (j.contains("channel")) {
            const json& c = j["channel"];
            if (c.contains("snr_db_grid")) {
                cfg.channel.snr_db_grid.clear();
                for (const json& v : c["snr_db_grid"]) cfg.channel.snr_db_grid.push_back(parse_snr_value(v));
            }
            if (c.contains("snr_reference")) {
                const std::string ref = c["snr_reference"].get<std::string>();
                if (ref == "per_bit")
                    cfg.channel.snr_is_per_bit = true;
                else if (ref == "per_sample")
                    cfg.channel.snr_is_per_bit = false;
                else
                    throw config_error("config: snr_reference must be per_bit or per_sample");
            }
            if (c.contains("alpha")) cfg.channel.alpha = parse_alpha(c["alpha"]);
        }
        if (j.contains("doppler_alpha")) cfg.doppler_alpha = parse_alpha(j["doppler_alpha"]);
        if (j.contains("dataset")) {
            const json& d = j["dataset"];
            cfg.dataset_size_periods = d.value("size_periods", cfg.dataset_size_periods);
            if (d.contains("split")) {
                const auto split = d["split"].get<std::vector<double>>();
                if (split.size() != 3) throw config_error("config: dataset.split needs 3 fractions");
                cfg.split_train = split[0];
                cfg.split_val = split[1];
                cfg.split_test = split[2];
            }
            cfg.symbols_per_transmission = d.value("symbols_per_transmission", cfg.symbols_per_transmission);
            cfg.frame_len = d.value("frame_len", cfg.frame_len);
            cfg.overlap_frac = d.value("overlap_frac", cfg.overlap_frac);
        }
        if (j.contains("dbn")) {
            const json& d = j["dbn"];
            if (d.contains("geometry")) cfg.dbn_geometry = d["geometry"].get<std::vector<int>>();
            cfg.dbn.cd_steps = d.value("cd_steps", cfg.dbn.cd_steps);
            cfg.dbn.learning_rate = d.value("learning_rate", cfg.dbn.learning_rate);
            cfg.dbn.epochs = d.value("epochs", cfg.dbn.epochs);
            cfg.dbn.batch_size = d.value("batch_size", cfg.dbn.batch_size);
        }
        auto load_classifier = [&](const char* key, ClassifierTrainConfig& c) {
            if (!j.contains(key)) return;
            const json& d = j[key];
            c.learning_rate = d.value("learning_rate", c.learning_rate);
            c.epochs = d.value("epochs", c.epochs);
            c.batch_size = d.value("batch_size", c.batch_size);
            c.early_stop_patience = d.value("early_stop_patience", c.early_stop_patience);
        };
        load_classifier("dense", cfg.dense_cfg);
        load_classifier("conv", cfg.conv_cfg);
        if (j.contains("acc_ladder")) cfg.acc_ladder = j["acc_ladder"].get<std::vector<int>>();
        cfg.mle_reference_symbols = j.value("mle_reference_symbols", cfg.mle_reference_symbols);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw config_error("config field error in '" + path + "': " + e.what());
    }
    return cfg;
}

// Flag values held as optionals so only explicitly given flags override the
// config file.
struct Overrides {
    std::optional<std::vector<int>> schemes;
    std::optional<double> carrier_hz, sample_rate_hz;
    std::optional<int> samples_per_symbol;
    std::optional<std::vector<std::string>> snr_grid;
    std::optional<std::string> snr_reference;
    std::optional<std::string> alpha_kind;
    std::optional<double> alpha_value, alpha_mean, alpha_std, alpha_min, alpha_max;
    std::optional<std::string> doppler_kind;
    std::optional<double> doppler_value, doppler_mean, doppler_std, doppler_min, doppler_max;
    std::optional<int> periods, spt, frame_len;
    std::optional<double> overlap;
    std::optional<std::vector<double>> split;
    std::optional<std::vector<int>> dbn_geometry;
    std::optional<int> cd_steps, dbn_epochs, dbn_batch;
    std::optional<double> dbn_lr;
    std::optional<double> dense_lr, conv_lr;
    std::optional<int> dense_epochs, dense_batch, dense_patience;
    std::optional<int> conv_epochs, conv_batch, conv_patience;
    std::optional<std::vector<int>> acc_ladder;
    std::optional<int> mle_symbols;
    std::optional<std::uint64_t> seed;
};

void add_override_flags(CLI::App* cmd, Overrides& o, bool seed_required) {
    cmd->add_option("--schemes", o.schemes, "PSK orders, e.g. 2,4,8")->delimiter(',');
    cmd->add_option("--carrier-hz", o.carrier_hz, "nominal carrier frequency (Hz)");
    cmd->add_option("--sample-rate-hz", o.sample_rate_hz, "sample rate (Hz)");
    cmd->add_option("--samples-per-symbol", o.samples_per_symbol, "samples per symbol");
    cmd->add_option("--snr-grid", o.snr_grid, "SNR grid in dB; 'inf' disables noise")->delimiter(',');
    cmd->add_option("--snr-reference", o.snr_reference, "per_bit or per_sample");
    cmd->add_option("--alpha-kind", o.alpha_kind, "channel alpha: fixed or carrier_normal");
    cmd->add_option("--alpha-value", o.alpha_value, "fixed alpha value");
    cmd->add_option("--alpha-mean-hz", o.alpha_mean, "carrier distribution mean (Hz)");
    cmd->add_option("--alpha-std-hz", o.alpha_std, "carrier distribution std (Hz)");
    cmd->add_option("--alpha-min-hz", o.alpha_min, "carrier distribution lower bound (Hz)");
    cmd->add_option("--alpha-max-hz", o.alpha_max, "carrier distribution upper bound (Hz)");
    cmd->add_option("--doppler-kind", o.doppler_kind, "sweep-doppler alpha: fixed or carrier_normal");
    cmd->add_option("--doppler-value", o.doppler_value, "sweep-doppler fixed alpha value");
    cmd->add_option("--doppler-mean-hz", o.doppler_mean, "sweep-doppler carrier mean (Hz)");
    cmd->add_option("--doppler-std-hz", o.doppler_std, "sweep-doppler carrier std (Hz)");
    cmd->add_option("--doppler-min-hz", o.doppler_min, "sweep-doppler carrier lower bound (Hz)");
    cmd->add_option("--doppler-max-hz", o.doppler_max, "sweep-doppler carrier upper bound (Hz)");
    cmd->add_option("--periods", o.periods, "dataset size in transmitted symbol periods");
    cmd->add_option("--split", o.split, "train,val,test fractions")->delimiter(',');
    cmd->add_option("--symbols-per-transmission", o.spt, "symbols per independent transmission");
    cmd->add_option("--frame-len", o.frame_len, "frame length in samples");
    cmd->add_option("--overlap", o.overlap, "frame overlap fraction");
    cmd->add_option("--dbn-geometry", o.dbn_geometry, "DBN layer sizes, e.g. 120,500,784")->delimiter(',');
    cmd->add_option("--cd-steps", o.cd_steps, "contrastive divergence steps");
    cmd->add_option("--dbn-lr", o.dbn_lr, "DBN learning rate");
    cmd->add_option("--dbn-epochs", o.dbn_epochs, "DBN epochs per layer");
    cmd->add_option("--dbn-batch", o.dbn_batch, "DBN batch size");
    cmd->add_option("--dense-lr", o.dense_lr, "dense net learning rate");
    cmd->add_option("--dense-epochs", o.dense_epochs, "dense net max epochs");
    cmd->add_option("--dense-batch", o.dense_batch, "dense net batch size");
    cmd->add_option("--dense-patience", o.dense_patience, "dense net early-stop patience");
    cmd->add_option("--conv-lr", o.conv_lr, "conv net learning rate");
    cmd->add_option("--conv-epochs", o.conv_epochs, "conv net max epochs");
    cmd->add_option("--conv-batch", o.conv_batch, "conv net batch size");
    cmd->add_option("--conv-patience", o.conv_patience, "conv net early-stop patience");
    cmd->add_option("--acc-ladder", o.acc_ladder, "training-size ladder; 0 = full split")->delimiter(',');
    cmd->add_option("--mle-symbols", o.mle_symbols, "symbols per point for baseline-only curves");
    auto* seed_opt = cmd->add_option("--seed", o.seed, "master RNG seed");
    if (seed_required) seed_opt->required();
}

void apply_alpha_overrides(AlphaDistribution& dist, const std::optional<std::string>& kind,
                           const std::optional<double>& value, const std::optional<double>& mean,
                           const std::optional<double>& std_dev, const std::optional<double>& lo,
                           const std::optional<double>& hi) {
    if (kind) {
        if (*kind == "fixed")
            dist.kind = AlphaDistribution::Kind::fixed;
        else if (*kind == "carrier_normal")
            dist.kind = AlphaDistribution::Kind::carrier_truncnormal;
        else
            throw config_error("alpha kind must be fixed or carrier_normal");
    }
    if (value) dist.fixed_value = *value;
    if (mean) dist.mean_hz = *mean;
    if (std_dev) dist.std_hz = *std_dev;
    if (lo) dist.min_hz = *lo;
    if (hi) dist.max_hz = *hi;
}

ExperimentConfig resolve_config(const std::string& config_path, const Overrides& o) {
    ExperimentConfig cfg = load_config_file(config_path);
    if (o.schemes) cfg.scheme_orders = *o.schemes;
    if (o.carrier_hz) cfg.mod.carrier_hz = *o.carrier_hz;
    if (o.sample_rate_hz) cfg.mod.sample_rate_hz = *o.sample_rate_hz;
    if (o.samples_per_symbol) cfg.mod.samples_per_symbol = *o.samples_per_symbol;
    if (o.snr_grid) {
        cfg.channel.snr_db_grid.clear();
        for (const std::string& s : *o.snr_grid) cfg.channel.snr_db_grid.push_back(parse_snr_string(s));
    }
    if (o.snr_reference) {
        if (*o.snr_reference == "per_bit")
            cfg.channel.snr_is_per_bit = true;
        else if (*o.snr_reference == "per_sample")
            cfg.channel.snr_is_per_bit = false;
        else
            throw config_error("--snr-reference must be per_bit or per_sample");
    }
    apply_alpha_overrides(cfg.channel.alpha, o.alpha_kind, o.alpha_value, o.alpha_mean, o.alpha_std, o.alpha_min,
                          o.alpha_max);
    apply_alpha_overrides(cfg.doppler_alpha, o.doppler_kind, o.doppler_value, o.doppler_mean, o.doppler_std,
                          o.doppler_min, o.doppler_max);
    if (o.periods) cfg.dataset_size_periods = *o.periods;
    if (o.split) {
        if (o.split->size() != 3) throw config_error("--split needs exactly 3 fractions");
        cfg.split_train = (*o.split)[0];
        cfg.split_val = (*o.split)[1];
        cfg.split_test = (*o.split)[2];
    }
    if (o.spt) cfg.symbols_per_transmission = *o.spt;
    if (o.frame_len) cfg.frame_len = *o.frame_len;
    if (o.overlap) cfg.overlap_frac = *o.overlap;
    if (o.dbn_geometry) cfg.dbn_geometry = *o.dbn_geometry;
    if (o.cd_steps) cfg.dbn.cd_steps = *o.cd_steps;
    if (o.dbn_lr) cfg.dbn.learning_rate = *o.dbn_lr;
    if (o.dbn_epochs) cfg.dbn.epochs = *o.dbn_epochs;
    if (o.dbn_batch) cfg.dbn.batch_size = *o.dbn_batch;
    if (o.dense_lr) cfg.dense_cfg.learning_rate = *o.dense_lr;
    if (o.dense_epochs) cfg.dense_cfg.epochs = *o.dense_epochs;
    if (o.dense_batch) cfg.dense_cfg.batch_size = *o.dense_batch;
    if (o.dense_patience) cfg.dense_cfg.early_stop_patience = *o.dense_patience;
    if (o.conv_lr) cfg.conv_cfg.learning_rate = *o.conv_lr;
    if (o.conv_epochs) cfg.conv_cfg.epochs = *o.conv_epochs;
    if (o.conv_batch) cfg.conv_cfg.batch_size = *o.conv_batch;
    if (o.conv_patience) cfg.conv_cfg.early_stop_patience = *o.conv_patience;
    if (o.acc_ladder) cfg.acc_ladder = *o.acc_ladder;
    if (o.mle_symbols) cfg.mle_reference_symbols = *o.mle_symbols;
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

std::vector<double> distinct_snrs(const LabeledFrames& frames) {
    std::vector<double> grid = frames.snr_db;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"swacdem: PSK demodulation testbed (DBN feature extraction + NN/CNN classifiers vs coherent MLE)"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its fields")->expected(1);

    Overrides o;
    std::string out_path, dataset_path, model_path;
    int gen_scheme = 0;

    CLI::App* gen = app.add_subcommand("gen", "generate a dataset file");
    add_override_flags(gen, o, true);
    gen->add_option("--scheme", gen_scheme, "PSK order for this dataset (default: first configured)");
    gen->add_option("--out", out_path, "output dataset file")->required();

    CLI::App* train = app.add_subcommand("train", "train DBN + classifiers on a dataset file");
    add_override_flags(train, o, true);
    train->add_option("--dataset", dataset_path, "input dataset file")->required();
    train->add_option("--out", model_path, "output model artifact")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a model artifact on a dataset's test split");
    eval->add_option("--model", model_path, "model artifact")->required();
    eval->add_option("--dataset", dataset_path, "dataset file")->required();
    eval->add_option("--out", out_path, "output BER CSV")->required();

    CLI::App* sweep_ber = app.add_subcommand("sweep-ber", "experiment 1: BER vs SNR, fixed channel");
    add_override_flags(sweep_ber, o, true);
    sweep_ber->add_option("--out", out_path, "output BER CSV")->required();

    CLI::App* sweep_doppler = app.add_subcommand("sweep-doppler", "experiment 2: BER under randomized carrier");
    add_override_flags(sweep_doppler, o, true);
    sweep_doppler->add_option("--out", out_path, "output BER CSV")->required();

    CLI::App* acc = app.add_subcommand("acc-curve", "experiment 3: accuracy vs training-set size");
    add_override_flags(acc, o, true);
    acc->add_option("--out", out_path, "output accuracy CSV")->required();

    CLI::App* features = app.add_subcommand("features", "export DBN feature scatter for a dataset's test split");
    features->add_option("--model", model_path, "model artifact")->required();
    features->add_option("--dataset", dataset_path, "dataset file")->required();
    features->add_option("--out", out_path, "output scatter CSV")->required();

    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in oracle checks");
    (void)selftest;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            ExperimentConfig cfg = resolve_config(config_path, o);
            cfg.validate();
            const int order = gen_scheme > 0 ? gen_scheme : cfg.scheme_orders.front();
            const DatasetSplit ds =
                generate_dataset(cfg, PskScheme::of(order), cfg.channel.alpha, cfg.seed);
            save_dataset(ds, out_path);
            std::printf("dataset: scheme %d-PSK, %d/%d/%d train/val/test frames -> %s\n", order, ds.train.size(),
                        ds.val.size(), ds.test.size(), out_path.c_str());
        } else if (train->parsed()) {
            ExperimentConfig cfg = resolve_config(config_path, o);
            cfg.validate();
            const DatasetSplit ds = load_dataset(dataset_path);
            const ModelArtifact artifact = train_pipelines(ds, cfg, cfg.seed);
            save_model(artifact, model_path);
            std::printf("model: %zu DBN layers, dense %s, conv %s -> %s\n", artifact.dbn.layers.size(),
                        artifact.dense ? "yes" : "no", artifact.conv ? "yes" : "no", model_path.c_str());
        } else if (eval->parsed()) {
            const ModelArtifact artifact = load_model(model_path);
            const DatasetSplit ds = load_dataset(dataset_path);
            if (artifact.meta.train_split_hash != ds.train_hash)
                std::fprintf(stderr,
                             "warning: model was trained on a different dataset (train-split hash mismatch); "
                             "normalization stats follow the model\n");
            const std::vector<double> grid = distinct_snrs(ds.test);
            std::vector<BerCurve> curves = evaluate_model_curves(artifact, ds.test, grid);
            curves.push_back(evaluate_mle_on_frames("MLE", ds.test, ds.scheme, ds.mod, grid));
            write_ber_csv(out_path, curves);
            std::printf("eval: %zu curves over %zu SNR points -> %s\n", curves.size(), grid.size(),
                        out_path.c_str());
        } else if (sweep_ber->parsed()) {
            ExperimentConfig cfg = resolve_config(config_path, o);
            cfg.validate();
            write_ber_csv(out_path, run_ber_sweep(cfg));
            std::printf("sweep-ber -> %s\n", out_path.c_str());
        } else if (sweep_doppler->parsed()) {
            ExperimentConfig cfg = resolve_config(config_path, o);
            cfg.validate();
            write_ber_csv(out_path, run_doppler_sweep(cfg));
            std::printf("sweep-doppler -> %s\n", out_path.c_str());
        } else if (acc->parsed()) {
            ExperimentConfig cfg = resolve_config(config_path, o);
            cfg.validate();
            write_accuracy_csv(out_path, run_accuracy_vs_trainsize(cfg));
            std::printf("acc-curve -> %s\n", out_path.c_str());
        } else if (features->parsed()) {
            const ModelArtifact artifact = load_model(model_path);
            const DatasetSplit ds = load_dataset(dataset_path);
            export_feature_scatter(artifact.dbn, artifact.stats, ds.test, out_path);
            std::printf("features: %d rows -> %s\n", ds.test.size(), out_path.c_str());
        } else {
            return swacdem::run_selftest() ? 0 : 3;
        }
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const io_error& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
