#pragma once

// Model artifact container. Binary layout, little-endian:
//   magic "SWACDM01" | u32 format version | sections | u32 CRC-32
// Each section is: u32 tag | u64 payload length | payload. The CRC covers
// everything before it. Version mismatch, truncation and checksum failure
// are reported as distinct errors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swacdem/binio.hpp"
#include "swacdem/classify.hpp"
#include "swacdem/common.hpp"
#include "swacdem/dbn.hpp"
#include "swacdem/sigproc.hpp"

namespace swacdem {

struct artifact_error : io_error {
    enum class Kind { bad_magic, version_mismatch, truncated, checksum_mismatch, malformed };
    Kind kind;
    artifact_error(Kind k, const std::string& msg) : io_error(msg), kind(k) {}
};

// Training provenance kept alongside the parameters.
struct TrainingMeta {
    std::uint64_t master_seed = 0;
    DbnTrainSpec dbn_spec;
    ClassifierTrainConfig dense_cfg;
    ClassifierTrainConfig conv_cfg;
    double dbn_final_recon_error = 0.0;
    double dense_final_val_loss = 0.0;
    double conv_final_val_loss = 0.0;
    std::uint64_t train_split_hash = 0;  // fnv1a64 of the training frames the stats came from
};

struct ModelArtifact {
    std::uint32_t version = kFormatVersion;
    PskScheme scheme;
    ModulationConfig mod;
    NormStats stats;          // frame normalization, fitted on the train split
    FeatureMoments moments;   // feature-image standardization, same provenance
    DbnModel dbn;
    std::optional<DenseNet> dense;
    std::optional<ConvNet> conv;
    TrainingMeta meta;

    static constexpr std::uint32_t kFormatVersion = 1;
};

namespace detail {

constexpr char kArtifactMagic[9] = "SWACDM01";

enum SectionTag : std::uint32_t {
    kSectionConfig = 0x43464721,   // scheme + modulation config
    kSectionNorm = 0x4e4f524d,     // normalization stats
    kSectionMoments = 0x4d4f4d53,  // feature-image standardization moments
    kSectionDbn = 0x44424e21,      // DBN layers
    kSectionDense = 0x44454e53,    // dense classifier
    kSectionConv = 0x434f4e56,     // conv classifier
    kSectionMeta = 0x4d455441,     // training metadata
};

inline void write_section(binio::Writer& out, std::uint32_t tag, const binio::Writer& payload) {
    out.u32(tag);
    out.u64(payload.bytes.size());
    out.raw(payload.bytes.data(), payload.bytes.size());
}

inline void write_dense_net(binio::Writer& w, const DenseNet& net) {
    w.u32(static_cast<std::uint32_t>(net.layers.size()));
    for (const DenseLayer& l : net.layers) {
        binio::mat_write(w, l.weights);
        binio::vec_write(w, l.bias);
    }
}

inline DenseNet read_dense_net(binio::Reader& r) {
    DenseNet net;
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        DenseLayer l;
        l.weights = binio::mat_read(r);
        l.bias = binio::vec_read(r);
        net.layers.push_back(std::move(l));
    }
    return net;
}

inline void write_conv_net(binio::Writer& w, const ConvNet& net) {
    w.i32(net.geom.input_hw);
    w.i32(net.geom.padded_hw);
    w.u32(static_cast<std::uint32_t>(net.geom.stages.size()));
    for (const ConvStage& st : net.geom.stages) {
        w.i32(st.kernel);
        w.i32(st.maps);
        w.u8(st.pool_after ? 1 : 0);
    }
    binio::ivec_write(w, net.geom.dense_hidden);
    w.i32(net.geom.num_classes);
    for (size_t s = 0; s < net.conv_weights.size(); ++s) {
        binio::mat_write(w, net.conv_weights[s]);
        binio::vec_write(w, net.conv_bias[s]);
    }
    w.u32(static_cast<std::uint32_t>(net.dense.size()));
    for (const DenseLayer& l : net.dense) {
        binio::mat_write(w, l.weights);
        binio::vec_write(w, l.bias);
    }
}

inline ConvNet read_conv_net(binio::Reader& r) {
    ConvNet net;
    net.geom.input_hw = r.i32();
    net.geom.padded_hw = r.i32();
    const std::uint32_t ns = r.u32();
    for (std::uint32_t s = 0; s < ns; ++s) {
        ConvStage st;
        st.kernel = r.i32();
        st.maps = r.i32();
        st.pool_after = r.u8() != 0;
        net.geom.stages.push_back(st);
    }
    net.geom.dense_hidden = binio::ivec_read(r);
    net.geom.num_classes = r.i32();
    for (std::uint32_t s = 0; s < ns; ++s) {
        net.conv_weights.push_back(binio::mat_read(r));
        net.conv_bias.push_back(binio::vec_read(r));
    }
    const std::uint32_t nd = r.u32();
    for (std::uint32_t l = 0; l < nd; ++l) {
        DenseLayer dl;
        dl.weights = binio::mat_read(r);
        dl.bias = binio::vec_read(r);
        net.dense.push_back(std::move(dl));
    }
    return net;
}

inline void write_classifier_cfg(binio::Writer& w, const ClassifierTrainConfig& c) {
    w.f64(c.learning_rate);
    w.i32(c.epochs);
    w.i32(c.batch_size);
    w.u64(c.rng_seed);
    w.i32(c.early_stop_patience);
}

inline ClassifierTrainConfig read_classifier_cfg(binio::Reader& r) {
    ClassifierTrainConfig c;
    c.learning_rate = r.f64();
    c.epochs = r.i32();
    c.batch_size = r.i32();
    c.rng_seed = r.u64();
    c.early_stop_patience = r.i32();
    return c;
}

}  // namespace detail

inline void save_model(const ModelArtifact& artifact, const std::string& path) {
    binio::Writer out;
    out.raw(detail::kArtifactMagic, 8);
    out.u32(ModelArtifact::kFormatVersion);

    {
        binio::Writer s;
        s.i32(artifact.scheme.order);
        s.f64(artifact.mod.carrier_hz);
        s.f64(artifact.mod.sample_rate_hz);
        s.i32(artifact.mod.samples_per_symbol);
        detail::write_section(out, detail::kSectionConfig, s);
    }
    {
        binio::Writer s;
        s.f64(artifact.stats.min);
        s.f64(artifact.stats.max);
        detail::write_section(out, detail::kSectionNorm, s);
    }
    if (!artifact.moments.mean.empty()) {
        binio::Writer s;
        binio::vec_write(s, artifact.moments.mean);
        binio::vec_write(s, artifact.moments.stddev);
        detail::write_section(out, detail::kSectionMoments, s);
    }
    {
        binio::Writer s;
        s.u32(static_cast<std::uint32_t>(artifact.dbn.layers.size()));
        for (const RbmLayer& l : artifact.dbn.layers) {
            binio::mat_write(s, l.weights);
            binio::vec_write(s, l.vbias);
            binio::vec_write(s, l.hbias);
        }
        detail::write_section(out, detail::kSectionDbn, s);
    }
    if (artifact.dense) {
        binio::Writer s;
        detail::write_dense_net(s, *artifact.dense);
        detail::write_section(out, detail::kSectionDense, s);
    }
    if (artifact.conv) {
        binio::Writer s;
        detail::write_conv_net(s, *artifact.conv);
        detail::write_section(out, detail::kSectionConv, s);
    }
    {
        binio::Writer s;
        s.u64(artifact.meta.master_seed);
        s.i32(artifact.meta.dbn_spec.cd_steps);
        s.f64(artifact.meta.dbn_spec.learning_rate);
        s.i32(artifact.meta.dbn_spec.epochs);
        s.i32(artifact.meta.dbn_spec.batch_size);
        s.u64(artifact.meta.dbn_spec.rng_seed);
        detail::write_classifier_cfg(s, artifact.meta.dense_cfg);
        detail::write_classifier_cfg(s, artifact.meta.conv_cfg);
        s.f64(artifact.meta.dbn_final_recon_error);
        s.f64(artifact.meta.dense_final_val_loss);
        s.f64(artifact.meta.conv_final_val_loss);
        s.u64(artifact.meta.train_split_hash);
        detail::write_section(out, detail::kSectionMeta, s);
    }

    out.u32(binio::crc32(out.bytes.data(), out.bytes.size()));
    binio::write_file(path, out.bytes);
}

inline ModelArtifact load_model(const std::string& path) {
    const std::vector<unsigned char> bytes = binio::read_file(path);
    if (bytes.size() < 8 + 4 + 4)
        throw artifact_error(artifact_error::Kind::truncated, path + ": truncated artifact (only " +
                                                                   std::to_string(bytes.size()) + " bytes)");
    if (std::memcmp(bytes.data(), "SWACDM", 6) != 0)
        throw artifact_error(artifact_error::Kind::bad_magic, path + ": not a model artifact (bad magic)");
    if (std::memcmp(bytes.data(), detail::kArtifactMagic, 8) != 0)
        throw artifact_error(artifact_error::Kind::version_mismatch,
                             path + ": unsupported container revision in magic");

    const std::uint32_t stored_crc = binio::crc32(bytes.data(), bytes.size() - 4);
    binio::Reader crc_tail(bytes.data() + bytes.size() - 4, 4, path);
    if (crc_tail.u32() != stored_crc)
        throw artifact_error(artifact_error::Kind::checksum_mismatch, path + ": CRC-32 mismatch, file corrupted");

    binio::Reader r(bytes.data(), bytes.size() - 4, path);
    r.pos = 8;
    const std::uint32_t version = r.u32();
    if (version != ModelArtifact::kFormatVersion)
        throw artifact_error(artifact_error::Kind::version_mismatch,
                             path + ": artifact format version " + std::to_string(version) +
                                 ", this build reads version " + std::to_string(ModelArtifact::kFormatVersion));

    ModelArtifact artifact;
    artifact.version = version;
    bool saw_config = false, saw_norm = false, saw_dbn = false;
    try {
        while (r.remaining() > 0) {
            const std::uint32_t tag = r.u32();
            const std::uint64_t len = r.u64();
            r.need(len);
            binio::Reader s(r.p + r.pos, len, path);
            r.pos += len;
            switch (tag) {
                case detail::kSectionConfig: {
                    artifact.scheme = PskScheme::of(s.i32());
                    artifact.mod.carrier_hz = s.f64();
                    artifact.mod.sample_rate_hz = s.f64();
                    artifact.mod.samples_per_symbol = s.i32();
                    saw_config = true;
                    break;
                }
                case detail::kSectionNorm: {
                    artifact.stats.min = s.f64();
                    artifact.stats.max = s.f64();
                    saw_norm = true;
                    break;
                }
                case detail::kSectionMoments: {
                    artifact.moments.mean = binio::vec_read(s);
                    artifact.moments.stddev = binio::vec_read(s);
                    break;
                }
                case detail::kSectionDbn: {
                    const std::uint32_t n = s.u32();
                    for (std::uint32_t i = 0; i < n; ++i) {
                        RbmLayer l;
                        l.weights = binio::mat_read(s);
                        l.vbias = binio::vec_read(s);
                        l.hbias = binio::vec_read(s);
                        artifact.dbn.layers.push_back(std::move(l));
                    }
                    saw_dbn = true;
                    break;
                }
                case detail::kSectionDense:
                    artifact.dense = detail::read_dense_net(s);
                    break;
                case detail::kSectionConv:
                    artifact.conv = detail::read_conv_net(s);
                    break;
                case detail::kSectionMeta: {
                    artifact.meta.master_seed = s.u64();
                    artifact.meta.dbn_spec.cd_steps = s.i32();
                    artifact.meta.dbn_spec.learning_rate = s.f64();
                    artifact.meta.dbn_spec.epochs = s.i32();
                    artifact.meta.dbn_spec.batch_size = s.i32();
                    artifact.meta.dbn_spec.rng_seed = s.u64();
                    artifact.meta.dense_cfg = detail::read_classifier_cfg(s);
                    artifact.meta.conv_cfg = detail::read_classifier_cfg(s);
                    artifact.meta.dbn_final_recon_error = s.f64();
                    artifact.meta.dense_final_val_loss = s.f64();
                    artifact.meta.conv_final_val_loss = s.f64();
                    artifact.meta.train_split_hash = s.u64();
                    break;
                }
                default:
                    // unknown sections are skipped; the CRC already vouched for them
                    break;
            }
        }
    } catch (const io_error& e) {
        throw artifact_error(artifact_error::Kind::malformed, std::string("malformed artifact: ") + e.what());
    }
    if (!saw_config || !saw_norm || !saw_dbn)
        throw artifact_error(artifact_error::Kind::malformed, path + ": artifact missing required sections");
    return artifact;
}

}  // namespace swacdem
