#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvad/layers.hpp"
#include "pvad/memory_bank.hpp"
#include "pvad/tensor.hpp"

namespace pvad {

struct ModelConfig {
    std::size_t frame_size = 64;   // 16, 64 or 256
    std::size_t clip_len = 16;     // frames per clip, must be even
    std::size_t channels = 64;     // temporal token width C
    std::size_t t_max = 20;        // phase categories
    std::size_t mem_slots = 200;   // memory rows M
    bool use_memory = true;
    NormalizeMode normalize_mode = NormalizeMode::column;
    double lambda_period = 1.0;

    void validate() const {
        if (frame_size != 16 && frame_size != 64 && frame_size != 256)
            throw ConfigError("model: frame_size must be 16, 64 or 256");
        if (clip_len < 2 || clip_len % 2 != 0)
            throw ConfigError("model: clip_len must be even and at least 2");
        if (channels == 0 || t_max < 2 || mem_slots == 0)
            throw ConfigError("model: channels, t_max and mem_slots must be positive");
    }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename S>
struct ClipResult {
    nn::Tensor<S> recon;         // (T, H, W, 1)
    nn::Tensor<S> features;      // (T/2, C), pre-memory
    nn::Tensor<S> phase_logits;  // (1, t_max)
    nn::Tensor<S> phase_probs;   // (1, t_max)
    std::size_t predicted_phase = 0;
};

template <typename S>
struct LossBreakdown {
    S recon = S(0);
    S period = S(0);
    S total = S(0);
};

namespace detail {
struct ConvStep {
    std::size_t out_ch, k, stride;
};

inline std::vector<ConvStep> encoder_plan(std::size_t frame_size) {
    switch (frame_size) {
        case 16: return {{8, 4, 2}, {8, 3, 2}};
        case 64: return {{8, 4, 4}, {16, 4, 2}, {32, 3, 2}};
        default: return {{8, 8, 8}, {16, 4, 2}, {32, 3, 2}};
    }
}
}  // namespace detail

/// Reconstruction autoencoder over short clips with a phase classifier and a
/// phase-conditioned memory between encoder and decoder. Scalar type S is
/// float for training and double for gradient verification.
template <typename S>
class VadModel {
public:
    explicit VadModel(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto plan = detail::encoder_plan(cfg_.frame_size);
        std::size_t extent = cfg_.frame_size, ch = 1;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            enc_convs_.emplace_back("enc.conv" + std::to_string(i + 1), ch, plan[i].out_ch,
                                    plan[i].k, plan[i].stride);
            extent = nn::Conv2d<S>::out_extent(extent, plan[i].k, plan[i].stride);
            ch = plan[i].out_ch;
        }
        enc_gelus_.resize(plan.size());
        grid_extent_ = extent;
        grid_ch_ = ch;
        flat_dim_ = extent * extent * ch;
        patch_proj_ = nn::Dense<S>("enc.patch_proj", flat_dim_, cfg_.channels);
        pos_emb_ = nn::Embedding<S>("enc.pos_emb", cfg_.clip_len / 2, cfg_.channels);
        ln1_ = nn::LayerNorm<S>("enc.ln1", cfg_.channels);
        attn_ = nn::Attention<S>("enc.attn", cfg_.channels);
        ln2_ = nn::LayerNorm<S>("enc.ln2", cfg_.channels);
        head_ = nn::Dense<S>("period.head", cfg_.channels, cfg_.t_max);
        memory_ = MemoryBank<S>(cfg_.mem_slots, cfg_.channels, cfg_.t_max, cfg_.normalize_mode);
        dec_proj_ = nn::Dense<S>("dec.patch_proj", cfg_.channels, flat_dim_);
        std::size_t dch = ch;
        for (std::size_t i = plan.size(); i-- > 0;) {
            const std::size_t out = i == 0 ? 1 : plan[i - 1].out_ch;
            dec_convs_.emplace_back("dec.deconv" + std::to_string(plan.size() - i), dch, out,
                                    plan[i].k, plan[i].stride);
            dch = out;
        }
        dec_gelus_.resize(plan.size());
    }

    const ModelConfig& config() const { return cfg_; }

    /// Draws every weight matrix from N(0, 1/sqrt(fan_in)), the position
    /// table from N(0, 0.02) and the memory bank uniform in +-1/sqrt(C);
    /// biases stay zero and layernorm gains stay one. One sequential stream
    /// keeps this reproducible for a given seed regardless of platform.
    void init_params(std::uint64_t seed) {
        StreamRng rng(seed, "init");
        for (auto* p : parameters()) {
            if (p->name.ends_with(".w")) {
                const auto fan_in =
                    static_cast<double>(p->value.size() / p->value.dim(0));
                p->value.fill_normal(rng, 0.0, 1.0 / std::sqrt(fan_in));
            } else if (p->name.ends_with(".table")) {
                p->value.fill_normal(rng, 0.0, 0.02);
            } else if (p->name == "memory.bank") {
                const double r = 1.0 / std::sqrt(static_cast<double>(cfg_.channels));
                p->value.fill_uniform(rng, -r, r);
            }
        }
    }

    ClipResult<S> forward(const nn::Tensor<S>& clip) {
        check_clip(clip);
        const std::size_t t_len = cfg_.clip_len, t_half = t_len / 2;
        // Per-frame encoder, clip axis as batch.
        nn::Tensor<S> h = clip;
        for (std::size_t i = 0; i < enc_convs_.size(); ++i)
            h = enc_gelus_[i].forward(enc_convs_[i].forward(h));
        h.reshape({t_len, flat_dim_});
        nn::Tensor<S> tokens = patch_proj_.forward(h);  // (T, C)
        // Average adjacent frames to halve the temporal length, then mark each
        // slot with its learned position so attention can tell time order.
        nn::Tensor<S> down({t_half, cfg_.channels});
        std::vector<std::size_t> positions(t_half);
        for (std::size_t t = 0; t < t_half; ++t) positions[t] = t;
        const nn::Tensor<S> pe = pos_emb_.forward(positions);
        for (std::size_t t = 0; t < t_half; ++t)
            for (std::size_t c = 0; c < cfg_.channels; ++c)
                down.at(t, c) =
                    S(0.5) * (tokens.at(2 * t, c) + tokens.at(2 * t + 1, c)) + pe.at(t, c);
        nn::Tensor<S> l1 = ln1_.forward(down);
        nn::Tensor<S> mixed = attn_.forward(l1);
        for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += l1[i];
        ClipResult<S> out;
        out.features = ln2_.forward(mixed);  // (T/2, C)
        // Phase head reads the time-pooled feature.
        nn::Tensor<S> pooled({1, cfg_.channels});
        for (std::size_t t = 0; t < t_half; ++t)
            for (std::size_t c = 0; c < cfg_.channels; ++c)
                pooled.at(0, c) += out.features.at(t, c) / static_cast<S>(t_half);
        out.phase_logits = head_.forward(pooled);
        out.phase_probs = out.phase_logits;
        nn::softmax_rows_inplace(out.phase_probs);
        out.predicted_phase = argmax_phase(out.phase_probs);
        // Memory read, then decode.
        nn::Tensor<S> retrieved = out.features;
        if (cfg_.use_memory) {
            nn::Tensor<S> probs_row({cfg_.t_max});
            for (std::size_t i = 0; i < cfg_.t_max; ++i)
                probs_row[i] = pinned_memory_probs_.empty() ? out.phase_probs[i]
                                                            : pinned_memory_probs_[i];
            retrieved = memory_.forward(out.features, probs_row);
        }
        nn::Tensor<S> up({t_len, cfg_.channels});
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t c = 0; c < cfg_.channels; ++c)
                up.at(t, c) = retrieved.at(t / 2, c);
        nn::Tensor<S> d = dec_gelus_[0].forward(dec_proj_.forward(up));
        d.reshape({t_len, grid_extent_, grid_extent_, grid_ch_});
        for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
            d = dec_convs_[i].forward(d);
            if (i + 1 < dec_convs_.size()) d = dec_gelus_[i + 1].forward(d);
        }
        out.recon = std::move(d);
        return out;
    }

    LossBreakdown<S> loss(const ClipResult<S>& r, const nn::Tensor<S>& clip,
                          std::size_t phase_label) const {
        check_clip(clip);
        if (phase_label >= cfg_.t_max)
            throw ConfigError("model: phase label " + std::to_string(phase_label) +
                              " out of range [0," + std::to_string(cfg_.t_max) + ")");
        LossBreakdown<S> lb;
        for (std::size_t i = 0; i < clip.size(); ++i) {
            const S d = r.recon[i] - clip[i];
            lb.recon += d * d;
        }
        lb.recon /= static_cast<S>(clip.size());
        lb.period = -std::log(std::max(r.phase_probs[phase_label], S(1e-12)));
        lb.total = lb.recon + static_cast<S>(cfg_.lambda_period) * lb.period;
        return lb;
    }

    /// Accumulates gradients of loss() into the parameters. Must follow the
    /// forward() call whose caches are still live.
    void backward(const ClipResult<S>& r, const nn::Tensor<S>& clip, std::size_t phase_label) {
        const std::size_t t_len = cfg_.clip_len, t_half = t_len / 2;
        nn::Tensor<S> drecon(r.recon.shape());
        const S scale = S(2) / static_cast<S>(clip.size());
        for (std::size_t i = 0; i < clip.size(); ++i)
            drecon[i] = scale * (r.recon[i] - clip[i]);
        // Decoder stack in reverse.
        nn::Tensor<S> d = drecon;
        for (std::size_t i = dec_convs_.size(); i-- > 0;) {
            d = dec_convs_[i].backward(d);
            if (i > 0) d = dec_gelus_[i].backward(d);
        }
        d.reshape({t_len, flat_dim_});
        nn::Tensor<S> dup = dec_proj_.backward(dec_gelus_[0].backward(d));
        nn::Tensor<S> dret({t_half, cfg_.channels});
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t c = 0; c < cfg_.channels; ++c)
                dret.at(t / 2, c) += dup.at(t, c);
        nn::Tensor<S> dfeat =
            cfg_.use_memory ? memory_.backward(dret) : std::move(dret);
        // Phase cross-entropy; the boost factor stays a constant so the only
        // path into the head is this term.
        nn::Tensor<S> dlogits({1, cfg_.t_max});
        const S lam = static_cast<S>(cfg_.lambda_period);
        for (std::size_t i = 0; i < cfg_.t_max; ++i) {
            dlogits.at(0, i) = lam * r.phase_probs[i];
            if (i == phase_label) dlogits.at(0, i) -= lam;
        }
        nn::Tensor<S> dpooled = head_.backward(dlogits);
        for (std::size_t t = 0; t < t_half; ++t)
            for (std::size_t c = 0; c < cfg_.channels; ++c)
                dfeat.at(t, c) += dpooled.at(0, c) / static_cast<S>(t_half);
        nn::Tensor<S> dmixed = ln2_.backward(dfeat);
        nn::Tensor<S> dl1 = attn_.backward(dmixed);
        for (std::size_t i = 0; i < dl1.size(); ++i) dl1[i] += dmixed[i];
        nn::Tensor<S> ddown = ln1_.backward(dl1);
        pos_emb_.backward(ddown);
        nn::Tensor<S> dtokens({t_len, cfg_.channels});
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t c = 0; c < cfg_.channels; ++c)
                dtokens.at(t, c) = S(0.5) * ddown.at(t / 2, c);
        nn::Tensor<S> dh = patch_proj_.backward(dtokens);
        dh.reshape({t_len, grid_extent_, grid_extent_, grid_ch_});
        for (std::size_t i = enc_convs_.size(); i-- > 0;)
            dh = enc_convs_[i].backward(enc_gelus_[i].backward(dh));
    }

    std::vector<nn::Parameter<S>*> parameters() {
        std::vector<nn::Parameter<S>*> out;
        auto take = [&out](std::vector<nn::Parameter<S>*> ps) {
            out.insert(out.end(), ps.begin(), ps.end());
        };
        for (auto& c : enc_convs_) take(c.params());
        take(patch_proj_.params());
        take(pos_emb_.params());
        take(ln1_.params());
        take(attn_.params());
        take(ln2_.params());
        take(head_.params());
        if (cfg_.use_memory) take(memory_.params());
        take(dec_proj_.params());
        for (auto& c : dec_convs_) take(c.params());
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : parameters()) n += p->value.size();
        return n;
    }
    std::size_t trainable_param_count() {
        std::size_t n = 0;
        for (auto* p : parameters())
            if (p->trainable) n += p->value.size();
        return n;
    }

    void set_skip_frozen_param_grads(bool v) {
        for (auto& c : enc_convs_) c.set_skip_frozen_param_grads(v);
        patch_proj_.set_skip_frozen_param_grads(v);
        pos_emb_.set_skip_frozen_param_grads(v);
        ln1_.set_skip_frozen_param_grads(v);
        attn_.set_skip_frozen_param_grads(v);
        ln2_.set_skip_frozen_param_grads(v);
        head_.set_skip_frozen_param_grads(v);
        memory_.set_skip_frozen_param_grads(v);
        dec_proj_.set_skip_frozen_param_grads(v);
        for (auto& c : dec_convs_) c.set_skip_frozen_param_grads(v);
    }

    nn::Attention<S>& attention() { return attn_; }
    MemoryBank<S>& memory() { return memory_; }
    nn::Dense<S>& patch_projection() { return patch_proj_; }

    /// Pins the phase distribution fed to the memory read; the phase decision
    /// and boost stay fixed while everything else varies. The classification
    /// loss keeps seeing live probabilities. Gradient verification uses this
    /// to hold the non-differentiable conditioning at its base value.
    void pin_memory_conditioning(const nn::Tensor<S>& probs) {
        if (probs.size() != cfg_.t_max)
            throw ShapeError("model: pinned distribution " + nn::shape_str(probs.shape()) +
                             " does not match t_max " + std::to_string(cfg_.t_max));
        pinned_memory_probs_ = probs;
    }
    void unpin_memory_conditioning() { pinned_memory_probs_ = nn::Tensor<S>(); }

    void save_checkpoint(const std::string& path) {
        auto params = parameters();
        nlohmann::json header;
        header["format_version"] = 1;
        header["dtype"] = sizeof(S) == 4 ? "f32" : "f64";
        header["model"] = cfg_;
        auto& tensors = header["tensors"];
        tensors = nlohmann::json::array();
        for (auto* p : params)
            tensors.push_back({{"name", p->name},
                               {"shape", p->value.shape()},
                               {"trainable", p->trainable}});
        const std::string hs = header.dump();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + path);
        out.write("PVADCKPT", 8);
        const auto len = static_cast<std::uint32_t>(hs.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (auto* p : params)
            out.write(reinterpret_cast<const char*>(p->value.data()),
                      static_cast<std::streamsize>(p->value.size() * sizeof(S)));
        if (!out) throw IoError("short write while saving checkpoint " + path);
    }

    /// Loads weights saved by save_checkpoint. The stored architecture,
    /// dtype and tensor set must all match this model exactly.
    void load_checkpoint(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open checkpoint " + path);
        nlohmann::json header = read_checkpoint_header(in, path);
        const ModelConfig stored = header.at("model").get<ModelConfig>();
        const std::string want_dtype = sizeof(S) == 4 ? "f32" : "f64";
        if (header.at("dtype").get<std::string>() != want_dtype)
            throw IoError("checkpoint " + path + " holds " +
                          header.at("dtype").get<std::string>() + " weights, model wants " +
                          want_dtype);
        if (nlohmann::json(stored) != nlohmann::json(cfg_))
            throw IoError("checkpoint " + path + " was saved for a different architecture");
        auto params = parameters();
        const auto& tensors = header.at("tensors");
        if (tensors.size() != params.size())
            throw IoError("checkpoint " + path + " holds " + std::to_string(tensors.size()) +
                          " tensors, model has " + std::to_string(params.size()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& t = tensors[i];
            if (t.at("name").get<std::string>() != params[i]->name)
                throw IoError("checkpoint tensor '" + t.at("name").get<std::string>() +
                              "' does not match parameter '" + params[i]->name + "'");
            if (t.at("shape").get<std::vector<std::size_t>>() != params[i]->value.shape())
                throw IoError("checkpoint tensor '" + params[i]->name + "' has shape " +
                              nn::shape_str(t.at("shape").get<std::vector<std::size_t>>()) +
                              ", expected " + nn::shape_str(params[i]->value.shape()));
            params[i]->trainable = t.at("trainable").get<bool>();
            in.read(reinterpret_cast<char*>(params[i]->value.data()),
                    static_cast<std::streamsize>(params[i]->value.size() * sizeof(S)));
            if (!in) throw IoError("checkpoint " + path + " is truncated");
        }
    }

    static nlohmann::json read_checkpoint_header(std::ifstream& in, const std::string& path) {
        char magic[8];
        in.read(magic, 8);
        if (!in || std::string(magic, 8) != "PVADCKPT")
            throw IoError(path + " is not a checkpoint file");
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 4);
        std::string hs(len, '\0');
        in.read(hs.data(), len);
        if (!in) throw IoError("checkpoint " + path + " has a truncated header");
        return nlohmann::json::parse(hs);
    }

private:
    void check_clip(const nn::Tensor<S>& clip) const {
        if (clip.rank() != 4 || clip.dim(0) != cfg_.clip_len || clip.dim(1) != cfg_.frame_size ||
            clip.dim(2) != cfg_.frame_size || clip.dim(3) != 1)
            throw ShapeError("model: clip " + nn::shape_str(clip.shape()) + " does not match (" +
                             std::to_string(cfg_.clip_len) + "x" +
                             std::to_string(cfg_.frame_size) + "x" +
                             std::to_string(cfg_.frame_size) + "x1)");
    }

    ModelConfig cfg_;
    std::size_t grid_extent_ = 0, grid_ch_ = 0, flat_dim_ = 0;
    std::vector<nn::Conv2d<S>> enc_convs_;
    std::vector<nn::Gelu<S>> enc_gelus_;
    nn::Dense<S> patch_proj_;
    nn::Embedding<S> pos_emb_;
    nn::LayerNorm<S> ln1_;
    nn::Attention<S> attn_;
    nn::LayerNorm<S> ln2_;
    nn::Dense<S> head_;
    MemoryBank<S> memory_;
    nn::Dense<S> dec_proj_;
    std::vector<nn::Conv2dTranspose<S>> dec_convs_;
    std::vector<nn::Gelu<S>> dec_gelus_;
    nn::Tensor<S> pinned_memory_probs_;
};

/// Reads just the JSON header of a checkpoint file.
nlohmann::json checkpoint_header(const std::string& path);

}  // namespace pvad
