#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "pvad/model.hpp"
#include "pvad/rng.hpp"
#include "pvad/train.hpp"

namespace pvad {

/// Low-rank adapter settings for the attention q and v projections.
struct PeftConfig {
    std::size_t rank = 4;
    double alpha = 8.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (rank == 0) throw ConfigError("peft: rank must be positive");
        if (!(alpha > 0.0)) throw ConfigError("peft: alpha must be positive");
    }
};

enum class FinetuneMode { full, peft };

FinetuneMode parse_finetune_mode(const std::string& s);
const char* finetune_mode_name(FinetuneMode m);

/// Whether a parameter stays trainable under the adapter freeze policy:
/// the encoder patch projection, both encoder layernorms, and adapter factors.
bool trainable_under_peft(const std::string& param_name);

/// Marks parameters per the freeze policy; everything else is frozen.
template <typename S>
void apply_peft_freeze(VadModel<S>& model) {
    for (auto* p : model.parameters()) p->trainable = trainable_under_peft(p->name);
}

/// Installs zero-initialized-output adapters on the attention q and v
/// projections and applies the freeze policy. The wrapped model computes
/// exactly the base map until the first optimizer step.
template <typename S>
void wrap_peft(VadModel<S>& model, const PeftConfig& cfg) {
    cfg.validate();
    auto& attn = model.attention();
    attn.q_proj().install_adapter(cfg.rank, cfg.alpha);
    attn.v_proj().install_adapter(cfg.rank, cfg.alpha);
    StreamRng rng(cfg.seed, "adapter");
    attn.q_proj().adapter().a.value.fill_normal(rng, 0.0, 0.02);
    attn.v_proj().adapter().a.value.fill_normal(rng, 0.0, 0.02);
    apply_peft_freeze(model);
}

template <typename S>
bool is_peft_wrapped(VadModel<S>& model) {
    auto& attn = model.attention();
    return attn.q_proj().has_adapter() && attn.v_proj().has_adapter();
}

/// Bakes both adapters into their base weights and re-enables every parameter.
template <typename S>
void merge_peft(VadModel<S>& model) {
    auto& attn = model.attention();
    attn.q_proj().merge_adapter();
    attn.v_proj().merge_adapter();
    for (auto* p : model.parameters()) p->trainable = true;
}

struct FinetuneResult {
    TrainLog log;
    std::size_t trainable_params = 0;
    std::size_t total_params = 0;
};

/// Adapts a pretrained model to a new dataset. `peft` wraps the attention
/// projections and trains only the freeze-policy survivors (skipping frozen
/// gradient accumulation); `full` updates every parameter. Few-shot data use
/// is driven by `tc.subset_fraction`.
template <typename S>
FinetuneResult finetune(VadModel<S>& model, const Dataset& ds, const TrainConfig& tc,
                        FinetuneMode mode, const PeftConfig& pc = {},
                        const std::string& checkpoint_path = "") {
    if (mode == FinetuneMode::peft) {
        wrap_peft(model, pc);
        model.set_skip_frozen_param_grads(true);
    }
    FinetuneResult result;
    result.log = train_model(model, ds, tc, checkpoint_path);
    result.trainable_params = model.trainable_param_count();
    result.total_params = model.param_count();
    model.set_skip_frozen_param_grads(false);
    return result;
}

namespace detail {

template <typename S>
std::vector<nn::Parameter<S>*> adapter_params(VadModel<S>& model) {
    if (!is_peft_wrapped(model))
        throw ConfigError("model has no adapters installed");
    auto& attn = model.attention();
    return {&attn.q_proj().adapter().a, &attn.q_proj().adapter().b,
            &attn.v_proj().adapter().a, &attn.v_proj().adapter().b};
}

}  // namespace detail

/// Writes only the adapter factors, small enough to ship next to a shared
/// base checkpoint.
template <typename S>
void save_adapters(VadModel<S>& model, const std::string& path) {
    auto params = detail::adapter_params(model);
    const auto& q = model.attention().q_proj().adapter();
    nlohmann::json header;
    header["format_version"] = 1;
    header["kind"] = "adapters";
    header["dtype"] = sizeof(S) == 4 ? "f32" : "f64";
    header["rank"] = q.rank;
    header["alpha"] = q.alpha;
    auto& tensors = header["tensors"];
    tensors = nlohmann::json::array();
    for (auto* p : params)
        tensors.push_back(
            {{"name", p->name}, {"shape", p->value.shape()}, {"trainable", p->trainable}});
    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write adapters " + path);
    out.write("PVADCKPT", 8);
    const auto len = static_cast<std::uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (auto* p : params)
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(S)));
    if (!out) throw IoError("short write while saving adapters " + path);
}

/// Restores adapter factors saved by save_adapters, wrapping the model first
/// when necessary (with the stored rank and alpha).
template <typename S>
void load_adapters(VadModel<S>& model, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open adapters " + path);
    nlohmann::json header = VadModel<S>::read_checkpoint_header(in, path);
    if (header.value("kind", "") != std::string("adapters"))
        throw IoError(path + " is not an adapter checkpoint");
    const std::string want_dtype = sizeof(S) == 4 ? "f32" : "f64";
    if (header.at("dtype").get<std::string>() != want_dtype)
        throw IoError("adapters " + path + " hold " + header.at("dtype").get<std::string>() +
                      " weights, model wants " + want_dtype);
    if (!is_peft_wrapped(model)) {
        PeftConfig pc;
        pc.rank = header.at("rank").get<std::size_t>();
        pc.alpha = header.at("alpha").get<double>();
        wrap_peft(model, pc);
    }
    auto params = detail::adapter_params(model);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size())
        throw IoError("adapters " + path + " hold " + std::to_string(tensors.size()) +
                      " tensors, expected " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != params[i]->name)
            throw IoError("adapter tensor '" + t.at("name").get<std::string>() +
                          "' does not match parameter '" + params[i]->name + "'");
        if (t.at("shape").get<std::vector<std::size_t>>() != params[i]->value.shape())
            throw IoError("adapter tensor '" + params[i]->name + "' has shape " +
                          nn::shape_str(t.at("shape").get<std::vector<std::size_t>>()) +
                          ", expected " + nn::shape_str(params[i]->value.shape()));
        params[i]->trainable = t.at("trainable").get<bool>();
        in.read(reinterpret_cast<char*>(params[i]->value.data()),
                static_cast<std::streamsize>(params[i]->value.size() * sizeof(S)));
        if (!in) throw IoError("adapters " + path + " are truncated");
    }
}

}  // namespace pvad
