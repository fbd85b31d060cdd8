#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pvad/model.hpp"
#include "pvad/optim.hpp"
#include "pvad/rng.hpp"
#include "pvad/synthgen.hpp"

namespace pvad {

/// Knobs for one optimization run over a dataset's train split.
struct TrainConfig {
    std::size_t batch_size = 8;
    double lr = 1e-4;
    std::size_t epochs = 50;
    /// Cap on clips drawn per epoch; 0 means every stride-1 clip.
    std::size_t max_clips_per_epoch = 0;
    /// Fraction of the clip pool kept for few-shot runs; selection is a
    /// seed-keyed shuffle taken once before the first epoch.
    double subset_fraction = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double recon = 0.0;
    double period = 0.0;
    double total = 0.0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    std::size_t steps = 0;
    double wall_clock_s = 0.0;
};

void write_train_log_csv(const std::string& path, const TrainLog& log);

/// Deterministic clip pool for one run: stride-1 starts over the train split,
/// optionally thinned to a seed-keyed few-shot subset.
std::vector<std::size_t> clip_starts(const Dataset& ds, std::size_t clip_len,
                                     double subset_fraction, std::uint64_t seed);

/// Pixels of frames [start, start+clip_len) scaled to [0,1], shape (T, H, W, 1).
template <typename S>
nn::Tensor<S> clip_tensor(const Dataset& ds, std::size_t start, std::size_t clip_len) {
    if (start + clip_len > ds.frame_count())
        throw ConfigError("clip at " + std::to_string(start) + " runs past frame " +
                          std::to_string(ds.frame_count()));
    const std::size_t hw = ds.spec.frame_size;
    nn::Tensor<S> clip({clip_len, hw, hw, 1});
    std::size_t i = 0;
    for (std::size_t t = 0; t < clip_len; ++t)
        for (std::uint8_t px : ds.frames[start + t].pixels)
            clip[i++] = static_cast<S>(px) / S(255);
    return clip;
}

/// The clip's phase target: the annotated phase of its center frame.
std::size_t clip_phase_label(const Dataset& ds, std::size_t start, std::size_t clip_len);

/// Runs the optimization loop: per-epoch shuffled stride-1 clips in batches,
/// averaged gradients, one adaptive-moment step per batch. Writes a rolling
/// checkpoint after every epoch when `checkpoint_path` is nonempty. Throws
/// TrainError if the loss leaves the finite range.
template <typename S>
TrainLog train_model(VadModel<S>& model, const Dataset& ds, const TrainConfig& cfg,
                     const std::string& checkpoint_path = "") {
    cfg.validate();
    const std::size_t t_len = model.config().clip_len;
    const std::vector<std::size_t> pool = clip_starts(ds, t_len, cfg.subset_fraction, cfg.seed);
    std::vector<nn::Parameter<S>*> params = model.parameters();
    nn::Adam<S> opt(params, cfg.lr);
    TrainLog log;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = pool;
        StreamRng srng(cfg.seed, "sampling", epoch);
        shuffle(order, srng);
        if (cfg.max_clips_per_epoch > 0 && order.size() > cfg.max_clips_per_epoch)
            order.resize(cfg.max_clips_per_epoch);
        EpochStats stats;
        stats.epoch = epoch;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - b);
            for (auto* p : params) p->zero_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t start = order[b + i];
                const nn::Tensor<S> clip = clip_tensor<S>(ds, start, t_len);
                const std::size_t label = clip_phase_label(ds, start, t_len);
                ClipResult<S> res = model.forward(clip);
                const LossBreakdown<S> lb = model.loss(res, clip, label);
                if (!std::isfinite(static_cast<double>(lb.total)))
                    throw TrainError("non-finite loss at epoch " + std::to_string(epoch) +
                                     ", clip start " + std::to_string(start));
                model.backward(res, clip, label);
                stats.recon += static_cast<double>(lb.recon);
                stats.period += static_cast<double>(lb.period);
                stats.total += static_cast<double>(lb.total);
            }
            const S inv = S(1) / static_cast<S>(n);
            for (auto* p : params)
                if (p->trainable)
                    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= inv;
            opt.step();
            ++log.steps;
        }
        const double m = static_cast<double>(order.size());
        stats.recon /= m;
        stats.period /= m;
        stats.total /= m;
        log.epochs.push_back(stats);
        if (!checkpoint_path.empty()) model.save_checkpoint(checkpoint_path);
    }
    log.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

}  // namespace pvad
