#include "pvad/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace pvad {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
    if (!(subset_fraction > 0.0) || subset_fraction > 1.0)
        throw ConfigError("train: subset_fraction must lie in (0,1], got " +
                          std::to_string(subset_fraction));
}

std::vector<std::size_t> clip_starts(const Dataset& ds, std::size_t clip_len,
                                     double subset_fraction, std::uint64_t seed) {
    if (ds.train_frames() < clip_len)
        throw TrainError("train split of " + std::to_string(ds.train_frames()) +
                         " frames is shorter than a " + std::to_string(clip_len) +
                         "-frame clip");
    std::vector<std::size_t> starts(ds.train_frames() - clip_len + 1);
    for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = i;
    if (subset_fraction < 1.0) {
        StreamRng rng(seed, "fewshot");
        shuffle(starts, rng);
        const auto keep = static_cast<std::size_t>(
            std::ceil(subset_fraction * static_cast<double>(starts.size())));
        starts.resize(std::max<std::size_t>(1, keep));
    }
    return starts;
}

std::size_t clip_phase_label(const Dataset& ds, std::size_t start, std::size_t clip_len) {
    const std::size_t center = start + clip_len / 2;
    if (center >= ds.phase_labels.size())
        throw ConfigError("clip at " + std::to_string(start) + " has no phase annotation");
    return static_cast<std::size_t>(ds.phase_labels[center]);
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write training log " + path);
    out << "epoch,recon_term,period_term,total\n";
    char buf[128];
    for (const EpochStats& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g\n", e.epoch, e.recon, e.period,
                      e.total);
        out << buf;
    }
    if (!out) throw IoError("failed writing training log " + path);
}

}  // namespace pvad
