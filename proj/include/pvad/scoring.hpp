#pragma once

#include <map>
#include <string>
#include <vector>

#include "pvad/model.hpp"
#include "pvad/perioddet.hpp"
#include "pvad/synthgen.hpp"
#include "pvad/train.hpp"

namespace pvad {

/// Knobs for turning one trained model plus one labeled test split into
/// frame-level anomaly scores.
struct EvalConfig {
    /// Weight of the period-deviation term in the fused score; 0 scores by
    /// reconstruction alone, 1 by phase consistency alone.
    double lambda_fuse = 0.5;
    int window_size = 5;
    bool circular = true;
    /// When set, one addressing row per scored clip lands here as CSV.
    std::string trace_csv;

    void validate() const;
};

/// Addressing internals of one memory read, kept for debugging dumps.
struct TraceRow {
    std::size_t clip_start = 0;  // absolute index of the clip's first frame
    std::size_t t_p = 0;
    std::size_t t_slot = 0;
    double boost_factor = 1.0;
    std::size_t top_row = 0;     // time row holding the boosted column's max
    double top_weight = 0.0;
};

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

/// Min-max scales a series into [0,1]; a constant series maps to all zeros.
std::vector<double> min_max_scale(const std::vector<double>& xs);

/// Scales both component series, then blends them:
/// (1-lambda)*recon + lambda*period.
std::vector<double> fuse_scores(const std::vector<double>& recon,
                                const std::vector<double>& period, double lambda_fuse);

/// ROC AUC via the rank-sum statistic in O(N log N); tied scores count half.
/// Throws EvalError when labels are single-class.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

/// Quadratic pairwise reference for the same statistic.
double auc_brute_force(const std::vector<double>& scores, const std::vector<int>& labels);

struct FrameScore {
    std::size_t frame_index = 0;  // absolute index within the scenario
    double recon_error = 0.0;
    double period_error = 0.0;
    double raw_score = 0.0;
    double norm_score = 0.0;
    int label = 0;
};

struct AnomalyReport {
    std::vector<FrameScore> frames;
    double auc = 0.0;
    std::map<std::string, double> family_auc;
    nlohmann::json config_echo;
};

void to_json(nlohmann::json& j, const FrameScore& f);
void from_json(const nlohmann::json& j, FrameScore& f);
void to_json(nlohmann::json& j, const AnomalyReport& r);
void from_json(const nlohmann::json& j, AnomalyReport& r);

void write_scores_csv(const std::string& path, const AnomalyReport& report);
void write_report_json(const std::string& path, const AnomalyReport& report);
AnomalyReport read_report_json(const std::string& path);

namespace detail {

/// Fills the per-frame phase series for a test split of `n_test` frames from
/// clip-center predictions; head and tail frames extrapolate along the
/// expected ramp from the nearest covered center.
std::vector<int> frame_phases(const std::vector<int>& center_phases, std::size_t n_test,
                              std::size_t clip_len, int t_max, double phase_rate);

/// Assembles the report once the per-frame series exist.
AnomalyReport assemble_report(const Dataset& ds, const std::vector<double>& recon,
                              const std::vector<int>& phases, double phase_rate,
                              const EvalConfig& cfg, const nlohmann::json& model_echo);

}  // namespace detail

/// Scores every test frame of `ds`: overlap-averaged reconstruction error and
/// sliding-window period deviation, fused and normalized over the whole split.
template <typename S>
AnomalyReport evaluate_dataset(VadModel<S>& model, const Dataset& ds, const EvalConfig& cfg) {
    cfg.validate();
    const std::size_t t_len = model.config().clip_len;
    const std::size_t n_total = ds.frame_count(), n_train = ds.train_frames();
    if (n_total - n_train < t_len)
        throw EvalError("test split of " + std::to_string(n_total - n_train) +
                        " frames is shorter than a " + std::to_string(t_len) + "-frame clip");
    const std::size_t n_test = n_total - n_train;
    const std::size_t pixels = ds.spec.frame_size * ds.spec.frame_size;
    std::vector<double> recon_sum(n_test, 0.0);
    std::vector<std::size_t> recon_cnt(n_test, 0);
    std::vector<int> centers;
    centers.reserve(n_test - t_len + 1);
    const bool tracing = !cfg.trace_csv.empty() && model.config().use_memory;
    std::vector<TraceRow> trace_rows;
    for (std::size_t s = 0; s + t_len <= n_test; ++s) {
        const nn::Tensor<S> clip = clip_tensor<S>(ds, n_train + s, t_len);
        const ClipResult<S> res = model.forward(clip);
        if (tracing) {
            const AddressingTrace<S>& tr = model.memory().trace();
            TraceRow row;
            row.clip_start = n_train + s;
            row.t_p = tr.t_p;
            row.t_slot = tr.t_slot;
            row.boost_factor = static_cast<double>(tr.boost_factor);
            for (std::size_t t = 0; t < tr.w_norm.dim(0); ++t)
                if (tr.w_norm.at(t, tr.t_slot) > tr.w_norm.at(row.top_row, tr.t_slot))
                    row.top_row = t;
            row.top_weight = static_cast<double>(tr.w_norm.at(row.top_row, tr.t_slot));
            trace_rows.push_back(row);
        }
        for (std::size_t t = 0; t < t_len; ++t) {
            double mse = 0.0;
            const std::size_t off = t * pixels;
            for (std::size_t i = 0; i < pixels; ++i) {
                const double d = static_cast<double>(res.recon[off + i] - clip[off + i]);
                mse += d * d;
            }
            recon_sum[s + t] += mse / static_cast<double>(pixels);
            ++recon_cnt[s + t];
        }
        centers.push_back(static_cast<int>(res.predicted_phase));
    }
    if (tracing) write_trace_csv(cfg.trace_csv, trace_rows);
    std::vector<double> recon(n_test);
    for (std::size_t f = 0; f < n_test; ++f)
        recon[f] = recon_sum[f] / static_cast<double>(recon_cnt[f]);
    const double rate = static_cast<double>(ds.spec.t_max) /
                        static_cast<double>(ds.spec.period_len);
    const std::vector<int> phases = detail::frame_phases(
        centers, n_test, t_len, static_cast<int>(ds.spec.t_max), rate);
    nlohmann::json model_echo = model.config();
    return detail::assemble_report(ds, recon, phases, rate, cfg, model_echo);
}

}  // namespace pvad
