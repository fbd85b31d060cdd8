#include "pvad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

namespace pvad {

void EvalConfig::validate() const {
    if (!(lambda_fuse >= 0.0 && lambda_fuse <= 1.0))
        throw ConfigError("eval: lambda_fuse must lie in [0,1], got " +
                          std::to_string(lambda_fuse));
    if (window_size < 3 || window_size % 2 == 0)
        throw ConfigError("eval: window_size must be odd and >= 3, got " +
                          std::to_string(window_size));
}

std::vector<double> min_max_scale(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    std::vector<double> out(xs.size(), 0.0);
    if (span <= 0.0) return out;
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - lo) / span;
    return out;
}

std::vector<double> fuse_scores(const std::vector<double>& recon,
                                const std::vector<double>& period, double lambda_fuse) {
    if (recon.size() != period.size())
        throw ShapeError("fuse: series lengths " + std::to_string(recon.size()) + " and " +
                         std::to_string(period.size()) + " differ");
    const std::vector<double> r = min_max_scale(recon);
    const std::vector<double> p = min_max_scale(period);
    std::vector<double> out(recon.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - lambda_fuse) * r[i] + lambda_fuse * p[i];
    return out;
}

namespace {

void check_two_classes(const std::vector<double>& scores, const std::vector<int>& labels,
                       std::size_t& positives, std::size_t& negatives) {
    if (scores.size() != labels.size())
        throw ShapeError("auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    positives = negatives = 0;
    for (int l : labels) (l != 0 ? positives : negatives)++;
    if (positives == 0 || negatives == 0)
        throw EvalError("auc undefined: labels are single-class (" +
                        std::to_string(positives) + " positive, " +
                        std::to_string(negatives) + " negative)");
}

}  // namespace

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::size_t pos = 0, neg = 0;
    check_two_classes(scores, labels, pos, neg);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Walk tie groups, assigning each member the group's average 1-based rank.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

double auc_brute_force(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::size_t pos = 0, neg = 0;
    check_two_classes(scores, labels, pos, neg);
    double wins = 0.0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (labels[a] == 0) continue;
        for (std::size_t b = 0; b < scores.size(); ++b) {
            if (labels[b] != 0) continue;
            if (scores[a] > scores[b])
                wins += 1.0;
            else if (scores[a] == scores[b])
                wins += 0.5;
        }
    }
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace detail {

std::vector<int> frame_phases(const std::vector<int>& center_phases, std::size_t n_test,
                              std::size_t clip_len, int t_max, double phase_rate) {
    const std::size_t half = clip_len / 2;
    if (center_phases.size() != n_test - clip_len + 1)
        throw ShapeError("frame phases: " + std::to_string(center_phases.size()) +
                         " centers for " + std::to_string(n_test) + " frames");
    auto wrap = [t_max](double v) {
        long r = std::lround(v) % t_max;
        if (r < 0) r += t_max;
        return static_cast<int>(r);
    };
    std::vector<int> phases(n_test);
    for (std::size_t s = 0; s < center_phases.size(); ++s) phases[s + half] = center_phases[s];
    const std::size_t first = half, last = n_test - clip_len + half;
    for (std::size_t f = 0; f < first; ++f)
        phases[f] = wrap(phases[first] - static_cast<double>(first - f) * phase_rate);
    for (std::size_t f = last + 1; f < n_test; ++f)
        phases[f] = wrap(phases[last] + static_cast<double>(f - last) * phase_rate);
    return phases;
}

AnomalyReport assemble_report(const Dataset& ds, const std::vector<double>& recon,
                              const std::vector<int>& phases, double phase_rate,
                              const EvalConfig& cfg, const nlohmann::json& model_echo) {
    const std::size_t n_train = ds.train_frames(), n_test = recon.size();
    PhaseSeries series;
    series.phases = phases;
    series.t_max = static_cast<int>(ds.spec.t_max);
    series.window_size = cfg.window_size;
    const std::vector<double> period = period_error_series(series, phase_rate, cfg.circular);
    const std::vector<double> raw = fuse_scores(recon, period, cfg.lambda_fuse);
    const std::vector<double> norm = min_max_scale(raw);

    AnomalyReport report;
    report.frames.resize(n_test);
    std::vector<int> labels(n_test);
    for (std::size_t f = 0; f < n_test; ++f) {
        FrameScore& fs = report.frames[f];
        fs.frame_index = n_train + f;
        fs.recon_error = recon[f];
        fs.period_error = period[f];
        fs.raw_score = raw[f];
        fs.norm_score = norm[f];
        fs.label = ds.labels[n_train + f];
        labels[f] = fs.label;
    }
    report.auc = auc_score(norm, labels);

    std::set<AnomalyFamily> families;
    for (const AnomalySpec& a : ds.anomalies) families.insert(a.family);
    for (AnomalyFamily fam : families) {
        std::vector<double> sub_scores;
        std::vector<int> sub_labels;
        for (std::size_t f = 0; f < n_test; ++f) {
            const std::size_t abs = n_train + f;
            bool in_family = false;
            for (const AnomalySpec& a : ds.anomalies)
                if (a.family == fam && abs >= a.start_frame && abs < a.end_frame)
                    in_family = true;
            if (in_family) {
                sub_scores.push_back(norm[f]);
                sub_labels.push_back(1);
            } else if (labels[f] == 0) {
                sub_scores.push_back(norm[f]);
                sub_labels.push_back(0);
            }
        }
        report.family_auc[anomaly_family_name(fam)] = auc_score(sub_scores, sub_labels);
    }

    report.config_echo = {{"lambda_fuse", cfg.lambda_fuse},
                          {"window_size", cfg.window_size},
                          {"circular", cfg.circular},
                          {"phase_rate", phase_rate},
                          {"scenario_id", ds.scenario_id},
                          {"model", model_echo}};
    return report;
}

}  // namespace detail

void to_json(nlohmann::json& j, const FrameScore& f) {
    j = {{"frame_index", f.frame_index}, {"recon_error", f.recon_error},
         {"period_error", f.period_error}, {"raw_score", f.raw_score},
         {"norm_score", f.norm_score},    {"label", f.label}};
}

void from_json(const nlohmann::json& j, FrameScore& f) {
    j.at("frame_index").get_to(f.frame_index);
    j.at("recon_error").get_to(f.recon_error);
    j.at("period_error").get_to(f.period_error);
    j.at("raw_score").get_to(f.raw_score);
    j.at("norm_score").get_to(f.norm_score);
    j.at("label").get_to(f.label);
}

void to_json(nlohmann::json& j, const AnomalyReport& r) {
    j = {{"auc", r.auc},
         {"family_auc", r.family_auc},
         {"config", r.config_echo},
         {"frames", r.frames}};
}

void from_json(const nlohmann::json& j, AnomalyReport& r) {
    j.at("auc").get_to(r.auc);
    j.at("family_auc").get_to(r.family_auc);
    r.config_echo = j.at("config");
    j.at("frames").get_to(r.frames);
}

void write_scores_csv(const std::string& path, const AnomalyReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scores " + path);
    out << "frame_index,recon_error,period_error,raw_score,norm_score,label\n";
    char buf[192];
    for (const FrameScore& f : report.frames) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%d\n", f.frame_index,
                      f.recon_error, f.period_error, f.raw_score, f.norm_score, f.label);
        out << buf;
    }
    if (!out) throw IoError("failed writing scores " + path);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace " + path);
    out << "clip_start,predicted_phase,slot,boost_factor,top_row,top_weight\n";
    char buf[160];
    for (const TraceRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.10g,%zu,%.10g\n", r.clip_start, r.t_p,
                      r.t_slot, r.boost_factor, r.top_row, r.top_weight);
        out << buf;
    }
    if (!out) throw IoError("failed writing trace " + path);
}

void write_report_json(const std::string& path, const AnomalyReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path);
    out << nlohmann::json(report).dump(2) << "\n";
    if (!out) throw IoError("failed writing report " + path);
}

AnomalyReport read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report " + path);
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        return j.get<AnomalyReport>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed report " + path + ": " + e.what());
    }
}

}  // namespace pvad
