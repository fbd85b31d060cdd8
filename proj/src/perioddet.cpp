#include "pvad/perioddet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace pvad {

void PhaseSeries::validate() const {
    if (t_max <= 0) throw ConfigError("phase series: t_max must be positive");
    if (window_size < 3 || window_size % 2 == 0)
        throw ConfigError("phase series: window size must be odd and >= 3, got " +
                          std::to_string(window_size));
    if (static_cast<std::size_t>(window_size) > phases.size())
        throw ConfigError("phase series: window size " + std::to_string(window_size) +
                          " exceeds series length " + std::to_string(phases.size()));
    for (int p : phases)
        if (p < 0 || p >= t_max)
            throw ConfigError("phase series: phase " + std::to_string(p) + " out of range [0," +
                              std::to_string(t_max) + ")");
}

std::vector<int> phase_window(const std::vector<int>& series, std::size_t t, int n) {
    if (n < 3 || n % 2 == 0)
        throw ConfigError("phase window: size must be odd and >= 3, got " + std::to_string(n));
    if (static_cast<std::size_t>(n) > series.size())
        throw ConfigError("phase window: size " + std::to_string(n) +
                          " exceeds series length " + std::to_string(series.size()));
    if (t >= series.size())
        throw ConfigError("phase window: index " + std::to_string(t) + " out of range");
    const int half = (n - 1) / 2;
    std::vector<int> out(static_cast<std::size_t>(n));
    const long last = static_cast<long>(series.size()) - 1;
    for (int i = -half; i <= half; ++i) {
        long idx = static_cast<long>(t) + i;
        idx = std::clamp(idx, 0l, last);
        out[static_cast<std::size_t>(i + half)] = series[static_cast<std::size_t>(idx)];
    }
    return out;
}

std::vector<int> reference_sequence(int center_phase, int n, int t_max, double phase_rate) {
    if (n < 3 || n % 2 == 0)
        throw ConfigError("reference sequence: size must be odd and >= 3, got " +
                          std::to_string(n));
    if (t_max <= 0) throw ConfigError("reference sequence: t_max must be positive");
    if (!(phase_rate > 0.0))
        throw ConfigError("reference sequence: phase rate must be positive, got " +
                          std::to_string(phase_rate));
    const int half = (n - 1) / 2;
    std::vector<int> b(static_cast<std::size_t>(n));
    for (int i = -half; i <= half; ++i) {
        long v = std::lround(center_phase + i * phase_rate) % t_max;
        if (v < 0) v += t_max;
        b[static_cast<std::size_t>(i + half)] = static_cast<int>(v);
    }
    return b;
}

double circular_phase_distance(int a, int b, int t_max) {
    const int d = std::abs(a - b) % t_max;
    return static_cast<double>(std::min(d, t_max - d));
}

double period_error(const std::vector<int>& window, const std::vector<int>& reference,
                    int t_max, bool circular) {
    if (window.size() != reference.size())
        throw ShapeError("period error: window length " + std::to_string(window.size()) +
                         " does not match reference length " + std::to_string(reference.size()));
    if (window.empty()) throw ShapeError("period error: empty window");
    double sum = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i) {
        sum += circular ? circular_phase_distance(window[i], reference[i], t_max)
                        : static_cast<double>(std::abs(window[i] - reference[i]));
    }
    return sum / static_cast<double>(window.size());
}

std::vector<double> period_error_series(const PhaseSeries& series, double phase_rate,
                                        bool circular) {
    series.validate();
    std::vector<double> out(series.phases.size());
    for (std::size_t t = 0; t < series.phases.size(); ++t) {
        const std::vector<int> win = phase_window(series.phases, t, series.window_size);
        const std::vector<int> ref =
            reference_sequence(series.phases[t], series.window_size, series.t_max, phase_rate);
        out[t] = period_error(win, ref, series.t_max, circular);
    }
    return out;
}

}  // namespace pvad
