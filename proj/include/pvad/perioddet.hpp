#pragma once

#include <cstddef>
#include <vector>

#include "pvad/common.hpp"

namespace pvad {

/// A per-frame series of predicted phases, each an integer in [0, t_max),
/// inspected with an odd-sized sliding window.
struct PhaseSeries {
    std::vector<int> phases;
    int t_max = 20;
    int window_size = 5;

    void validate() const;
};

/// Length-n slice of `series` centered at `t`; out-of-range indices clamp to
/// the series bounds so edge frames still produce a full window.
std::vector<int> phase_window(const std::vector<int>& series, std::size_t t, int n);

/// Ideal phase ramp anchored at the window center: b_i = round(center + i*rate)
/// wrapped into [0, t_max), for i in [-(n-1)/2, (n-1)/2].
std::vector<int> reference_sequence(int center_phase, int n, int t_max, double phase_rate);

/// Distance between two phases on the cycle: min(|a-b|, t_max - |a-b|).
double circular_phase_distance(int a, int b, int t_max);

/// Mean phase deviation of a window from its reference ramp. `circular`
/// selects wraparound-aware distance; plain |a-b| otherwise.
double period_error(const std::vector<int>& window, const std::vector<int>& reference,
                    int t_max, bool circular = true);

/// Per-frame period error over a whole series: window at every index, a
/// reference ramp anchored at each window's center phase, mean deviation.
std::vector<double> period_error_series(const PhaseSeries& series, double phase_rate,
                                        bool circular = true);

}  // namespace pvad
