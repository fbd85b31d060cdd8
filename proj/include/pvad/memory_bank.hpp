#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "pvad/layers.hpp"
#include "pvad/tensor.hpp"

namespace pvad {

/// How addressing weights are normalized: `column` turns each memory slot's
/// scores across time into a distribution; `row` normalizes each time step
/// across slots instead (the classic content-only addressing).
enum class NormalizeMode { column, row };

NormalizeMode parse_normalize_mode(const std::string& s);
const char* normalize_mode_name(NormalizeMode m);

/// Raw addressing scores: w = F * bank^T, shapes (T, C) x (M, C) -> (T, M).
template <typename S>
nn::Tensor<S> address(const nn::Tensor<S>& f, const nn::Tensor<S>& bank) {
    nn::check_2d(f, "address features");
    nn::check_2d(bank, "address bank");
    if (f.dim(1) != bank.dim(1))
        throw ShapeError("address: feature dim " + nn::shape_str(f.shape()) +
                         " does not match bank " + nn::shape_str(bank.shape()));
    return nn::matmul_nt(f, bank);
}

/// Maps a phase in [0, t_max) onto a bank column in [0, m_slots).
inline std::size_t map_phase(std::size_t t_p, std::size_t m_slots, std::size_t t_max) {
    if (t_max == 0) throw ConfigError("map_phase: t_max must be positive");
    if (t_p >= t_max)
        throw ConfigError("map_phase: phase " + std::to_string(t_p) + " out of range [0," +
                          std::to_string(t_max) + ")");
    return (t_p * m_slots) / t_max;
}

/// Index of the largest probability; ties resolve to the lowest index.
template <typename S>
std::size_t argmax_phase(const nn::Tensor<S>& probs) {
    if (probs.size() == 0) throw ShapeError("argmax_phase: empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return best;
}

/// Scales one column of the score matrix by the confidence boost.
template <typename S>
nn::Tensor<S> boost_column(const nn::Tensor<S>& w, std::size_t slot, S factor) {
    nn::check_2d(w, "boost_column");
    if (slot >= w.dim(1))
        throw ShapeError("boost_column: slot " + std::to_string(slot) + " out of range for " +
                         nn::shape_str(w.shape()));
    nn::Tensor<S> out = w;
    for (std::size_t t = 0; t < out.dim(0); ++t) out.at(t, slot) *= factor;
    return out;
}

/// Softmax over the chosen axis with max subtraction.
template <typename S>
nn::Tensor<S> normalize_addressing(const nn::Tensor<S>& w, NormalizeMode mode) {
    nn::check_2d(w, "normalize_addressing");
    nn::Tensor<S> out = w;
    if (mode == NormalizeMode::row) {
        nn::softmax_rows_inplace(out);
        return out;
    }
    const std::size_t t_len = w.dim(0), m = w.dim(1);
    for (std::size_t j = 0; j < m; ++j) {
        S mx = out.at(0, j);
        for (std::size_t i = 1; i < t_len; ++i) mx = std::max(mx, out.at(i, j));
        S sum = S(0);
        for (std::size_t i = 0; i < t_len; ++i) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (std::size_t i = 0; i < t_len; ++i) out.at(i, j) /= sum;
    }
    return out;
}

/// Reads the bank back out: F_out = w_norm * bank, (T, M) x (M, C) -> (T, C).
template <typename S>
nn::Tensor<S> retrieve(const nn::Tensor<S>& w_norm, const nn::Tensor<S>& bank) {
    return nn::matmul(w_norm, bank);
}

/// Everything the backward pass needs from one addressing round. The phase
/// decision and boost factor are treated as constants by backward.
template <typename S>
struct AddressingTrace {
    nn::Tensor<S> w;
    nn::Tensor<S> w_boosted;
    nn::Tensor<S> w_norm;
    std::size_t t_p = 0;
    std::size_t t_slot = 0;
    S boost_factor = S(1);
};

/// Phase-conditioned memory read. Scores each time step against every slot,
/// sharpens the column picked by the phase distribution, normalizes, and
/// retrieves the blended prototype features.
template <typename S>
class MemoryBank {
public:
    MemoryBank() = default;
    MemoryBank(std::size_t m_slots, std::size_t dim, std::size_t t_max,
               NormalizeMode mode = NormalizeMode::column)
        : t_max_(t_max), mode_(mode), bank_("memory.bank", {m_slots, dim}) {}

    std::size_t slots() const { return bank_.value.dim(0); }
    std::size_t dim() const { return bank_.value.dim(1); }
    std::size_t t_max() const { return t_max_; }
    NormalizeMode mode() const { return mode_; }
    void set_mode(NormalizeMode m) { mode_ = m; }

    nn::Tensor<S> forward(const nn::Tensor<S>& f, const nn::Tensor<S>& phase_probs) {
        if (phase_probs.size() != t_max_)
            throw ShapeError("memory: phase distribution " + nn::shape_str(phase_probs.shape()) +
                             " does not match t_max " + std::to_string(t_max_));
        f_ = f;
        trace_.w = address(f, bank_.value);
        trace_.t_p = argmax_phase(phase_probs);
        trace_.t_slot = map_phase(trace_.t_p, slots(), t_max_);
        trace_.boost_factor = S(1) + phase_probs[trace_.t_p];
        trace_.w_boosted = boost_column(trace_.w, trace_.t_slot, trace_.boost_factor);
        trace_.w_norm = normalize_addressing(trace_.w_boosted, mode_);
        return retrieve(trace_.w_norm, bank_.value);
    }

    nn::Tensor<S> backward(const nn::Tensor<S>& dy) {
        const std::size_t t_len = trace_.w_norm.dim(0), m = trace_.w_norm.dim(1);
        if (dy.rank() != 2 || dy.dim(0) != t_len || dy.dim(1) != dim())
            throw ShapeError("memory: upstream grad " + nn::shape_str(dy.shape()) +
                             " does not match retrieved features");
        const bool accum = bank_.trainable || !skip_frozen_;
        // retrieve: F_out = w_norm * bank
        nn::Tensor<S> dw_norm = nn::matmul_nt(dy, bank_.value);
        if (accum) {
            nn::Tensor<S> db = nn::matmul_tn(trace_.w_norm, dy);
            for (std::size_t i = 0; i < db.size(); ++i) bank_.grad[i] += db[i];
        }
        // softmax over the chosen axis
        nn::Tensor<S> dw_boosted({t_len, m});
        if (mode_ == NormalizeMode::column) {
            for (std::size_t j = 0; j < m; ++j) {
                S dot = S(0);
                for (std::size_t i = 0; i < t_len; ++i)
                    dot += dw_norm.at(i, j) * trace_.w_norm.at(i, j);
                for (std::size_t i = 0; i < t_len; ++i)
                    dw_boosted.at(i, j) = trace_.w_norm.at(i, j) * (dw_norm.at(i, j) - dot);
            }
        } else {
            for (std::size_t i = 0; i < t_len; ++i) {
                S dot = S(0);
                for (std::size_t j = 0; j < m; ++j)
                    dot += dw_norm.at(i, j) * trace_.w_norm.at(i, j);
                for (std::size_t j = 0; j < m; ++j)
                    dw_boosted.at(i, j) = trace_.w_norm.at(i, j) * (dw_norm.at(i, j) - dot);
            }
        }
        // column boost, factor held constant
        nn::Tensor<S> dw = dw_boosted;
        for (std::size_t i = 0; i < t_len; ++i) dw.at(i, trace_.t_slot) *= trace_.boost_factor;
        // address: w = F * bank^T
        nn::Tensor<S> df = nn::matmul(dw, bank_.value);
        if (accum) {
            nn::Tensor<S> db = nn::matmul_tn(dw, f_);
            for (std::size_t i = 0; i < db.size(); ++i) bank_.grad[i] += db[i];
        }
        return df;
    }

    const AddressingTrace<S>& trace() const { return trace_; }
    std::vector<nn::Parameter<S>*> params() { return {&bank_}; }
    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }
    nn::Parameter<S>& bank() { return bank_; }

private:
    std::size_t t_max_ = 0;
    NormalizeMode mode_ = NormalizeMode::column;
    bool skip_frozen_ = false;
    nn::Parameter<S> bank_;
    nn::Tensor<S> f_;
    AddressingTrace<S> trace_;
};

}  // namespace pvad
