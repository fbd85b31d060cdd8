#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvad/common.hpp"

namespace pvad {

enum class DeviceKind { oscillator, conveyor, rotator, sorter };
enum class DomainStyle { synthetic, realish };
enum class AnomalyFamily { appearance, position, motion, logic };
enum class MotionVariant { speed, freeze };
enum class NuisanceKind { lighting_ramp, camera_jitter };

DeviceKind parse_device_kind(const std::string& s);
DomainStyle parse_domain_style(const std::string& s);
AnomalyFamily parse_anomaly_family(const std::string& s);
MotionVariant parse_motion_variant(const std::string& s);
NuisanceKind parse_nuisance_kind(const std::string& s);
const char* device_kind_name(DeviceKind k);
const char* domain_style_name(DomainStyle s);
const char* anomaly_family_name(AnomalyFamily f);
const char* motion_variant_name(MotionVariant v);
const char* nuisance_kind_name(NuisanceKind k);

struct ScenarioSpec {
    DeviceKind device_kind = DeviceKind::oscillator;
    std::size_t period_len = 20;
    std::size_t num_cycles_train = 4;
    std::size_t num_cycles_test = 2;
    std::size_t frame_size = 64;
    std::size_t t_max = 20;
    DomainStyle domain_style = DomainStyle::synthetic;
    std::uint64_t rng_seed = 0;

    void validate() const;
    std::size_t train_frames() const { return num_cycles_train * period_len; }
    std::size_t total_frames() const {
        return (num_cycles_train + num_cycles_test) * period_len;
    }
};

struct AnomalySpec {
    AnomalyFamily family = AnomalyFamily::appearance;
    std::size_t start_frame = 0;
    std::size_t end_frame = 0;
    double magnitude = 1.0;
    MotionVariant motion_variant = MotionVariant::speed;
};

struct NuisanceSpec {
    NuisanceKind kind = NuisanceKind::lighting_ramp;
    std::size_t start_frame = 0;
    std::size_t end_frame = 0;
    double magnitude = 1.0;
};

void to_json(nlohmann::json& j, const ScenarioSpec& s);
void from_json(const nlohmann::json& j, ScenarioSpec& s);
void to_json(nlohmann::json& j, const AnomalySpec& a);
void from_json(const nlohmann::json& j, AnomalySpec& a);
void to_json(nlohmann::json& j, const NuisanceSpec& n);
void from_json(const nlohmann::json& j, NuisanceSpec& n);

/// Square 8-bit grayscale frame.
struct Frame {
    std::size_t size = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * size + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * size + x]; }
};

/// Everything needed to redraw one frame from scratch; mutators edit these
/// states and re-render, so edits compose in any order.
struct RenderState {
    double render_phase = 0.0;       // position within the cycle, [0, period_len)
    double appearance_delta = 0.0;   // device intensity change, fraction of full scale
    int pos_dx = 0, pos_dy = 0;      // device offset inside its region
    double light_factor = 1.0;       // global multiplicative lighting
    int jit_dx = 0, jit_dy = 0;      // whole-frame translation
};

struct Dataset {
    std::string scenario_id;
    ScenarioSpec spec;
    std::vector<Frame> frames;
    std::vector<int> labels;                  // 0 normal, 1 abnormal; train split all 0
    std::vector<std::size_t> phase_labels;    // [0, t_max), follows the rendered phase
    std::vector<RenderState> states;          // empty after read_dataset
    std::vector<AnomalySpec> anomalies;
    std::vector<NuisanceSpec> nuisances;

    std::size_t frame_count() const { return frames.size(); }
    std::size_t train_frames() const { return spec.train_frames(); }
    bool is_test_frame(std::size_t f) const { return f >= spec.train_frames(); }
};

/// Renders one frame of the scenario from its state.
Frame render_frame(const ScenarioSpec& spec, const RenderState& state);

/// Builds the clean periodic sequence: render_phase = f mod period_len,
/// labels all 0, phase_labels from the phase formula.
Dataset generate_scenario(const ScenarioSpec& spec, const std::string& scenario_id);

/// Marks [start_frame, end_frame) abnormal and rewrites those frames.
/// Appearance and position edits stay inside the device region; motion and
/// logic reshape the rendered phase (and with it the phase labels).
void inject_anomaly(Dataset& ds, const AnomalySpec& a);

/// Applies lighting or jitter on [start_frame, end_frame); labels and phase
/// labels never change.
void apply_nuisance(Dataset& ds, const NuisanceSpec& n);

/// Writes frames/%06d.pgm plus manifest.json (schema, labels, checksums).
void write_dataset(const Dataset& ds, const std::string& dir);

/// Reads a dataset back, verifying frame checksums and manifest consistency.
Dataset read_dataset(const std::string& dir);

/// The phase category for a cycle position, floor((pos/period)*t_max).
std::size_t phase_of_position(double cycle_pos, std::size_t period_len, std::size_t t_max);

}  // namespace pvad
