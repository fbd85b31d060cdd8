#pragma once

#include <map>
#include <string>
#include <vector>

#include "pvad/lora.hpp"
#include "pvad/model.hpp"
#include "pvad/scoring.hpp"
#include "pvad/synthgen.hpp"
#include "pvad/train.hpp"

namespace pvad {

/// One run's complete knob set: scenario generation, model architecture,
/// training, evaluation and finetuning, merged from preset, config file and
/// command-line overrides. The seed fans out to every stochastic stage.
struct RunConfig {
    std::string preset = "custom";
    std::string scenario_id = "scenario";
    std::uint64_t seed = 1;
    /// shift-style presets generate a synthetic twin plus a realish twin.
    bool paired = false;

    ScenarioSpec scenario;
    std::vector<AnomalySpec> anomalies;
    std::vector<NuisanceSpec> nuisances;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    PeftConfig peft;
    double few_shot_fraction = 0.2;
    TrainConfig finetune_train;

    /// Propagates the shared fields (seed, frame size, t_max) and validates
    /// every sub-config.
    void finalize();
};

/// Parses flat `key = value` text; `#` starts a comment, blank lines skipped.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::string& path);

/// The built-in starting points: `oscillator-64`, `sorter-64`, `shift-pair`,
/// or `custom` for bare defaults.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Applies key=value pairs onto a config; unknown keys and malformed values
/// are rejected by name.
void apply_overrides(RunConfig& rc, const std::map<std::string, std::string>& kv);

/// Every key in a re-parseable listing; applying it onto the same preset
/// reproduces the config exactly.
std::string resolved_config_text(const RunConfig& rc);
void write_resolved_config(const std::string& path, const RunConfig& rc);

}  // namespace pvad
