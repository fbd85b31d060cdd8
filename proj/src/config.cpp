#include "pvad/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pvad {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(trim(item));
    return parts;
}

AnomalySpec parse_anomaly_value(const std::string& key, const std::string& v) {
    const auto parts = split_commas(v);
    if (parts.size() < 4 || parts.size() > 5)
        throw ConfigError("config key '" + key +
                          "': expected family,start,end,magnitude[,variant], got '" + v + "'");
    AnomalySpec a;
    a.family = parse_anomaly_family(parts[0]);
    a.start_frame = parse_size(key, parts[1]);
    a.end_frame = parse_size(key, parts[2]);
    a.magnitude = parse_double(key, parts[3]);
    if (parts.size() == 5) {
        if (a.family != AnomalyFamily::motion)
            throw ConfigError("config key '" + key + "': only motion anomalies take a variant");
        a.motion_variant = parse_motion_variant(parts[4]);
    }
    return a;
}

NuisanceSpec parse_nuisance_value(const std::string& key, const std::string& v) {
    const auto parts = split_commas(v);
    if (parts.size() != 4)
        throw ConfigError("config key '" + key + "': expected kind,start,end,magnitude, got '" +
                          v + "'");
    NuisanceSpec n;
    n.kind = parse_nuisance_kind(parts[0]);
    n.start_frame = parse_size(key, parts[1]);
    n.end_frame = parse_size(key, parts[2]);
    n.magnitude = parse_double(key, parts[3]);
    return n;
}

/// Matches anomaly<N>/nuisance<N> keys; returns 0 when `key` is not indexed.
std::size_t indexed_key(const std::string& key, const std::string& stem) {
    if (key.size() <= stem.size() || key.rfind(stem, 0) != 0) return 0;
    std::size_t n = 0;
    for (std::size_t i = stem.size(); i < key.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(key[i]))) return 0;
        n = n * 10 + static_cast<std::size_t>(key[i] - '0');
    }
    return n;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string anomaly_value(const AnomalySpec& a) {
    std::string v = std::string(anomaly_family_name(a.family)) + "," +
                    std::to_string(a.start_frame) + "," + std::to_string(a.end_frame) + "," +
                    fmt(a.magnitude);
    if (a.family == AnomalyFamily::motion)
        v += std::string(",") + motion_variant_name(a.motion_variant);
    return v;
}

std::string nuisance_value(const NuisanceSpec& n) {
    return std::string(nuisance_kind_name(n.kind)) + "," + std::to_string(n.start_frame) + "," +
           std::to_string(n.end_frame) + "," + fmt(n.magnitude);
}

}  // namespace

void RunConfig::finalize() {
    scenario.rng_seed = seed;
    model.frame_size = scenario.frame_size;
    model.t_max = scenario.t_max;
    train.seed = seed;
    finetune_train.seed = seed;
    finetune_train.subset_fraction = few_shot_fraction;
    peft.seed = seed;
    scenario.validate();
    model.validate();
    train.validate();
    finetune_train.validate();
    eval.validate();
    peft.validate();
    if (model.clip_len > scenario.total_frames() - scenario.train_frames())
        throw ConfigError("config: clip_len " + std::to_string(model.clip_len) +
                          " exceeds the test split length");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<std::string> preset_names() {
    return {"custom", "oscillator-64", "sorter-64", "shift-pair"};
}

RunConfig preset_config(const std::string& name) {
    RunConfig rc;
    rc.preset = name;
    rc.scenario_id = name;
    if (name == "custom") {
        rc.scenario_id = "scenario";
        return rc;
    }
    if (name == "oscillator-64") {
        rc.scenario.device_kind = DeviceKind::oscillator;
        rc.scenario.period_len = 20;
        rc.scenario.t_max = 20;
        rc.scenario.num_cycles_train = 80;
        rc.scenario.num_cycles_test = 20;
        AnomalySpec motion;
        motion.family = AnomalyFamily::motion;
        motion.start_frame = 1680;
        motion.end_frame = 1720;
        motion.motion_variant = MotionVariant::speed;
        AnomalySpec logic;
        logic.family = AnomalyFamily::logic;
        logic.start_frame = 1840;
        logic.end_frame = 1900;
        rc.anomalies = {motion, logic};
        rc.train.lr = 2e-3;
        rc.train.epochs = 40;
        rc.train.max_clips_per_epoch = 96;
        rc.finetune_train.lr = 1e-3;
        rc.finetune_train.epochs = 10;
        rc.finetune_train.max_clips_per_epoch = 64;
        return rc;
    }
    if (name == "sorter-64") {
        // Slow cycle: 90 frames over 18 phase bins, so a 16-frame clip spans
        // about three phases.
        rc.scenario.device_kind = DeviceKind::sorter;
        rc.scenario.period_len = 90;
        rc.scenario.t_max = 18;
        rc.scenario.num_cycles_train = 16;
        rc.scenario.num_cycles_test = 5;
        AnomalySpec first;
        first.family = AnomalyFamily::logic;
        first.start_frame = 1500;
        first.end_frame = 1560;
        AnomalySpec second;
        second.family = AnomalyFamily::logic;
        second.start_frame = 1700;
        second.end_frame = 1760;
        rc.anomalies = {first, second};
        rc.train.lr = 2e-3;
        rc.train.epochs = 40;
        rc.train.max_clips_per_epoch = 96;
        rc.finetune_train.lr = 1e-3;
        rc.finetune_train.epochs = 10;
        rc.finetune_train.max_clips_per_epoch = 64;
        return rc;
    }
    if (name == "shift-pair") {
        rc.paired = true;
        rc.scenario.device_kind = DeviceKind::conveyor;
        rc.scenario.period_len = 20;
        rc.scenario.t_max = 20;
        rc.scenario.num_cycles_train = 40;
        rc.scenario.num_cycles_test = 10;
        AnomalySpec app;
        app.family = AnomalyFamily::appearance;
        app.start_frame = 840;
        app.end_frame = 880;
        app.magnitude = 0.8;
        AnomalySpec motion;
        motion.family = AnomalyFamily::motion;
        motion.start_frame = 920;
        motion.end_frame = 960;
        motion.motion_variant = MotionVariant::speed;
        rc.anomalies = {app, motion};
        rc.train.lr = 2e-3;
        rc.train.epochs = 30;
        rc.train.max_clips_per_epoch = 64;
        rc.finetune_train.lr = 1e-3;
        rc.finetune_train.epochs = 10;
        rc.finetune_train.max_clips_per_epoch = 40;
        // Textured frames keep reconstruction error near chance after a short
        // finetune, so the fused score leans on the phase channel here.
        rc.eval.lambda_fuse = 0.8;
        return rc;
    }
    throw ConfigError("unknown preset '" + name + "' (available: custom, oscillator-64, "
                      "sorter-64, shift-pair)");
}

void apply_overrides(RunConfig& rc, const std::map<std::string, std::string>& kv) {
    std::vector<std::pair<std::size_t, AnomalySpec>> anoms;
    std::vector<std::pair<std::size_t, NuisanceSpec>> nuis;
    for (const auto& [key, value] : kv) {
        if (const std::size_t n = indexed_key(key, "anomaly"); n > 0) {
            anoms.emplace_back(n, parse_anomaly_value(key, value));
            continue;
        }
        if (const std::size_t n = indexed_key(key, "nuisance"); n > 0) {
            nuis.emplace_back(n, parse_nuisance_value(key, value));
            continue;
        }
        if (key == "preset") rc.preset = value;
        else if (key == "scenario_id") rc.scenario_id = value;
        else if (key == "seed") rc.seed = parse_u64(key, value);
        else if (key == "paired") rc.paired = parse_bool(key, value);
        else if (key == "device_kind") rc.scenario.device_kind = parse_device_kind(value);
        else if (key == "period_len") rc.scenario.period_len = parse_size(key, value);
        else if (key == "cycles_train") rc.scenario.num_cycles_train = parse_size(key, value);
        else if (key == "cycles_test") rc.scenario.num_cycles_test = parse_size(key, value);
        else if (key == "frame_size") rc.scenario.frame_size = parse_size(key, value);
        else if (key == "t_max") rc.scenario.t_max = parse_size(key, value);
        else if (key == "domain_style") rc.scenario.domain_style = parse_domain_style(value);
        else if (key == "channels") rc.model.channels = parse_size(key, value);
        else if (key == "clip_len") rc.model.clip_len = parse_size(key, value);
        else if (key == "mem_slots") rc.model.mem_slots = parse_size(key, value);
        else if (key == "use_memory") rc.model.use_memory = parse_bool(key, value);
        else if (key == "normalize_mode") rc.model.normalize_mode = parse_normalize_mode(value);
        else if (key == "lambda_period") rc.model.lambda_period = parse_double(key, value);
        else if (key == "batch_size") rc.train.batch_size = parse_size(key, value);
        else if (key == "lr") rc.train.lr = parse_double(key, value);
        else if (key == "epochs") rc.train.epochs = parse_size(key, value);
        else if (key == "max_clips_per_epoch")
            rc.train.max_clips_per_epoch = parse_size(key, value);
        else if (key == "lambda_fuse") rc.eval.lambda_fuse = parse_double(key, value);
        else if (key == "window_size")
            rc.eval.window_size = static_cast<int>(parse_size(key, value));
        else if (key == "circular") rc.eval.circular = parse_bool(key, value);
        else if (key == "adapter_rank") rc.peft.rank = parse_size(key, value);
        else if (key == "adapter_alpha") rc.peft.alpha = parse_double(key, value);
        else if (key == "few_shot_fraction") rc.few_shot_fraction = parse_double(key, value);
        else if (key == "finetune_epochs") rc.finetune_train.epochs = parse_size(key, value);
        else if (key == "finetune_lr") rc.finetune_train.lr = parse_double(key, value);
        else if (key == "finetune_batch_size")
            rc.finetune_train.batch_size = parse_size(key, value);
        else if (key == "finetune_max_clips")
            rc.finetune_train.max_clips_per_epoch = parse_size(key, value);
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
    if (!anoms.empty()) {
        std::sort(anoms.begin(), anoms.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        rc.anomalies.clear();
        for (auto& [n, spec] : anoms) rc.anomalies.push_back(spec);
    }
    if (!nuis.empty()) {
        std::sort(nuis.begin(), nuis.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        rc.nuisances.clear();
        for (auto& [n, spec] : nuis) rc.nuisances.push_back(spec);
    }
}

std::string resolved_config_text(const RunConfig& rc) {
    std::ostringstream out;
    out << "# resolved configuration; rerunning with this file reproduces the run\n";
    out << "preset = " << rc.preset << "\n";
    out << "scenario_id = " << rc.scenario_id << "\n";
    out << "seed = " << rc.seed << "\n";
    out << "paired = " << (rc.paired ? "true" : "false") << "\n";
    out << "device_kind = " << device_kind_name(rc.scenario.device_kind) << "\n";
    out << "period_len = " << rc.scenario.period_len << "\n";
    out << "cycles_train = " << rc.scenario.num_cycles_train << "\n";
    out << "cycles_test = " << rc.scenario.num_cycles_test << "\n";
    out << "frame_size = " << rc.scenario.frame_size << "\n";
    out << "t_max = " << rc.scenario.t_max << "\n";
    out << "domain_style = " << domain_style_name(rc.scenario.domain_style) << "\n";
    for (std::size_t i = 0; i < rc.anomalies.size(); ++i)
        out << "anomaly" << (i + 1) << " = " << anomaly_value(rc.anomalies[i]) << "\n";
    for (std::size_t i = 0; i < rc.nuisances.size(); ++i)
        out << "nuisance" << (i + 1) << " = " << nuisance_value(rc.nuisances[i]) << "\n";
    out << "channels = " << rc.model.channels << "\n";
    out << "clip_len = " << rc.model.clip_len << "\n";
    out << "mem_slots = " << rc.model.mem_slots << "\n";
    out << "use_memory = " << (rc.model.use_memory ? "true" : "false") << "\n";
    out << "normalize_mode = " << normalize_mode_name(rc.model.normalize_mode) << "\n";
    out << "lambda_period = " << fmt(rc.model.lambda_period) << "\n";
    out << "batch_size = " << rc.train.batch_size << "\n";
    out << "lr = " << fmt(rc.train.lr) << "\n";
    out << "epochs = " << rc.train.epochs << "\n";
    out << "max_clips_per_epoch = " << rc.train.max_clips_per_epoch << "\n";
    out << "lambda_fuse = " << fmt(rc.eval.lambda_fuse) << "\n";
    out << "window_size = " << rc.eval.window_size << "\n";
    out << "circular = " << (rc.eval.circular ? "true" : "false") << "\n";
    out << "adapter_rank = " << rc.peft.rank << "\n";
    out << "adapter_alpha = " << fmt(rc.peft.alpha) << "\n";
    out << "few_shot_fraction = " << fmt(rc.few_shot_fraction) << "\n";
    out << "finetune_epochs = " << rc.finetune_train.epochs << "\n";
    out << "finetune_lr = " << fmt(rc.finetune_train.lr) << "\n";
    out << "finetune_batch_size = " << rc.finetune_train.batch_size << "\n";
    out << "finetune_max_clips = " << rc.finetune_train.max_clips_per_epoch << "\n";
    return out.str();
}

void write_resolved_config(const std::string& path, const RunConfig& rc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write resolved config " + path);
    out << resolved_config_text(rc);
    if (!out) throw IoError("failed writing resolved config " + path);
}

}  // namespace pvad
