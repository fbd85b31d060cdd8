#include "pvad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "pvad/rng.hpp"

namespace pvad {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

struct Box {
    long x0, y0, x1, y1;  // half-open
};

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::llround(v), 0ll, 255ll));
}

void fill_rect(Frame& img, const Box& clip, long x0, long y0, long x1, long y1,
               std::uint8_t v) {
    x0 = std::max(x0, clip.x0);
    y0 = std::max(y0, clip.y0);
    x1 = std::min(x1, clip.x1);
    y1 = std::min(y1, clip.y1);
    for (long y = y0; y < y1; ++y)
        for (long x = x0; x < x1; ++x)
            img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = v;
}

Box device_region(const ScenarioSpec& spec) {
    const long margin = static_cast<long>(spec.frame_size / 8);
    const long f = static_cast<long>(spec.frame_size);
    return {margin, margin, f - margin, f - margin};
}

void draw_device(Frame& img, const ScenarioSpec& spec, const RenderState& st) {
    const Box reg = device_region(spec);
    const long w = reg.x1 - reg.x0, h = reg.y1 - reg.y0;
    const double u = st.render_phase / static_cast<double>(spec.period_len);
    // 3r/P, not 3*(r/P): integer phases then hit sub-action boundaries
    // exactly instead of landing one ulp short.
    const double u3 = 3.0 * st.render_phase / static_cast<double>(spec.period_len);
    const auto seg = std::min<long>(2, static_cast<long>(u3));
    const double v = u3 - static_cast<double>(seg);
    const std::uint8_t ink = clamp_byte(170.0 - st.appearance_delta * 120.0);
    const long dx = st.pos_dx, dy = st.pos_dy;

    switch (spec.device_kind) {
        case DeviceKind::oscillator: {
            const long bar_w = w / 2, bar_h = std::max<long>(2, h / 12);
            const long travel = h - bar_h;
            long x = reg.x0 + (w - bar_w) / 2;
            long y = reg.y0;
            if (seg == 0) {
                y += std::llround(v * travel);
            } else if (seg == 1) {
                y += std::llround((1.0 - v) * travel);
            } else {
                const double t = v < 0.5 ? 2.0 * v : 2.0 - 2.0 * v;
                x += std::llround(t * (w - bar_w) / 2.0);
            }
            fill_rect(img, reg, x + dx, y + dy, x + dx + bar_w, y + dy + bar_h, ink);
            break;
        }
        case DeviceKind::conveyor: {
            const long b = std::max<long>(3, static_cast<long>(spec.frame_size) / 8);
            const long x = reg.x0 + std::llround(u * (w - b));
            const long y = reg.y0 + (h - b) / 2;
            fill_rect(img, reg, x + dx, y + dy, x + dx + b, y + dy + b, ink);
            break;
        }
        case DeviceKind::rotator: {
            const double cx = reg.x0 + w / 2.0 + dx, cy = reg.y0 + h / 2.0 + dy;
            const double len = 0.45 * w, ang = kTau * u;
            fill_rect(img, reg, std::llround(cx) - 1, std::llround(cy) - 1,
                      std::llround(cx) + 2, std::llround(cy) + 2, ink);
            for (double s = 0.0; s <= len; s += 0.5) {
                const long px = std::llround(cx + s * std::cos(ang));
                const long py = std::llround(cy - s * std::sin(ang));
                fill_rect(img, reg, px, py, px + 2, py + 2, ink);
            }
            break;
        }
        case DeviceKind::sorter: {
            const long item = std::max<long>(3, static_cast<long>(spec.frame_size) / 10);
            const long lx = reg.x0 +
                std::llround((static_cast<double>(seg) + 0.5) * w / 3.0 - item / 2.0);
            const long y = reg.y0 + std::llround(v * (h - item));
            // Lane rails so the empty lanes stay visible.
            for (long k = 0; k < 3; ++k) {
                const long rx = reg.x0 + std::llround((k + 0.5) * w / 3.0);
                fill_rect(img, reg, rx, reg.y0, rx + 1, reg.y1, clamp_byte(96));
            }
            fill_rect(img, reg, lx + dx, y + dy, lx + dx + item, y + dy + item, ink);
            break;
        }
    }
}

void paint_background(Frame& img, const ScenarioSpec& spec) {
    const std::size_t f = spec.frame_size;
    if (spec.domain_style == DomainStyle::synthetic) {
        for (std::size_t y = 0; y < f; ++y)
            for (std::size_t x = 0; x < f; ++x)
                img.at(y, x) = static_cast<std::uint8_t>(30 + (x * 7 + y * 13) % 7);
        return;
    }
    const std::uint64_t tex_key = StreamRng::mix(spec.rng_seed ^ fnv1a64("bg-texture"));
    const double c = (static_cast<double>(f) - 1.0) / 2.0;
    const double d2max = 2.0 * c * c;
    for (std::size_t y = 0; y < f; ++y)
        for (std::size_t x = 0; x < f; ++x) {
            const auto grain = StreamRng::mix(tex_key ^ (y * f + x)) & 31;
            const double d2 =
                (y - c) * (y - c) + (x - c) * (x - c);
            const double vignette = 1.0 - 0.25 * d2 / d2max;
            img.at(y, x) = clamp_byte((24.0 + static_cast<double>(grain)) * vignette);
        }
}

void add_phase_noise(Frame& img, const ScenarioSpec& spec, double render_phase) {
    if (spec.domain_style != DomainStyle::realish) return;
    // Keyed by the rendered phase so an unchanged phase reproduces the exact
    // same noise field and clean sequences stay strictly periodic.
    const auto key = static_cast<std::uint64_t>(std::llround(render_phase * 256.0));
    StreamRng rng(spec.rng_seed, "noise", key);
    for (auto& p : img.pixels)
        p = clamp_byte(static_cast<double>(p) + rng.next_normal() * 4.0);
}

void apply_light(Frame& img, double factor) {
    if (factor == 1.0) return;
    for (auto& p : img.pixels) p = clamp_byte(static_cast<double>(p) * factor);
}

void apply_shift(Frame& img, int dx, int dy) {
    if (dx == 0 && dy == 0) return;
    const auto f = static_cast<long>(img.size);
    Frame out = img;
    for (long y = 0; y < f; ++y)
        for (long x = 0; x < f; ++x) {
            const long sy = std::clamp(y - dy, 0l, f - 1);
            const long sx = std::clamp(x - dx, 0l, f - 1);
            out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                img.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
    img = std::move(out);
}

void check_interval(const Dataset& ds, std::size_t start, std::size_t end, const char* what) {
    if (start >= end)
        throw ConfigError(std::string(what) + ": empty interval [" + std::to_string(start) +
                          "," + std::to_string(end) + ")");
    if (end > ds.frame_count())
        throw ConfigError(std::string(what) + ": interval end " + std::to_string(end) +
                          " past the last frame " + std::to_string(ds.frame_count()));
}

void require_states(const Dataset& ds, const char* what) {
    if (ds.states.size() != ds.frame_count())
        throw ConfigError(std::string(what) +
                          ": dataset has no render states (datasets loaded from disk are "
                          "read-only; regenerate to edit)");
}

}  // namespace

std::size_t phase_of_position(double cycle_pos, std::size_t period_len, std::size_t t_max) {
    const double p = static_cast<double>(period_len);
    double r = std::fmod(cycle_pos, p);
    if (r < 0) r += p;
    const auto ph = static_cast<std::size_t>(r / p * static_cast<double>(t_max));
    return std::min(ph, t_max - 1);
}

void ScenarioSpec::validate() const {
    if (period_len < 4) throw ConfigError("scenario: period_len must be at least 4");
    if (frame_size < 16) throw ConfigError("scenario: frame_size must be at least 16");
    if (num_cycles_train < 1 || num_cycles_test < 1)
        throw ConfigError("scenario: cycle counts must be at least 1");
    if (t_max < 2) throw ConfigError("scenario: t_max must be at least 2");
}

Frame render_frame(const ScenarioSpec& spec, const RenderState& st) {
    Frame img;
    img.size = spec.frame_size;
    img.pixels.assign(spec.frame_size * spec.frame_size, 0);
    paint_background(img, spec);
    draw_device(img, spec, st);
    add_phase_noise(img, spec, st.render_phase);
    apply_light(img, st.light_factor);
    apply_shift(img, st.jit_dx, st.jit_dy);
    return img;
}

Dataset generate_scenario(const ScenarioSpec& spec, const std::string& scenario_id) {
    spec.validate();
    Dataset ds;
    ds.scenario_id = scenario_id;
    ds.spec = spec;
    const std::size_t n = spec.total_frames();
    ds.labels.assign(n, 0);
    ds.phase_labels.resize(n);
    ds.states.resize(n);
    ds.frames.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
        ds.states[f].render_phase = static_cast<double>(f % spec.period_len);
        ds.phase_labels[f] =
            phase_of_position(ds.states[f].render_phase, spec.period_len, spec.t_max);
        ds.frames[f] = render_frame(spec, ds.states[f]);
    }
    return ds;
}

void inject_anomaly(Dataset& ds, const AnomalySpec& a) {
    require_states(ds, "inject_anomaly");
    check_interval(ds, a.start_frame, a.end_frame, "inject_anomaly");
    if (a.start_frame < ds.train_frames())
        throw ConfigError("inject_anomaly: interval starts at frame " +
                          std::to_string(a.start_frame) + " inside the train split (first " +
                          std::to_string(ds.train_frames()) + " frames must stay normal)");
    if (a.magnitude <= 0.0 || a.magnitude > 1.0)
        throw ConfigError("inject_anomaly: magnitude must lie in (0, 1]");

    const auto period = static_cast<double>(ds.spec.period_len);
    const double origin = std::fmod(static_cast<double>(a.start_frame), period);
    static constexpr std::size_t kPermuted[3] = {0, 2, 1};
    for (std::size_t f = a.start_frame; f < a.end_frame; ++f) {
        RenderState& st = ds.states[f];
        switch (a.family) {
            case AnomalyFamily::appearance:
                st.appearance_delta = a.magnitude;
                break;
            case AnomalyFamily::position:
                st.pos_dx = static_cast<int>(std::llround(
                    a.magnitude * static_cast<double>(ds.spec.frame_size) / 8.0));
                st.pos_dy = static_cast<int>(std::llround(
                    a.magnitude * static_cast<double>(ds.spec.frame_size) / 12.0));
                break;
            case AnomalyFamily::motion:
                if (a.motion_variant == MotionVariant::freeze) {
                    st.render_phase = origin;
                } else {
                    st.render_phase = std::fmod(
                        origin + static_cast<double>(f - a.start_frame) * (1.0 + a.magnitude),
                        period);
                }
                break;
            case AnomalyFamily::logic: {
                // Integer arithmetic so sub-action boundaries stay exact:
                // r = (perm(seg)*P + (3c mod P)) / 3 with seg = (3c)/P.
                const std::size_t c = f % ds.spec.period_len;
                const std::size_t seg = 3 * c / ds.spec.period_len;
                const std::size_t rem = 3 * c - seg * ds.spec.period_len;
                st.render_phase = static_cast<double>(
                                      kPermuted[seg] * ds.spec.period_len + rem) /
                                  3.0;
                break;
            }
        }
        ds.labels[f] = 1;
        ds.phase_labels[f] =
            phase_of_position(st.render_phase, ds.spec.period_len, ds.spec.t_max);
        ds.frames[f] = render_frame(ds.spec, st);
    }
    ds.anomalies.push_back(a);
}

void apply_nuisance(Dataset& ds, const NuisanceSpec& n) {
    require_states(ds, "apply_nuisance");
    check_interval(ds, n.start_frame, n.end_frame, "apply_nuisance");
    if (n.magnitude < 0.0 || n.magnitude > 1.0)
        throw ConfigError("apply_nuisance: magnitude must lie in [0, 1]");

    const auto len = static_cast<double>(n.end_frame - n.start_frame);
    for (std::size_t f = n.start_frame; f < n.end_frame; ++f) {
        RenderState& st = ds.states[f];
        if (n.kind == NuisanceKind::lighting_ramp) {
            st.light_factor =
                1.0 + n.magnitude * static_cast<double>(f - n.start_frame + 1) / len;
        } else {
            const auto amp = static_cast<std::int64_t>(std::ceil(n.magnitude * 4.0));
            StreamRng rng(ds.spec.rng_seed, "jitter", f);
            st.jit_dx = static_cast<int>(rng.next_int(-amp, amp));
            st.jit_dy = static_cast<int>(rng.next_int(-amp, amp));
        }
        ds.frames[f] = render_frame(ds.spec, st);
    }
    ds.nuisances.push_back(n);
}

namespace {

std::string frame_rel_path(std::size_t f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frames/%06zu.pgm", f);
    return buf;
}

void write_pgm(const Frame& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write frame " + path);
    out << "P5\n" << img.size << " " << img.size << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("short write on frame " + path);
}

Frame read_pgm(const std::string& path, std::size_t expect_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open frame " + path);
    std::string magic;
    std::size_t w = 0, h = 0;
    int maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || magic != "P5" || maxval != 255)
        throw IoError("frame " + path + " is not an 8-bit binary PGM");
    if (w != expect_size || h != expect_size)
        throw IoError("frame " + path + " is " + std::to_string(w) + "x" + std::to_string(h) +
                      ", manifest says " + std::to_string(expect_size));
    in.get();  // single whitespace after maxval
    Frame img;
    img.size = w;
    img.pixels.resize(w * h);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError("frame " + path + " is truncated");
    return img;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "frames", ec);
    if (ec) throw IoError("cannot create dataset directory " + dir + ": " + ec.message());

    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["scenario_id"] = ds.scenario_id;
    manifest["spec"] = ds.spec;
    manifest["train_frame_count"] = ds.train_frames();
    manifest["anomalies"] = ds.anomalies;
    manifest["nuisances"] = ds.nuisances;
    auto& frames = manifest["frames"];
    frames = nlohmann::json::array();
    for (std::size_t f = 0; f < ds.frame_count(); ++f) {
        const std::string rel = frame_rel_path(f);
        write_pgm(ds.frames[f], (fs::path(dir) / rel).string());
        nlohmann::json entry{
            {"file", rel},
            {"phase_label", ds.phase_labels[f]},
            {"checksum",
             to_hex16(fnv1a64(ds.frames[f].pixels.data(), ds.frames[f].pixels.size()))}};
        if (ds.is_test_frame(f)) entry["label"] = ds.labels[f];
        frames.push_back(std::move(entry));
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("short write on manifest in " + dir);
}

Dataset read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(mpath);
    if (!in) throw IoError("cannot open manifest " + mpath);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + mpath + ": " + e.what());
    }

    Dataset ds;
    try {
        if (manifest.at("schema_version").get<int>() != 1)
            throw IoError("manifest " + mpath + " has an unsupported schema version");
        ds.scenario_id = manifest.at("scenario_id").get<std::string>();
        ds.spec = manifest.at("spec").get<ScenarioSpec>();
        ds.anomalies = manifest.value("anomalies", std::vector<AnomalySpec>{});
        ds.nuisances = manifest.value("nuisances", std::vector<NuisanceSpec>{});
        ds.spec.validate();
        const auto& frames = manifest.at("frames");
        if (frames.size() != ds.spec.total_frames())
            throw IoError("manifest " + mpath + " lists " + std::to_string(frames.size()) +
                          " frames, spec implies " + std::to_string(ds.spec.total_frames()));
        if (manifest.at("train_frame_count").get<std::size_t>() != ds.spec.train_frames())
            throw IoError("manifest " + mpath + " train_frame_count disagrees with the spec");
        ds.labels.assign(frames.size(), 0);
        ds.phase_labels.resize(frames.size());
        ds.frames.resize(frames.size());
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const auto& entry = frames[f];
            ds.phase_labels[f] = entry.at("phase_label").get<std::size_t>();
            if (ds.phase_labels[f] >= ds.spec.t_max)
                throw IoError("manifest " + mpath + " frame " + std::to_string(f) +
                              " has phase_label out of range");
            if (ds.is_test_frame(f)) {
                ds.labels[f] = entry.at("label").get<int>();
                if (ds.labels[f] != 0 && ds.labels[f] != 1)
                    throw IoError("manifest " + mpath + " frame " + std::to_string(f) +
                                  " has a label other than 0/1");
            } else if (entry.value("label", 0) != 0) {
                throw IoError("manifest " + mpath + " marks train frame " +
                              std::to_string(f) + " abnormal; the train split must be clean");
            }
            const std::string rel = entry.at("file").get<std::string>();
            ds.frames[f] = read_pgm((fs::path(dir) / rel).string(), ds.spec.frame_size);
            const std::string want = entry.at("checksum").get<std::string>();
            const std::string got =
                to_hex16(fnv1a64(ds.frames[f].pixels.data(), ds.frames[f].pixels.size()));
            if (want != got)
                throw IoError("frame " + rel + " in " + dir + " fails its checksum (" + got +
                              " != " + want + ")");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + mpath + ": " + e.what());
    }
    return ds;
}

#define PVAD_ENUM_IMPL(Enum, parse_fn, name_fn, ...)                                     \
    Enum parse_fn(const std::string& s) {                                                \
        for (const auto& [val, name] : std::initializer_list<std::pair<Enum, const char*>>{ \
                 __VA_ARGS__})                                                           \
            if (s == name) return val;                                                   \
        throw ConfigError("unknown " #Enum " '" + s + "'");                              \
    }                                                                                    \
    const char* name_fn(Enum v) {                                                        \
        for (const auto& [val, name] : std::initializer_list<std::pair<Enum, const char*>>{ \
                 __VA_ARGS__})                                                           \
            if (v == val) return name;                                                   \
        return "unknown";                                                                \
    }

PVAD_ENUM_IMPL(DeviceKind, parse_device_kind, device_kind_name,
               {DeviceKind::oscillator, "oscillator"}, {DeviceKind::conveyor, "conveyor"},
               {DeviceKind::rotator, "rotator"}, {DeviceKind::sorter, "sorter"})
PVAD_ENUM_IMPL(DomainStyle, parse_domain_style, domain_style_name,
               {DomainStyle::synthetic, "synthetic"}, {DomainStyle::realish, "realish"})
PVAD_ENUM_IMPL(AnomalyFamily, parse_anomaly_family, anomaly_family_name,
               {AnomalyFamily::appearance, "appearance"}, {AnomalyFamily::position, "position"},
               {AnomalyFamily::motion, "motion"}, {AnomalyFamily::logic, "logic"})
PVAD_ENUM_IMPL(MotionVariant, parse_motion_variant, motion_variant_name,
               {MotionVariant::speed, "speed"}, {MotionVariant::freeze, "freeze"})
PVAD_ENUM_IMPL(NuisanceKind, parse_nuisance_kind, nuisance_kind_name,
               {NuisanceKind::lighting_ramp, "lighting_ramp"},
               {NuisanceKind::camera_jitter, "camera_jitter"})

#undef PVAD_ENUM_IMPL

void to_json(nlohmann::json& j, const ScenarioSpec& s) {
    j = nlohmann::json{{"device_kind", device_kind_name(s.device_kind)},
                       {"period_len", s.period_len},
                       {"num_cycles_train", s.num_cycles_train},
                       {"num_cycles_test", s.num_cycles_test},
                       {"frame_size", s.frame_size},
                       {"t_max", s.t_max},
                       {"domain_style", domain_style_name(s.domain_style)},
                       {"rng_seed", s.rng_seed}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& s) {
    s.device_kind = parse_device_kind(j.at("device_kind").get<std::string>());
    j.at("period_len").get_to(s.period_len);
    j.at("num_cycles_train").get_to(s.num_cycles_train);
    j.at("num_cycles_test").get_to(s.num_cycles_test);
    j.at("frame_size").get_to(s.frame_size);
    j.at("t_max").get_to(s.t_max);
    s.domain_style = parse_domain_style(j.at("domain_style").get<std::string>());
    j.at("rng_seed").get_to(s.rng_seed);
}

void to_json(nlohmann::json& j, const AnomalySpec& a) {
    j = nlohmann::json{{"family", anomaly_family_name(a.family)},
                       {"start_frame", a.start_frame},
                       {"end_frame", a.end_frame},
                       {"magnitude", a.magnitude}};
    if (a.family == AnomalyFamily::motion)
        j["motion_variant"] = motion_variant_name(a.motion_variant);
}

void from_json(const nlohmann::json& j, AnomalySpec& a) {
    a.family = parse_anomaly_family(j.at("family").get<std::string>());
    j.at("start_frame").get_to(a.start_frame);
    j.at("end_frame").get_to(a.end_frame);
    j.at("magnitude").get_to(a.magnitude);
    if (j.contains("motion_variant"))
        a.motion_variant = parse_motion_variant(j.at("motion_variant").get<std::string>());
}

void to_json(nlohmann::json& j, const NuisanceSpec& n) {
    j = nlohmann::json{{"kind", nuisance_kind_name(n.kind)},
                       {"start_frame", n.start_frame},
                       {"end_frame", n.end_frame},
                       {"magnitude", n.magnitude}};
}

void from_json(const nlohmann::json& j, NuisanceSpec& n) {
    n.kind = parse_nuisance_kind(j.at("kind").get<std::string>());
    j.at("start_frame").get_to(n.start_frame);
    j.at("end_frame").get_to(n.end_frame);
    j.at("magnitude").get_to(n.magnitude);
}

}  // namespace pvad
