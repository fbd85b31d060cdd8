#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pvad/cli.hpp"

using namespace pvad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Byte-compares two directory trees (same relative paths, same contents).
void check_trees_identical(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    std::sort(rel.begin(), rel.end());
    std::vector<fs::path> rel_b;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
    std::sort(rel_b.begin(), rel_b.end());
    REQUIRE(rel == rel_b);
    for (const auto& r : rel) {
        INFO("file ", r.string());
        CHECK(slurp(a / r) == slurp(b / r));
    }
}

/// 16x16 oscillator scenario small enough for end-to-end command tests.
RunConfig tiny_config() {
    RunConfig rc = preset_config("custom");
    rc.scenario_id = "tiny";
    rc.seed = 5;
    rc.scenario.device_kind = DeviceKind::oscillator;
    rc.scenario.period_len = 8;
    rc.scenario.t_max = 8;
    rc.scenario.frame_size = 16;
    rc.scenario.num_cycles_train = 6;
    rc.scenario.num_cycles_test = 2;
    AnomalySpec a;
    a.family = AnomalyFamily::appearance;
    a.start_frame = 52;
    a.end_frame = 56;
    rc.anomalies = {a};
    rc.model.clip_len = 4;
    rc.model.channels = 8;
    rc.model.mem_slots = 16;
    rc.train.batch_size = 4;
    rc.train.epochs = 2;
    rc.train.max_clips_per_epoch = 8;
    rc.finetune_train.batch_size = 4;
    rc.finetune_train.epochs = 2;
    rc.finetune_train.max_clips_per_epoch = 8;
    rc.finalize();
    return rc;
}

}  // namespace

TEST_CASE("config text parsing handles comments, blanks and bad lines") {
    const auto kv = parse_config_text(
        "# full-line comment\n"
        "\n"
        "seed = 7   # trailing comment\n"
        "  scenario_id =  run-a  \n"
        "paired=true\n");
    CHECK(kv.size() == 3);
    CHECK(kv.at("seed") == "7");
    CHECK(kv.at("scenario_id") == "run-a");
    CHECK(kv.at("paired") == "true");

    CHECK_THROWS_AS(parse_config_text("seed 7\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("= 7\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
    CHECK_THROWS_AS(read_config_file("/nonexistent/path.cfg"), IoError);
}

TEST_CASE("overrides reject unknown keys and malformed values") {
    RunConfig rc = preset_config("custom");
    CHECK_THROWS_AS(apply_overrides(rc, {{"sead", "7"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"seed", "seven"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"lr", "fast"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"paired", "yes"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"anomaly1", "appearance,10"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"anomaly1", "appearance,10,20,1,speed"}}),
                    ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"nuisance1", "fog,10,20,1"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(rc, {{"anomaly0", "appearance,10,20,1"}}), ConfigError);

    apply_overrides(rc, {{"seed", "9"}, {"lr", "0.005"}, {"use_memory", "false"}});
    CHECK(rc.seed == 9);
    CHECK(rc.train.lr == doctest::Approx(0.005));
    CHECK(rc.model.use_memory == false);
}

TEST_CASE("anomaly and nuisance overrides replace the inherited list") {
    RunConfig rc = preset_config("oscillator-64");
    REQUIRE(rc.anomalies.size() == 2);

    apply_overrides(rc, {{"anomaly1", "position,1700,1740,1.5"}});
    REQUIRE(rc.anomalies.size() == 1);
    CHECK(rc.anomalies[0].family == AnomalyFamily::position);
    CHECK(rc.anomalies[0].start_frame == 1700);
    CHECK(rc.anomalies[0].magnitude == doctest::Approx(1.5));

    apply_overrides(rc, {{"anomaly2", "motion,1600,1640,1,freeze"},
                         {"anomaly10", "logic,1800,1860,1"},
                         {"nuisance1", "camera_jitter,1900,1940,0.5"}});
    REQUIRE(rc.anomalies.size() == 2);
    CHECK(rc.anomalies[0].motion_variant == MotionVariant::freeze);
    CHECK(rc.anomalies[1].family == AnomalyFamily::logic);
    REQUIRE(rc.nuisances.size() == 1);
    CHECK(rc.nuisances[0].kind == NuisanceKind::camera_jitter);
}

TEST_CASE("presets exist, validate and carry their advertised shapes") {
    const auto names = preset_names();
    REQUIRE(names.size() == 4);
    for (const auto& name : names) {
        RunConfig rc = preset_config(name);
        rc.finalize();
        CHECK(rc.preset == name);
    }
    CHECK_THROWS_AS(preset_config("osclllator-64"), ConfigError);

    RunConfig osc = preset_config("oscillator-64");
    osc.finalize();
    CHECK(osc.scenario.train_frames() == 1600);
    CHECK(osc.scenario.total_frames() == 2000);
    CHECK(osc.model.frame_size == 64);
    CHECK(osc.model.t_max == 20);
    CHECK(osc.anomalies.size() == 2);

    RunConfig sorter = preset_config("sorter-64");
    sorter.finalize();
    CHECK(sorter.scenario.device_kind == DeviceKind::sorter);
    CHECK(sorter.anomalies.size() == 2);
    CHECK(sorter.anomalies[0].family == AnomalyFamily::logic);
    CHECK(sorter.anomalies[1].family == AnomalyFamily::logic);

    RunConfig pair = preset_config("shift-pair");
    pair.finalize();
    CHECK(pair.paired);
    CHECK(pair.few_shot_fraction == doctest::Approx(0.2));
}

TEST_CASE("seed fans out to every stage on finalize") {
    RunConfig rc = preset_config("oscillator-64");
    rc.seed = 42;
    rc.finalize();
    CHECK(rc.scenario.rng_seed == 42);
    CHECK(rc.train.seed == 42);
    CHECK(rc.finetune_train.seed == 42);
    CHECK(rc.peft.seed == 42);
    CHECK(rc.finetune_train.subset_fraction == doctest::Approx(rc.few_shot_fraction));
}

TEST_CASE("resolved config text round-trips exactly") {
    for (const std::string name : {"oscillator-64", "sorter-64", "shift-pair"}) {
        RunConfig rc = preset_config(name);
        rc.seed = 17;
        rc.finalize();
        const std::string text = resolved_config_text(rc);

        const auto kv = parse_config_text(text);
        RunConfig back = preset_config(kv.at("preset"));
        apply_overrides(back, kv);
        back.finalize();
        CHECK(resolved_config_text(back) == text);
    }

    RunConfig rc = preset_config("sorter-64");
    apply_overrides(rc, {{"lambda_fuse", "0.75"},
                         {"anomaly1", "motion,1500,1540,1,freeze"},
                         {"nuisance1", "lighting_ramp,1600,1660,0.5"},
                         {"finetune_lr", "0.0005"}});
    rc.finalize();
    const std::string text = resolved_config_text(rc);
    const auto kv = parse_config_text(text);
    RunConfig back = preset_config(kv.at("preset"));
    apply_overrides(back, kv);
    back.finalize();
    CHECK(resolved_config_text(back) == text);
}

TEST_CASE("gen writes identical trees for identical configs") {
    TempDir dir("pvad-cli-gen");
    const RunConfig rc = tiny_config();
    const auto dirs_a = cmd_gen(rc, dir.sub("a"));
    const auto dirs_b = cmd_gen(rc, dir.sub("b"));
    REQUIRE(dirs_a.size() == 1);
    REQUIRE(dirs_b.size() == 1);
    check_trees_identical(dir.path / "a", dir.path / "b");

    const Dataset ds = read_dataset(dirs_a[0]);
    CHECK(ds.frame_count() == 64);
    CHECK(ds.labels[53] == 1);
}

TEST_CASE("paired gen writes synthetic and realish twins") {
    TempDir dir("pvad-cli-pair");
    RunConfig rc = tiny_config();
    rc.paired = true;
    const auto dirs = cmd_gen(rc, dir.sub("out"));
    REQUIRE(dirs.size() == 2);
    const Dataset synth = read_dataset(dirs[0]);
    const Dataset real = read_dataset(dirs[1]);
    CHECK(synth.scenario_id == "tiny-synth");
    CHECK(real.scenario_id == "tiny-real");
    CHECK(synth.spec.domain_style == DomainStyle::synthetic);
    CHECK(real.spec.domain_style == DomainStyle::realish);
    CHECK(synth.labels == real.labels);
    CHECK(synth.phase_labels == real.phase_labels);
    CHECK(synth.frames[0].pixels != real.frames[0].pixels);
}

TEST_CASE("train and eval write reproducible artifacts") {
    TempDir dir("pvad-cli-run");
    const RunConfig rc = tiny_config();
    cmd_gen(rc, dir.sub("data"));

    const TrainLog log = cmd_train(rc, dir.sub("data"), dir.sub("m1"));
    CHECK(log.steps == 4);
    CHECK(fs::exists(dir.path / "m1" / "model.ckpt"));
    CHECK(fs::exists(dir.path / "m1" / "train_log.csv"));
    CHECK(fs::exists(dir.path / "m1" / "resolved.cfg"));

    const AnomalyReport report =
        cmd_eval(rc, dir.sub("data"), dir.sub("m1") + "/model.ckpt", dir.sub("e1"));
    CHECK(std::isfinite(report.auc));
    CHECK(report.frames.size() == 16);
    const AnomalyReport parsed = read_report_json(dir.sub("e1") + "/report.json");
    CHECK(parsed.auc == doctest::Approx(report.auc));

    cmd_train(rc, dir.sub("data"), dir.sub("m2"));
    cmd_eval(rc, dir.sub("data"), dir.sub("m2") + "/model.ckpt", dir.sub("e2"));
    CHECK(slurp(dir.path / "m1" / "model.ckpt") == slurp(dir.path / "m2" / "model.ckpt"));
    CHECK(slurp(dir.path / "m1" / "train_log.csv") ==
          slurp(dir.path / "m2" / "train_log.csv"));
    CHECK(slurp(dir.path / "e1" / "report.json") == slurp(dir.path / "e2" / "report.json"));
    CHECK(slurp(dir.path / "e1" / "scores.csv") == slurp(dir.path / "e2" / "scores.csv"));
}

TEST_CASE("eval dumps addressing traces only when asked") {
    TempDir dir("pvad-cli-trace");
    const RunConfig rc = tiny_config();
    cmd_gen(rc, dir.sub("data"));
    cmd_train(rc, dir.sub("data"), dir.sub("m"));

    cmd_eval(rc, dir.sub("data"), dir.sub("m") + "/model.ckpt", dir.sub("plain"));
    CHECK_FALSE(fs::exists(dir.path / "plain" / "trace.csv"));

    cmd_eval(rc, dir.sub("data"), dir.sub("m") + "/model.ckpt", dir.sub("traced"), true);
    const std::string text = slurp(dir.path / "traced" / "trace.csv");
    std::istringstream lines(text);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "clip_start,predicted_phase,slot,boost_factor,top_row,top_weight");
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        std::istringstream fields(line);
        std::string start, phase, slot, boost;
        std::getline(fields, start, ',');
        std::getline(fields, phase, ',');
        std::getline(fields, slot, ',');
        std::getline(fields, boost, ',');
        CHECK(std::stoul(start) >= rc.scenario.train_frames());
        CHECK(std::stoul(phase) < rc.model.t_max);
        CHECK(std::stoul(slot) < rc.model.mem_slots);
        CHECK(std::stod(boost) > 1.0);
        CHECK(std::stod(boost) < 2.0);
    }
    // 16 test frames, clip length 4: one row per stride-1 clip.
    CHECK(rows == 13);
}

TEST_CASE("eval takes the architecture from the checkpoint, not the eval config") {
    TempDir dir("pvad-cli-arch");
    const RunConfig rc = tiny_config();
    cmd_gen(rc, dir.sub("data"));
    cmd_train(rc, dir.sub("data"), dir.sub("m"));

    RunConfig other = tiny_config();
    other.model.channels = 12;
    other.model.mem_slots = 5;
    const AnomalyReport report =
        cmd_eval(other, dir.sub("data"), dir.sub("m") + "/model.ckpt", dir.sub("e"));
    CHECK(report.config_echo.at("model").at("channels").get<std::size_t>() == 8);

    CHECK_THROWS_AS(
        cmd_eval(rc, dir.sub("data"), dir.sub("m") + "/missing.ckpt", dir.sub("e2")),
        IoError);
}

TEST_CASE("finetune emits both modes plus the comparison table") {
    TempDir dir("pvad-cli-ft");
    const RunConfig rc = tiny_config();
    cmd_gen(rc, dir.sub("data"));
    cmd_train(rc, dir.sub("data"), dir.sub("pre"));

    const auto rows = cmd_finetune(rc, dir.sub("pre") + "/model.ckpt", dir.sub("data"),
                                   dir.sub("ft"), false);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mode == "full");
    CHECK(rows[1].mode == "peft");
    CHECK(rows[0].trainable_params == rows[0].total_params);
    CHECK(rows[1].trainable_params < rows[1].total_params);
    CHECK(rows[0].steps == rows[1].steps);
    CHECK(std::isfinite(rows[0].auc));
    CHECK(std::isfinite(rows[1].auc));
    CHECK(fs::exists(dir.path / "ft" / "full" / "model.ckpt"));
    CHECK(fs::exists(dir.path / "ft" / "peft" / "adapters.bin"));
    CHECK(fs::exists(dir.path / "ft" / "finetune_table.csv"));
    CHECK(!fs::exists(dir.path / "ft" / "peft" / "model.ckpt"));

    cmd_finetune(rc, dir.sub("pre") + "/model.ckpt", dir.sub("data"), dir.sub("ftm"), true);
    CHECK(fs::exists(dir.path / "ftm" / "peft" / "model.ckpt"));
    const ModelConfig merged_cfg = checkpoint_header(dir.sub("ftm") + "/peft/model.ckpt")
                                       .at("model")
                                       .get<ModelConfig>();
    VadModel<float> merged(merged_cfg);
    merged.load_checkpoint(dir.sub("ftm") + "/peft/model.ckpt");
}

TEST_CASE("ablate produces the four-cell table with finite scores") {
    TempDir dir("pvad-cli-abl");
    const RunConfig rc = tiny_config();
    cmd_gen(rc, dir.sub("data"));
    const auto rows = cmd_ablate(rc, dir.sub("data"), dir.sub("abl"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].memory);
    CHECK(rows[0].window);
    CHECK(!rows[3].memory);
    CHECK(!rows[3].window);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.auc));
        for (const auto& [family, auc] : r.family_auc) CHECK(std::isfinite(auc));
    }

    const std::string csv = slurp(dir.path / "abl" / "ablation.csv");
    CHECK(csv.rfind("memory,window,auc,auc_appearance", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(fs::exists(dir.path / "abl" / "mem_on_win_on" / "report.json"));
    CHECK(fs::exists(dir.path / "abl" / "mem_off_win_off" / "report.json"));
}

TEST_CASE("version string names both artifact format versions") {
    const std::string v = version_string();
    CHECK(v.find("dataset schema 1") != std::string::npos);
    CHECK(v.find("checkpoint format 1") != std::string::npos);
}
