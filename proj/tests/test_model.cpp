#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pvad/gradcheck.hpp"
#include "pvad/model.hpp"
#include "pvad/rng.hpp"
#include "pvad/train.hpp"

using namespace pvad;
using nn::Tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.frame_size = 16;
    cfg.clip_len = 4;
    cfg.channels = 8;
    cfg.t_max = 8;
    cfg.mem_slots = 16;
    return cfg;
}

ModelConfig desk_config() {
    ModelConfig cfg;
    cfg.frame_size = 64;
    cfg.clip_len = 16;
    cfg.channels = 64;
    cfg.t_max = 20;
    cfg.mem_slots = 200;
    return cfg;
}

template <typename S>
Tensor<S> random_clip(const ModelConfig& cfg, std::uint64_t seed) {
    Tensor<S> clip({cfg.clip_len, cfg.frame_size, cfg.frame_size, 1});
    StreamRng rng(seed, "data");
    clip.fill_uniform(rng, 0.0, 1.0);
    return clip;
}

}  // namespace

TEST_CASE("parameter count matches the desk architecture") {
    VadModel<float> model(desk_config());
    CHECK(model.param_count() == 78021);
    ModelConfig no_mem = desk_config();
    no_mem.use_memory = false;
    VadModel<float> lean(no_mem);
    CHECK(lean.param_count() == 78021 - 200 * 64);
}

TEST_CASE("forward produces a reconstruction and a phase distribution") {
    VadModel<float> model(tiny_config());
    model.init_params(3);
    Tensor<float> clip = random_clip<float>(tiny_config(), 30);
    auto res = model.forward(clip);
    CHECK(res.recon.shape() == clip.shape());
    CHECK(res.features.shape() == std::vector<std::size_t>{2, 8});
    float sum = 0.f;
    for (std::size_t i = 0; i < res.phase_probs.size(); ++i) sum += res.phase_probs[i];
    CHECK(sum == doctest::Approx(1.f).epsilon(1e-5));
    CHECK(res.predicted_phase == argmax_phase(res.phase_probs));
    CHECK(res.recon.all_finite());

    Tensor<float> bad({4, 16, 16, 2});
    CHECK_THROWS_AS(model.forward(bad), ShapeError);
    CHECK_THROWS_AS(model.loss(res, clip, 8), ConfigError);
}

TEST_CASE("whole-model gradients agree with central differences") {
    VadModel<double> model(tiny_config());
    model.init_params(17);
    Tensor<double> clip = random_clip<double>(tiny_config(), 31);
    const std::size_t label = 3;

    for (auto* p : model.parameters()) p->zero_grad();
    auto res = model.forward(clip);
    model.backward(res, clip, label);

    // The memory conditioning (phase pick and boost) is a constant to the
    // backward pass, so the finite-difference probe holds it at its base
    // value too.
    nn::Tensor<double> base_probs({tiny_config().t_max});
    for (std::size_t i = 0; i < base_probs.size(); ++i) base_probs[i] = res.phase_probs[i];
    model.pin_memory_conditioning(base_probs);

    nn::GradChecker chk;
    for (auto* p : model.parameters()) chk.add(*p);
    auto rep = chk.run([&] {
        auto r = model.forward(clip);
        return static_cast<double>(model.loss(r, clip, label).total);
    });
    model.unpin_memory_conditioning();
    INFO(rep.worst_coord << " analytic=" << rep.analytic << " numeric=" << rep.numeric);
    CHECK(rep.coords_checked == model.param_count());
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("no-memory gradients stay exact") {
    ModelConfig cfg = tiny_config();
    cfg.use_memory = false;
    VadModel<double> model(cfg);
    model.init_params(18);
    Tensor<double> clip = random_clip<double>(cfg, 32);

    for (auto* p : model.parameters()) p->zero_grad();
    auto res = model.forward(clip);
    model.backward(res, clip, 0);

    nn::GradChecker chk;
    for (auto* p : model.parameters()) chk.add(*p);
    auto rep = chk.run([&] {
        auto r = model.forward(clip);
        return static_cast<double>(model.loss(r, clip, 0).total);
    });
    INFO(rep.worst_coord);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("initialisation is seed-deterministic") {
    VadModel<float> a(tiny_config()), b(tiny_config()), c(tiny_config());
    a.init_params(7);
    b.init_params(7);
    c.init_params(8);
    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->name == pb[i]->name);
        for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
            CHECK(pa[i]->value[j] == pb[i]->value[j]);
            if (pa[i]->value[j] != pc[i]->value[j]) any_diff = true;
        }
    }
    CHECK(any_diff);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const std::string path = "test_model_ckpt.bin";
    VadModel<float> model(tiny_config());
    model.init_params(11);
    model.memory().bank().trainable = false;
    Tensor<float> clip = random_clip<float>(tiny_config(), 33);
    auto before = model.forward(clip);
    model.save_checkpoint(path);

    VadModel<float> loaded(tiny_config());
    loaded.load_checkpoint(path);
    auto after = loaded.forward(clip);
    for (std::size_t i = 0; i < before.recon.size(); ++i)
        CHECK(before.recon[i] == after.recon[i]);
    for (std::size_t i = 0; i < before.phase_probs.size(); ++i)
        CHECK(before.phase_probs[i] == after.phase_probs[i]);
    CHECK_FALSE(loaded.memory().bank().trainable);

    auto header = checkpoint_header(path);
    CHECK(header.at("format_version") == 1);
    CHECK(header.at("dtype") == "f32");
    CHECK(header.at("model").at("t_max") == 8);

    ModelConfig other = tiny_config();
    other.channels = 16;
    VadModel<float> wrong(other);
    CHECK_THROWS_AS(wrong.load_checkpoint(path), IoError);
    VadModel<double> wrong_dtype(tiny_config());
    CHECK_THROWS_AS(wrong_dtype.load_checkpoint(path), IoError);
    CHECK_THROWS_AS(checkpoint_header("no_such_file.bin"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("config validation rejects malformed setups") {
    ModelConfig cfg = tiny_config();
    cfg.frame_size = 48;
    CHECK_THROWS_AS(VadModel<float>{cfg}, ConfigError);
    cfg = tiny_config();
    cfg.clip_len = 5;
    CHECK_THROWS_AS(VadModel<float>{cfg}, ConfigError);
    cfg = tiny_config();
    cfg.t_max = 1;
    CHECK_THROWS_AS(VadModel<float>{cfg}, ConfigError);
}

TEST_CASE("training on a tiny periodic scene lowers the loss deterministically") {
    ScenarioSpec spec;
    spec.device_kind = DeviceKind::oscillator;
    spec.period_len = 8;
    spec.t_max = 8;
    spec.frame_size = 16;
    spec.num_cycles_train = 6;
    spec.num_cycles_test = 2;
    spec.rng_seed = 11;
    const Dataset ds = generate_scenario(spec, "tiny-train");

    ModelConfig mc = tiny_config();
    TrainConfig tc;
    tc.batch_size = 4;
    tc.lr = 2e-3;
    tc.epochs = 10;
    tc.max_clips_per_epoch = 16;
    tc.seed = 9;

    VadModel<float> model(mc);
    model.init_params(5);
    const TrainLog log = train_model(model, ds, tc);
    REQUIRE(log.epochs.size() == 10);
    CHECK(log.steps == 10 * 4);
    CHECK(log.epochs.back().recon < log.epochs.front().recon);
    CHECK(log.epochs.back().total < log.epochs.front().total);
    for (const EpochStats& e : log.epochs) CHECK(std::isfinite(e.total));

    // Identical seeds replay the identical trajectory.
    VadModel<float> again(mc);
    again.init_params(5);
    const TrainLog replay = train_model(again, ds, tc);
    REQUIRE(replay.epochs.size() == log.epochs.size());
    for (std::size_t i = 0; i < log.epochs.size(); ++i) {
        CHECK(replay.epochs[i].recon == log.epochs[i].recon);
        CHECK(replay.epochs[i].period == log.epochs[i].period);
        CHECK(replay.epochs[i].total == log.epochs[i].total);
    }

    // Reconstruction keeps improving with the period loss switched off.
    ModelConfig no_period = mc;
    no_period.lambda_period = 0.0;
    VadModel<float> rec_only(no_period);
    rec_only.init_params(5);
    const TrainLog rec_log = train_model(rec_only, ds, tc);
    CHECK(rec_log.epochs.back().recon < rec_log.epochs.front().recon);
}

TEST_CASE("clip plumbing: tensors, phase targets and few-shot pools") {
    ScenarioSpec spec;
    spec.device_kind = DeviceKind::conveyor;
    spec.period_len = 8;
    spec.t_max = 8;
    spec.frame_size = 16;
    spec.num_cycles_train = 4;
    spec.num_cycles_test = 2;
    spec.rng_seed = 2;
    const Dataset ds = generate_scenario(spec, "tiny-clips");

    const auto clip = clip_tensor<float>(ds, 3, 4);
    REQUIRE(clip.shape() == std::vector<std::size_t>({4, 16, 16, 1}));
    CHECK(clip[0] == doctest::Approx(ds.frames[3].pixels[0] / 255.0f));
    const std::size_t px = 16 * 16;
    CHECK(clip[px + 7] == doctest::Approx(ds.frames[4].pixels[7] / 255.0f));
    CHECK_THROWS_AS(clip_tensor<float>(ds, 46, 4), ConfigError);

    CHECK(clip_phase_label(ds, 0, 4) == ds.phase_labels[2]);
    CHECK(clip_phase_label(ds, 10, 4) == ds.phase_labels[12]);

    const auto all = clip_starts(ds, 4, 1.0, 7);
    CHECK(all.size() == 32 - 4 + 1);
    CHECK(all.front() == 0);
    CHECK(all.back() == 28);
    const auto few = clip_starts(ds, 4, 0.25, 7);
    CHECK(few.size() == 8);
    CHECK(few == clip_starts(ds, 4, 0.25, 7));
    CHECK(few != clip_starts(ds, 4, 0.25, 8));
    CHECK_THROWS_AS(clip_starts(ds, 64, 1.0, 7), TrainError);

    TrainConfig bad;
    bad.subset_fraction = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training log serializes one row per epoch") {
    TrainLog log;
    log.epochs = {{1, 0.5, 1.25, 1.75}, {2, 0.25, 1.0, 1.25}};
    const std::string path =
        (std::filesystem::temp_directory_path() / "pvad-train-log.csv").string();
    write_train_log_csv(path, log);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,recon_term,period_term,total");
    std::getline(in, line);
    CHECK(line == "1,0.5,1.25,1.75");
    std::getline(in, line);
    CHECK(line == "2,0.25,1,1.25");
    std::filesystem::remove(path);
}
