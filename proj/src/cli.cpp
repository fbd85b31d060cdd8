#include "pvad/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace pvad {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

Dataset build_dataset(const RunConfig& rc, const ScenarioSpec& spec, const std::string& id) {
    Dataset ds = generate_scenario(spec, id);
    for (const auto& a : rc.anomalies) inject_anomaly(ds, a);
    for (const auto& n : rc.nuisances) apply_nuisance(ds, n);
    return ds;
}

void check_dataset_matches(const Dataset& ds, const ModelConfig& mc) {
    if (ds.spec.frame_size != mc.frame_size)
        throw ConfigError("dataset " + ds.scenario_id + " has frame size " +
                          std::to_string(ds.spec.frame_size) + ", model expects " +
                          std::to_string(mc.frame_size));
    if (ds.spec.t_max != mc.t_max)
        throw ConfigError("dataset " + ds.scenario_id + " has t_max " +
                          std::to_string(ds.spec.t_max) + ", model expects " +
                          std::to_string(mc.t_max));
}

}  // namespace

std::vector<std::string> cmd_gen(const RunConfig& rc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> dirs;
    if (rc.paired) {
        ScenarioSpec synth = rc.scenario;
        synth.domain_style = DomainStyle::synthetic;
        ScenarioSpec real = rc.scenario;
        real.domain_style = DomainStyle::realish;
        const std::string synth_dir = out_dir + "/synth";
        const std::string real_dir = out_dir + "/real";
        write_dataset(build_dataset(rc, synth, rc.scenario_id + "-synth"), synth_dir);
        write_dataset(build_dataset(rc, real, rc.scenario_id + "-real"), real_dir);
        dirs = {synth_dir, real_dir};
    } else {
        write_dataset(build_dataset(rc, rc.scenario, rc.scenario_id), out_dir);
        dirs = {out_dir};
    }
    write_resolved_config(out_dir + "/resolved.cfg", rc);
    return dirs;
}

TrainLog cmd_train(const RunConfig& rc, const std::string& data_dir,
                   const std::string& out_dir) {
    const Dataset ds = read_dataset(data_dir);
    check_dataset_matches(ds, rc.model);
    fs::create_directories(out_dir);
    VadModel<float> model(rc.model);
    model.init_params(rc.seed);
    const TrainLog log = train_model(model, ds, rc.train, out_dir + "/model.ckpt");
    write_train_log_csv(out_dir + "/train_log.csv", log);
    write_resolved_config(out_dir + "/resolved.cfg", rc);
    return log;
}

AnomalyReport cmd_eval(const RunConfig& rc, const std::string& data_dir,
                       const std::string& checkpoint, const std::string& out_dir,
                       bool dump_trace) {
    const Dataset ds = read_dataset(data_dir);
    const ModelConfig mc = checkpoint_header(checkpoint).at("model").get<ModelConfig>();
    check_dataset_matches(ds, mc);
    VadModel<float> model(mc);
    model.load_checkpoint(checkpoint);
    fs::create_directories(out_dir);
    EvalConfig ec = rc.eval;
    if (dump_trace) ec.trace_csv = out_dir + "/trace.csv";
    const AnomalyReport report = evaluate_dataset(model, ds, ec);
    write_scores_csv(out_dir + "/scores.csv", report);
    write_report_json(out_dir + "/report.json", report);
    write_resolved_config(out_dir + "/resolved.cfg", rc);
    return report;
}

std::vector<FinetuneRow> cmd_finetune(const RunConfig& rc,
                                      const std::string& pretrain_checkpoint,
                                      const std::string& data_dir,
                                      const std::string& out_dir, bool merge_adapters) {
    const Dataset ds = read_dataset(data_dir);
    const ModelConfig mc = checkpoint_header(pretrain_checkpoint).at("model").get<ModelConfig>();
    check_dataset_matches(ds, mc);
    fs::create_directories(out_dir);
    std::vector<FinetuneRow> rows;
    for (const FinetuneMode mode : {FinetuneMode::full, FinetuneMode::peft}) {
        const std::string mode_dir = out_dir + "/" + finetune_mode_name(mode);
        fs::create_directories(mode_dir);
        VadModel<float> model(mc);
        model.load_checkpoint(pretrain_checkpoint);
        const FinetuneResult res = finetune(model, ds, rc.finetune_train, mode, rc.peft);
        if (mode == FinetuneMode::full)
            model.save_checkpoint(mode_dir + "/model.ckpt");
        else
            save_adapters(model, mode_dir + "/adapters.bin");
        const AnomalyReport report = evaluate_dataset(model, ds, rc.eval);
        write_report_json(mode_dir + "/report.json", report);
        if (mode == FinetuneMode::peft && merge_adapters) {
            merge_peft(model);
            model.save_checkpoint(mode_dir + "/model.ckpt");
        }
        FinetuneRow row;
        row.mode = finetune_mode_name(mode);
        row.trainable_params = res.trainable_params;
        row.total_params = res.total_params;
        row.steps = res.log.steps;
        row.wall_clock_s = res.log.wall_clock_s;
        row.auc = report.auc;
        rows.push_back(row);
    }
    write_finetune_table_csv(out_dir + "/finetune_table.csv", rows);
    write_resolved_config(out_dir + "/resolved.cfg", rc);
    return rows;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& rc, const std::string& data_dir,
                                    const std::string& out_dir) {
    const Dataset ds = read_dataset(data_dir);
    check_dataset_matches(ds, rc.model);
    fs::create_directories(out_dir);
    std::vector<AblationRow> rows;
    for (const bool memory_on : {true, false}) {
        ModelConfig mc = rc.model;
        mc.use_memory = memory_on;
        VadModel<float> model(mc);
        model.init_params(rc.seed);
        train_model(model, ds, rc.train);
        for (const bool window_on : {true, false}) {
            EvalConfig ec = rc.eval;
            if (!window_on) ec.lambda_fuse = 0.0;
            const AnomalyReport report = evaluate_dataset(model, ds, ec);
            const std::string cell = std::string("mem_") + (memory_on ? "on" : "off") +
                                     "_win_" + (window_on ? "on" : "off");
            fs::create_directories(out_dir + "/" + cell);
            write_report_json(out_dir + "/" + cell + "/report.json", report);
            AblationRow row;
            row.memory = memory_on;
            row.window = window_on;
            row.auc = report.auc;
            row.family_auc = report.family_auc;
            rows.push_back(row);
        }
    }
    write_ablation_csv(out_dir + "/ablation.csv", rows);
    write_resolved_config(out_dir + "/resolved.cfg", rc);
    return rows;
}

void write_finetune_table_csv(const std::string& path,
                              const std::vector<FinetuneRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "mode,trainable_params,total_params,steps,wall_clock_s,auc\n";
    for (const auto& r : rows)
        out << r.mode << "," << r.trainable_params << "," << r.total_params << "," << r.steps
            << "," << fmt(r.wall_clock_s) << "," << fmt(r.auc) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    std::map<std::string, int> families;
    for (const auto& r : rows)
        for (const auto& [name, auc] : r.family_auc) families[name] = 1;
    out << "memory,window,auc";
    for (const auto& [name, one] : families) out << ",auc_" << name;
    out << "\n";
    for (const auto& r : rows) {
        out << (r.memory ? "on" : "off") << "," << (r.window ? "on" : "off") << ","
            << fmt(r.auc);
        for (const auto& [name, one] : families) {
            const auto it = r.family_auc.find(name);
            out << ",";
            if (it != r.family_auc.end()) out << fmt(it->second);
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

std::string version_string() {
    return "dataset schema 1, checkpoint format 1";
}

}  // namespace pvad
