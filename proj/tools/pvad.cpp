#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pvad/cli.hpp"

namespace {

/// Config-source flags shared by every subcommand.
struct ConfigArgs {
    std::string preset;
    std::string config_file;
    std::uint64_t seed = 0;
    std::vector<std::string> sets;
    CLI::Option* preset_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
    args.preset_opt =
        cmd->add_option("--preset", args.preset, "Start from a named preset");
    cmd->add_option("--config", args.config_file, "Key = value config file");
    args.seed_opt = cmd->add_option("--seed", args.seed, "Master seed (applied last)");
    cmd->add_option("--set", args.sets, "Override one key, as key=value (repeatable)");
}

/// Precedence: preset < config file < --set < --seed. A --preset flag must
/// agree with any preset key inside the file.
pvad::RunConfig resolve_config(const ConfigArgs& args) {
    std::map<std::string, std::string> file_kv;
    if (!args.config_file.empty()) file_kv = pvad::read_config_file(args.config_file);

    std::string preset = "custom";
    if (const auto it = file_kv.find("preset"); it != file_kv.end()) preset = it->second;
    if (*args.preset_opt) {
        if (file_kv.count("preset") && file_kv["preset"] != args.preset)
            throw pvad::ConfigError("--preset " + args.preset +
                                    " conflicts with config file preset " +
                                    file_kv["preset"]);
        preset = args.preset;
    }

    pvad::RunConfig rc = pvad::preset_config(preset);
    pvad::apply_overrides(rc, file_kv);

    std::map<std::string, std::string> set_kv;
    for (const std::string& s : args.sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw pvad::ConfigError("--set expects key=value, got '" + s + "'");
        set_kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    pvad::apply_overrides(rc, set_kv);

    if (*args.seed_opt) rc.seed = args.seed;
    rc.finalize();
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Periodic-memory video anomaly detection pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pvad::version_string());

    ConfigArgs gen_args, train_args, eval_args, ft_args, abl_args;
    std::string gen_out, train_data, train_out, eval_data, eval_ckpt, eval_out;
    std::string ft_data, ft_ckpt, ft_out, abl_data, abl_out;
    bool ft_merge = false, eval_trace = false;

    CLI::App* gen = app.add_subcommand("gen", "Generate a scenario to disk");
    add_config_flags(gen, gen_args);
    gen->add_option("--out", gen_out, "Output directory")->required();

    CLI::App* train = app.add_subcommand("train", "Train a model on a generated scenario");
    add_config_flags(train, train_args);
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "Score a test split with a checkpoint");
    add_config_flags(eval, eval_args);
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--ckpt", eval_ckpt, "Model checkpoint")->required();
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_flag("--dump-trace", eval_trace, "Write per-clip memory addressing rows");

    CLI::App* ft = app.add_subcommand(
        "finetune", "Adapt a pretrained checkpoint (full and peft modes)");
    add_config_flags(ft, ft_args);
    ft->add_option("--data", ft_data, "Dataset directory")->required();
    ft->add_option("--ckpt", ft_ckpt, "Pretrained checkpoint")->required();
    ft->add_option("--out", ft_out, "Output directory")->required();
    ft->add_flag("--merge", ft_merge, "Also write the merged peft checkpoint");

    CLI::App* abl = app.add_subcommand(
        "ablate", "Run the memory/window 2x2 ablation");
    add_config_flags(abl, abl_args);
    abl->add_option("--data", abl_data, "Dataset directory")->required();
    abl->add_option("--out", abl_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            for (const std::string& dir : pvad::cmd_gen(resolve_config(gen_args), gen_out))
                std::cout << "wrote dataset " << dir << "\n";
        } else if (train->parsed()) {
            const pvad::TrainLog log =
                pvad::cmd_train(resolve_config(train_args), train_data, train_out);
            std::cout << "trained " << log.steps << " steps; final loss "
                      << log.epochs.back().total << "; artifacts in " << train_out << "\n";
        } else if (eval->parsed()) {
            const pvad::AnomalyReport report = pvad::cmd_eval(
                resolve_config(eval_args), eval_data, eval_ckpt, eval_out, eval_trace);
            std::cout << "auc " << report.auc;
            for (const auto& [family, auc] : report.family_auc)
                std::cout << "  " << family << " " << auc;
            std::cout << "; artifacts in " << eval_out << "\n";
        } else if (ft->parsed()) {
            const auto rows = pvad::cmd_finetune(resolve_config(ft_args), ft_ckpt, ft_data,
                                                 ft_out, ft_merge);
            for (const auto& r : rows)
                std::cout << r.mode << ": trainable " << r.trainable_params << "/"
                          << r.total_params << ", auc " << r.auc << "\n";
        } else if (abl->parsed()) {
            const auto rows =
                pvad::cmd_ablate(resolve_config(abl_args), abl_data, abl_out);
            for (const auto& r : rows)
                std::cout << "memory " << (r.memory ? "on " : "off") << " window "
                          << (r.window ? "on " : "off") << " auc " << r.auc << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
