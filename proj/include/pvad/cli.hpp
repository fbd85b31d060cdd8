#pragma once

#include <map>
#include <string>
#include <vector>

#include "pvad/config.hpp"

namespace pvad {

/// Generates the configured scenario under out_dir (for paired configs, a
/// synthetic twin under out_dir/synth and a realish twin under out_dir/real)
/// and returns the dataset directories. Anomalies and nuisances from the
/// config are injected before writing.
std::vector<std::string> cmd_gen(const RunConfig& rc, const std::string& out_dir);

/// Trains a freshly initialized model on data_dir's train split. Writes
/// model.ckpt (rolling, refreshed every epoch), train_log.csv and the
/// resolved config under out_dir.
TrainLog cmd_train(const RunConfig& rc, const std::string& data_dir,
                   const std::string& out_dir);

/// Scores data_dir's test split with the checkpointed model (architecture is
/// taken from the checkpoint header). Writes scores.csv, report.json and the
/// resolved config under out_dir; dump_trace adds trace.csv with one memory
/// addressing row per clip.
AnomalyReport cmd_eval(const RunConfig& rc, const std::string& data_dir,
                       const std::string& checkpoint, const std::string& out_dir,
                       bool dump_trace = false);

struct FinetuneRow {
    std::string mode;
    std::size_t trainable_params = 0;
    std::size_t total_params = 0;
    std::size_t steps = 0;
    double wall_clock_s = 0.0;
    double auc = 0.0;
};

/// Adapts the pretrained checkpoint to data_dir in both modes and evaluates
/// each, writing out_dir/full/model.ckpt, out_dir/peft/adapters.bin, per-mode
/// report.json files and a comparison table finetune_table.csv. With
/// merge_adapters the peft run also writes a merged standalone
/// out_dir/peft/model.ckpt. Few-shot usage follows the config's
/// few_shot_fraction.
std::vector<FinetuneRow> cmd_finetune(const RunConfig& rc,
                                      const std::string& pretrain_checkpoint,
                                      const std::string& data_dir,
                                      const std::string& out_dir,
                                      bool merge_adapters = false);

struct AblationRow {
    bool memory = true;
    bool window = true;
    double auc = 0.0;
    std::map<std::string, double> family_auc;
};

/// Runs the 2x2 ablation {memory bank on/off} x {period-window term on/off}:
/// two trainings, four evaluations. Window off means scoring with
/// lambda_fuse = 0. Writes ablation.csv plus one report per cell under
/// out_dir/mem_{on,off}_win_{on,off}.
std::vector<AblationRow> cmd_ablate(const RunConfig& rc, const std::string& data_dir,
                                    const std::string& out_dir);

void write_finetune_table_csv(const std::string& path,
                              const std::vector<FinetuneRow>& rows);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

/// Artifact format versions (dataset manifest schema, checkpoint container).
std::string version_string();

}  // namespace pvad
