#include "pvad/lora.hpp"

namespace pvad {

FinetuneMode parse_finetune_mode(const std::string& s) {
    if (s == "full") return FinetuneMode::full;
    if (s == "peft") return FinetuneMode::peft;
    throw ConfigError("unknown finetune mode '" + s + "' (expected full or peft)");
}

const char* finetune_mode_name(FinetuneMode m) {
    return m == FinetuneMode::full ? "full" : "peft";
}

bool trainable_under_peft(const std::string& param_name) {
    if (param_name.rfind("enc.patch_proj.", 0) == 0) return true;
    if (param_name.rfind("enc.pos_emb.", 0) == 0) return true;
    if (param_name.rfind("enc.ln1.", 0) == 0) return true;
    if (param_name.rfind("enc.ln2.", 0) == 0) return true;
    return param_name.find(".lora_") != std::string::npos;
}

}  // namespace pvad
