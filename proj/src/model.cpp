#include "pvad/model.hpp"

namespace pvad {

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"frame_size", c.frame_size},
                       {"clip_len", c.clip_len},
                       {"channels", c.channels},
                       {"t_max", c.t_max},
                       {"mem_slots", c.mem_slots},
                       {"use_memory", c.use_memory},
                       {"normalize_mode", normalize_mode_name(c.normalize_mode)},
                       {"lambda_period", c.lambda_period}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("frame_size").get_to(c.frame_size);
    j.at("clip_len").get_to(c.clip_len);
    j.at("channels").get_to(c.channels);
    j.at("t_max").get_to(c.t_max);
    j.at("mem_slots").get_to(c.mem_slots);
    j.at("use_memory").get_to(c.use_memory);
    c.normalize_mode = parse_normalize_mode(j.at("normalize_mode").get<std::string>());
    j.at("lambda_period").get_to(c.lambda_period);
}

nlohmann::json checkpoint_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    return VadModel<float>::read_checkpoint_header(in, path);
}

}  // namespace pvad
