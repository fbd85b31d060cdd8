#include "pvad/memory_bank.hpp"

namespace pvad {

NormalizeMode parse_normalize_mode(const std::string& s) {
    if (s == "column") return NormalizeMode::column;
    if (s == "row") return NormalizeMode::row;
    throw ConfigError("unknown normalize mode '" + s + "' (expected column or row)");
}

const char* normalize_mode_name(NormalizeMode m) {
    return m == NormalizeMode::column ? "column" : "row";
}

}  // namespace pvad
