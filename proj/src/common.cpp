#include "pvad/common.hpp"

#include <array>

#include "pvad/layers.hpp"

namespace pvad {

std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::array<char, 16> buf{};
    for (int i = 15; i >= 0; --i) {
        buf[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return std::string(buf.data(), buf.size());
}

}  // namespace pvad

namespace pvad::nn {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::conv2d_transpose: return "conv2d_transpose";
        case LayerKind::attention: return "attention";
        case LayerKind::layernorm: return "layernorm";
        case LayerKind::embedding: return "embedding";
        case LayerKind::gelu: return "gelu";
    }
    return "unknown";
}

}  // namespace pvad::nn
