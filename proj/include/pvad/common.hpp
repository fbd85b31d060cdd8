#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pvad {

/// Invalid user-supplied configuration (bad field values, unknown keys).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or dimension mismatch between tensors/layers.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / serialization failures (missing file, checksum mismatch, bad format).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Evaluation cannot proceed (e.g. AUC undefined because labels are single-class).
class EvalError : public std::runtime_error {
public:
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training aborted (diverged loss, unusable split).
class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// FNV-1a 64-bit hash, used for frame checksums and RNG stream keys.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

std::string to_hex16(std::uint64_t v);

}  // namespace pvad
