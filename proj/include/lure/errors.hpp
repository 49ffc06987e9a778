#pragma once

#include <stdexcept>
#include <string>

namespace lure {

/// Bad experiment/network configuration (shape mismatches, invalid fields).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid runtime input (out-of-range label, empty subset, bad severity).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file content (IDX, CSV, checkpoint, mask, manifest).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// API used out of order (e.g. backward without a matching forward).
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lure
