#pragma once

#include <stdexcept>
#include <string>

namespace chaosmab {

// Invalid or inconsistent configuration (bad keys, bad values, missing inputs).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be opened, read, parsed or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chaosmab
