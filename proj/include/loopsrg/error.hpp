#pragma once

#include <stdexcept>
#include <string>

namespace loopsrg {

// Raised when inputs violate a documented precondition (bad graph, not a
// basis, malformed instance contents, ...). Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a file cannot be opened, read or written. Maps to exit code 2.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

} // namespace loopsrg
