#pragma once

#include <stdexcept>
#include <string>

namespace ndv {

// Input/file problems: missing files, malformed CSV rows, bad manifests,
// incompatible checkpoints. The CLI maps this to exit code 3; numeric
// failures (std::domain_error / std::runtime_error) map to exit code 4.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ndv
