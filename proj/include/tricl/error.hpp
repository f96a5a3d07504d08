#pragma once

#include <stdexcept>
#include <string>

namespace tricl {

// Raised for bad configs, malformed files, and violated preconditions.
// The CLI maps this to exit code 2; everything else to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tricl
