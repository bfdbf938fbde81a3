#pragma once

#include <stdexcept>
#include <string>

namespace dcnar {

/// Bad input data, configuration, or arguments. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (non-convergence, separation, singular system).
/// The CLI maps this to exit code 1.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dcnar
