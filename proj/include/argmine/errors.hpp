#pragma once

#include <stdexcept>
#include <string>

namespace argmine {

// Malformed input files (dataset lines, CSV rows, checkpoints).
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A well-formed value breaks a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad experiment configuration, pattern or preset.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor or sequence shapes that do not line up.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An internal guarantee was broken at run time, e.g. a frozen tensor moved
// during training. Not recoverable.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace argmine
