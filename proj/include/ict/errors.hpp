#pragma once

#include <stdexcept>
#include <string>

namespace ict {

// Shape or size mismatch between operands.
struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Caller violated an operation's precondition.
struct ContractError : std::invalid_argument {
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Geometry collapsed to something with no usable interior (collinear hull etc.).
struct DegenerateGeometryError : std::runtime_error {
    explicit DegenerateGeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically unusable input (zero-norm vector and the like).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// No candidate satisfied the search constraints.
struct NoMatchError : std::runtime_error {
    explicit NoMatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure; message carries the offending path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ict
