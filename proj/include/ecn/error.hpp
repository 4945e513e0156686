#pragma once

#include <stdexcept>
#include <string>

namespace ecn {

// Shape disagreement between operands; message names both shapes.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numeric domain violation (log of non-positive, sqrt of negative, division
// by zero). Raised instead of letting NaN propagate.
struct NumericDomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Broken API contract (non-scalar backward root, empty layer, bad alpha, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Out-of-range class label or index.
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Internal consistency failure (weight not in codebook, corrupt stream,
// checksum mismatch). Signals a broken upstream step, not bad user input.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File ingestion / serialization failure; message names the file.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training loss became non-finite; artifacts for the last good state have
// been written before this is thrown.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ecn
