#pragma once

#include <stdexcept>

namespace srsan {

// Error taxonomy mirrored by the CLI exit codes:
//   UsageError -> 1, DataError -> 2, NumericError -> 3.
// ContractViolation marks a broken internal precondition (shape mismatch,
// misuse of a kernel) and is not expected to surface in normal operation.

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace srsan
