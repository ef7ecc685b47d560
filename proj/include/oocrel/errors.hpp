#pragma once

#include <stdexcept>
#include <string>

namespace oocrel {

struct ContradictionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TokenizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContextOverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FrozenViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScheduleExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateProbabilitiesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingCellsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace oocrel
