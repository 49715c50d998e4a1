#pragma once

#include <stdexcept>
#include <string>

namespace subrosa {

/// Base class for all toolkit errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input: config documents, expression text,
/// missing files, out-of-range parameters.
class config_error : public error {
public:
    using error::error;
};

/// Structural misuse of the API: fields on mismatched grids, incompatible
/// tangent-density bases, wrong component counts.
class structural_error : public error {
public:
    using error::error;
};

/// Linear-solver failures: solvability violations (nonzero-mean sources),
/// CG iteration-cap overruns, degenerate frames.
class solver_error : public error {
public:
    using error::error;
};

/// Time-integration failures: NaN particle states, positivity loss in the
/// heat flow, scatter coverage gaps.
class integration_error : public error {
public:
    using error::error;
};

}  // namespace subrosa
