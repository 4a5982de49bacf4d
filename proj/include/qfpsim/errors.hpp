#pragma once

#include <stdexcept>
#include <string>

namespace qfpsim {

/// Root of the library's exception hierarchy. Catching this covers every
/// failure the library can raise on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Netlist / input errors
// ---------------------------------------------------------------------------

/// Base for netlist-text problems; carries the 1-based source line.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

    [[nodiscard]] int line() const noexcept { return line_; }

private:
    int line_;
};

/// Malformed card: wrong arity, bad number, bad unit suffix, bad directive.
class SyntaxError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Card whose leading letter is not one of R/C/L/V/M.
class UnknownElementError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Two elements share a name (names compare case-insensitively).
class DuplicateNameError : public ParseError {
public:
    using ParseError::ParseError;
};

/// A non-ground node is touched by exactly one element terminal, so no loop
/// can close through it. Only raised for netlists that request a transient.
class DanglingNodeError : public Error {
public:
    explicit DanglingNodeError(const std::string& node)
        : Error("dangling node '" + node + "': only one element connects here"), node_(node) {}

    [[nodiscard]] const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

/// Builder or configuration argument outside its documented range.
class InvalidParamError : public Error {
public:
    using Error::Error;
};

/// Device-level argument outside its domain (x outside [0,1], dt <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Solver errors
// ---------------------------------------------------------------------------

/// Circuit graph admits no DC path from some node to ground (e.g. an island
/// connected only through capacitors), so the operating-point matrix would be
/// structurally singular.
class SingularTopologyError : public Error {
public:
    using Error::Error;
};

/// LU elimination hit a pivot below the singularity threshold.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Adaptive stepping reached dt_min and the local error estimate still failed.
class StepUnderflowError : public Error {
public:
    explicit StepUnderflowError(double t)
        : Error("step size underflow at t=" + std::to_string(t)), t_(t) {}

    [[nodiscard]] double time() const noexcept { return t_; }

private:
    double t_ = 0.0;
};

/// A solution vector came back with NaN/Inf entries.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Analysis errors
// ---------------------------------------------------------------------------

/// Two waveforms to be differenced do not cover the same time span.
class SpanMismatchError : public Error {
public:
    using Error::Error;
};

/// A named signal is absent from a waveform.
class MissingSignalError : public Error {
public:
    using Error::Error;
};

/// A waveform is shorter than the averaging window asked for.
class SpanTooShortError : public Error {
public:
    using Error::Error;
};

/// A measurement set has no record for a requested device state.
class EmptyStateError : public Error {
public:
    using Error::Error;
};

/// Aggregates cannot yield a usable corner set (e.g. on/off ranges collapse).
class InvalidStatsError : public Error {
public:
    using Error::Error;
};

/// A solver failure inside a sweep task, annotated with the (corner,
/// frequency, amplitude) coordinates of the run that raised it.
class SweepError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// I/O errors
// ---------------------------------------------------------------------------

/// File unreadable/unwritable, or malformed CSV content (carries row context
/// in the message when applicable).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace qfpsim
