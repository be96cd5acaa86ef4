#pragma once

#include <stdexcept>
#include <string>

namespace mgt {

/// Base of every error raised by the library. `code()` is the CLI exit status.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int exit_code = 1)
        : std::runtime_error(what), code_(exit_code) {}
    [[nodiscard]] int code() const noexcept { return code_; }
    [[nodiscard]] virtual const char* kind() const noexcept { return "Error"; }

private:
    int code_;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int generic = 1;
inline constexpr int validation = 2;
inline constexpr int solver_failure = 3;
inline constexpr int blowup = 4;
inline constexpr int no_contraction = 5;
}  // namespace exit_code

#define MGT_DEFINE_ERROR(Name, Code)                                   \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& what) : Error(what, Code) {}  \
        const char* kind() const noexcept override { return #Name; }   \
    }

// input / configuration problems
MGT_DEFINE_ERROR(InvalidMaterial, exit_code::validation);
MGT_DEFINE_ERROR(ValidationError, exit_code::validation);
MGT_DEFINE_ERROR(ParseError, exit_code::validation);
MGT_DEFINE_ERROR(SchemaError, exit_code::validation);
MGT_DEFINE_ERROR(NegativeTemperature, exit_code::validation);
MGT_DEFINE_ERROR(IncompatibleBoundary, exit_code::validation);
MGT_DEFINE_ERROR(DegenerateCoefficient, exit_code::validation);
MGT_DEFINE_ERROR(GridMismatch, exit_code::validation);
MGT_DEFINE_ERROR(TimeMismatch, exit_code::validation);
MGT_DEFINE_ERROR(InsufficientSamples, exit_code::validation);
MGT_DEFINE_ERROR(StabilityViolation, exit_code::validation);

// numerical failures
MGT_DEFINE_ERROR(NonFiniteState, exit_code::solver_failure);
MGT_DEFINE_ERROR(SolverFailure, exit_code::solver_failure);
MGT_DEFINE_ERROR(MaxIterExceeded, exit_code::no_contraction);
MGT_DEFINE_ERROR(NoContraction, exit_code::no_contraction);

#undef MGT_DEFINE_ERROR

/// Raised by `evolve` when the extensibility monitor trips.
class BlowupSuspected : public Error {
public:
    BlowupSuspected(const std::string& what, double time, double monitor_value)
        : Error(what, exit_code::blowup), time_(time), value_(monitor_value) {}
    const char* kind() const noexcept override { return "BlowupSuspected"; }
    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] double monitor_value() const noexcept { return value_; }

private:
    double time_;
    double value_;
};

}  // namespace mgt
