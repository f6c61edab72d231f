#ifndef SYNTHGUARD_ERRORS_HPP
#define SYNTHGUARD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace synthguard {

// All toolkit errors derive from Error so callers can catch one base.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct IngestError : Error {
    using Error::Error;
};
struct NumericsError : Error {
    using Error::Error;
};
struct StateError : Error {
    using Error::Error;
};
struct SliceTooSmall : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ZeroVarianceError : Error {
    using Error::Error;
};

struct TrainingDiverged : Error {
    long epoch;
    TrainingDiverged(const std::string& what, long epoch_index)
        : Error(what + " (epoch " + std::to_string(epoch_index) + ")"), epoch(epoch_index) {}
};

struct StageFailure : Error {
    std::string stage;
    StageFailure(const std::string& stage_name, const std::string& what)
        : Error("stage " + stage_name + " failed: " + what), stage(stage_name) {}
};

}  // namespace synthguard

#endif
