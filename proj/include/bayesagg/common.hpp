#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace bayesagg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ------------------------------- Errors -------------------------------

struct NotPsdError : std::runtime_error {
    double final_jitter;
    explicit NotPsdError(const std::string& what, double jitter)
        : std::runtime_error(what), final_jitter(jitter) {}
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidProbabilityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidLabelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyTasksError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DivisionByZeroError : std::domain_error {
    using std::domain_error::domain_error;
};

struct TraceMismatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotTrainedError : std::logic_error {
    using std::logic_error::logic_error;
};

struct UnknownMethodError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    long row;
    long column;
    ParseError(const std::string& what, long row_, long col_)
        : std::runtime_error(what), row(row_), column(col_) {}
};

struct LabelOutOfRangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroVarianceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(const std::string& field_, const std::string& reason)
        : std::runtime_error("config error at '" + field_ + "': " + reason), field(field_) {}
};

}  // namespace bayesagg
