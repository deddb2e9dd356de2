#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mvnbc {

// Parameter vector shared by the mean and covariance structure.
using Theta = Eigen::VectorXd;

// ---- error hierarchy -----------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// Theta (or a perturbation of it) left the model's open parameter domain,
// or an evaluation was requested at a point where the model is undefined.
struct DomainError : Error {
    using Error::Error;
};

struct UnsupportedModel : Error {
    using Error::Error;
};

struct InvalidConstant : Error {
    using Error::Error;
};

// Malformed configuration input (design JSON, option values).
struct ConfigError : Error {
    using Error::Error;
};

struct NonPositiveDefinite : Error {
    int observation;  // 0-based index of the offending covariance block
    NonPositiveDefinite(int obs, const std::string& msg) : Error(msg), observation(obs) {}
};

struct SingularInformation : Error {
    using Error::Error;
};

// ---- data ------------------------------------------------------------------

// Row i holds the i-th q-variate observation.
struct Dataset {
    Eigen::MatrixXd y;

    int n() const { return static_cast<int>(y.rows()); }
    int q() const { return static_cast<int>(y.cols()); }
};

// ---- block-diagonal storage ------------------------------------------------
//
// Per-observation q x q matrices (covariances and their derivatives) are kept
// as a single q x (n*q) matrix; block i occupies columns [i*q, (i+1)*q).

inline Eigen::Block<Eigen::MatrixXd> blk(Eigen::MatrixXd& m, int i, int q) {
    return m.block(0, i * q, q, q);
}

inline Eigen::Block<const Eigen::MatrixXd> blk(const Eigen::MatrixXd& m, int i, int q) {
    return m.block(0, i * q, q, q);
}

}  // namespace mvnbc
