#pragma once

#include "mvnbc/likelihood.hpp"
#include "mvnbc/model.hpp"
#include "mvnbc/types.hpp"

#include <optional>
#include <vector>

namespace mvnbc {

struct FitOptions {
    int max_iter = 200;
    double tol_param = 1e-8;      // on |step|_2 / (1 + |theta|_2)
    double tol_score = 1e-6;      // on |U|_inf, scaled by n
    int step_halving_max = 10;
    std::optional<Theta> start;   // auto_start when absent
};

struct IterationRecord {
    Theta theta;
    double loglik;
    double score_inf;  // |U|_inf
    double step_len;   // |K^{-1} U|_2 proposed at this iterate
};

struct FitResult {
    Theta theta_hat;
    Eigen::MatrixXd information;  // expected information at theta_hat
    Eigen::MatrixXd cov;          // its inverse
    Eigen::VectorXd std_errors;   // sqrt(diag(cov))
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<IterationRecord> trace;
};

struct NoConvergence : Error {
    std::vector<IterationRecord> trace;
    NoConvergence(const std::string& msg, std::vector<IterationRecord> tr)
        : Error(msg), trace(std::move(tr)) {}
};

// Starting values for the built-in families ("eiv", "eiv-hetero" by moments;
// "uninl" by one Gauss-Newton linearization from the spec's start_hint);
// "custom" returns the spec's start_hint or throws UnsupportedModel.
Theta auto_start(const ModelSpec& spec, const Dataset& data);

// Maximum likelihood by Fisher scoring: solve K(theta) step = U(theta) and
// step-halve until the log-likelihood does not decrease. Converged when both
// |U|_inf <= tol_score * n and the proposed step passes tol_param; throws
// NoConvergence (with the iteration trace) otherwise, SingularInformation
// when K cannot be factorized.
FitResult fit(const ModelSpec& spec, const Dataset& data, const FitOptions& opts = {});

}  // namespace mvnbc
