#pragma once

#include "mvnbc/estimator.hpp"
#include "mvnbc/likelihood.hpp"
#include "mvnbc/model.hpp"
#include "mvnbc/types.hpp"

#include <string>
#include <utility>

namespace mvnbc {

// Synthetic regression response whose weighted-least-squares fit against the
// score design yields the second-order bias. Kept per observation: a mean
// part (q-vector each) and a covariance part (q x q block each),
//   mean.col(i)  = -1/2 sum_{s,r} d2mu_i(s,r)                      kinv(s,r)
//   cov block i  = -1/2 sum_{s,r} (d2sigma_i(s,r) + 2 dmu_i(r) dmu_i(s)') kinv(s,r).
struct XiVector {
    Eigen::MatrixXd mean;  // q x n
    Eigen::MatrixXd cov;   // q x (n*q)
};

struct BiasReport {
    Eigen::VectorXd bias;        // estimated second-order bias of theta_hat
    Theta theta_tilde;           // theta_hat - bias
    std::string method;          // "matrix" or "cox-snell-oracle"
    Eigen::VectorXd phi_norms;   // per-parameter norm of the xi contribution
    double cond_information;     // 2-norm condition number of K
};

// Contracts the second-derivative design against kinv without materializing
// any dense matrix. phi_norms (optional) receives, for each parameter r, the
// norm of the contribution of kinv's r-th column.
XiVector xi_response(const DerivativeBundle& bundle, const Eigen::MatrixXd& kinv,
                     Eigen::VectorXd* phi_norms = nullptr);

// Second-order bias via the weighted-least-squares representation
//   B = K^{-1} F' H xi,
// evaluated blockwise. Throws SingularInformation when cond(K) > 1e12.
Eigen::VectorXd bias_vector(const ModelSpec& spec, const Theta& theta, const Dataset& data);

// The same bias through the classic triple cumulant sum
//   B_a = sum_{t,s,r} kinv(a,t) kinv(s,r) (k2d(t,s,r) - k3(t,s,r)/2).
// Independent route kept as a cross-check of bias_vector.
Eigen::VectorXd cox_snell_bias(const ModelSpec& spec, const Theta& theta, const Dataset& data);

// Fit, then evaluate the bias at the estimate and return the corrected
// parameters alongside the fit.
std::pair<FitResult, BiasReport> corrected_fit(const ModelSpec& spec, const Dataset& data,
                                               const FitOptions& opts = {});

}  // namespace mvnbc
