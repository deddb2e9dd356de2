#pragma once

#include "mvnbc/model.hpp"
#include "mvnbc/types.hpp"

namespace mvnbc {

// Everything the scoring equations need at one theta, with each Sigma_i
// inverted once (via Cholesky) and reused by every contraction.
struct ScoreSystem {
    int n = 0, p = 0, q = 0;
    Eigen::MatrixXd mu;         // q x n
    Eigen::MatrixXd sigma;      // q x (n*q)
    Eigen::MatrixXd sigma_inv;  // q x (n*q)
    Eigen::MatrixXd resid;      // q x n, column i = y_i - mu_i
    double logdet = 0.0;        // sum_i log |Sigma_i|
};

ScoreSystem build_score_system(const ModelSpec& spec, const Theta& theta, const Dataset& data);

// Log-likelihood without the -(n*q/2) log(2*pi) constant.
double log_likelihood(const ScoreSystem& sys);

// Score vector U_r = sum_i [ dmu_r' Sinv u - tr(dsigma_r (Sinv - Sinv u u' Sinv)) / 2 ].
Eigen::VectorXd score(const ScoreSystem& sys, const DerivativeBundle& bundle);

// Expected (Fisher) information
// K[s,r] = sum_i [ dmu_s' Sinv dmu_r + tr(Sinv dsigma_s Sinv dsigma_r) / 2 ].
Eigen::MatrixXd fisher_information(const ScoreSystem& sys, const DerivativeBundle& bundle);

// Joint cumulants of log-likelihood derivatives, flat index (t*p + s)*p + r.
//   k2           kappa_{sr}      = E[d^2 l / dtheta_s dtheta_r]  (= -K)
//   k3           kappa_{tsr}     third-order cumulant
//   k2d          kappa_{ts}^{(r)} = d kappa_{ts} / d theta_r
struct CumulantSet {
    int p = 0;
    Eigen::MatrixXd k2;
    std::vector<double> k3;
    std::vector<double> k2d;

    double k3_at(int t, int s, int r) const { return k3[(t * p + s) * p + r]; }
    double k2d_at(int t, int s, int r) const { return k2d[(t * p + s) * p + r]; }
};

// Requires a bundle with second derivatives.
CumulantSet cumulants(const ScoreSystem& sys, const DerivativeBundle& bundle);

// One-shot conveniences (build the system and bundle internally).
double log_likelihood(const ModelSpec& spec, const Theta& theta, const Dataset& data);
Eigen::VectorXd score(const ModelSpec& spec, const Theta& theta, const Dataset& data);
Eigen::MatrixXd fisher_information(const ModelSpec& spec, const Theta& theta,
                                   const Dataset& data);
CumulantSet cumulants(const ModelSpec& spec, const Theta& theta, const Dataset& data);

}  // namespace mvnbc
