#pragma once

#include "mvnbc/model.hpp"
#include "mvnbc/types.hpp"

#include <functional>

namespace mvnbc {

// Linear errors-in-variables regression with known measurement variance
// sigma_u2. Observation i is (Y_i, X_i) with
//   mu_i    = (alpha + beta mu_x, mu_x)
//   Sigma_i = [ beta^2 sx2 + s2   beta sx2 ]
//             [ beta sx2          sx2 + sigma_u2 ]
// theta = (alpha, beta, mu_x, sx2, s2); domain sx2 > 0, s2 > 0.
ModelSpec simple_eiv(double sigma_u2);

// Errors-in-variables with an exponential mean shift and multiplicative
// error heteroscedasticity driven by a known covariate z:
//   mu_i(1)       = alpha + beta mu_x + exp(gamma z_i)
//   Sigma_i(1,1)  = beta^2 sx2 + s2 exp(eta z_i)
// theta = (alpha, beta, gamma, mu_x, sx2, s2, eta).
ModelSpec hetero_eiv(double sigma_u2, const Eigen::VectorXd& z);

// User-supplied univariate mean with homoscedastic normal errors:
// y_i ~ N(m_i(beta), s2), theta = (beta, s2). grad/hess are optional
// analytic derivatives of m_i with respect to beta.
struct UniMean {
    std::function<double(const Eigen::VectorXd& beta, int i)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd& beta, int i)> grad;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& beta, int i)> hess;
};

ModelSpec univariate_nonlinear(UniMean mean, int n_beta, Theta start_hint = {});

// Scaled exponential growth mean m_i = beta1 * exp(beta2 * x_i) through
// univariate_nonlinear, with analytic derivatives; this is the concrete
// nonlinear mean the command-line tool binds to.
ModelSpec scaled_exponential(const Eigen::VectorXd& x);

}  // namespace mvnbc
