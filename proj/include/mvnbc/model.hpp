#pragma once

#include "mvnbc/types.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mvnbc {

// First and second parameter derivatives of the mean vectors and covariance
// blocks, evaluated at one theta for all n observations.
//
//   dmu[r]          q x n      column i = d mu_i / d theta_r
//   dsigma[r]       q x (n*q)  block  i = d Sigma_i / d theta_r
//   d2mu_at(s,r)    q x n      column i = d^2 mu_i / d theta_s d theta_r
//   d2sigma_at(s,r) q x (n*q)
//
// Second-derivative storage is flat with index s*p + r; entries (s,r) and
// (r,s) are filled from the same evaluation, so they are bitwise equal.
struct DerivativeBundle {
    int p = 0, n = 0, q = 0;
    bool has_second = false;
    std::vector<Eigen::MatrixXd> dmu;
    std::vector<Eigen::MatrixXd> dsigma;
    std::vector<Eigen::MatrixXd> d2mu;
    std::vector<Eigen::MatrixXd> d2sigma;

    Eigen::MatrixXd& d2mu_at(int s, int r) { return d2mu[s * p + r]; }
    const Eigen::MatrixXd& d2mu_at(int s, int r) const { return d2mu[s * p + r]; }
    Eigen::MatrixXd& d2sigma_at(int s, int r) { return d2sigma[s * p + r]; }
    const Eigen::MatrixXd& d2sigma_at(int s, int r) const { return d2sigma[s * p + r]; }
};

using MeanFn = std::function<Eigen::VectorXd(const Theta&, int)>;
using CovFn = std::function<Eigen::MatrixXd(const Theta&, int)>;
using DomainFn = std::function<bool(const Theta&)>;
// Analytic derivative suppliers receive a zero-initialized bundle and set the
// nonzero entries; first_derivs fills dmu/dsigma, second_derivs d2mu/d2sigma.
using DerivFn = std::function<void(const Theta&, DerivativeBundle&)>;

// A multivariate normal model: q-variate observations with mean mu_i(theta)
// and covariance Sigma_i(theta), both driven by the same p parameters.
// Covariates enter through capture in mean_fn / cov_fn.
struct ModelSpec {
    int p = 0;
    int q = 0;
    std::string family = "custom";
    std::vector<std::string> param_names;
    std::map<std::string, double> constants;

    MeanFn mean_fn;
    CovFn cov_fn;
    DomainFn in_domain;      // open-set membership; null means all finite theta
    DerivFn first_derivs;    // optional; finite differences otherwise
    DerivFn second_derivs;   // optional; finite differences otherwise

    // Family-specific starting hint: for "uninl" the mean-parameter base point
    // used by auto_start's linearization; for "custom" a full starting theta.
    Theta start_hint;
};

struct Moments {
    Eigen::MatrixXd mu;     // q x n
    Eigen::MatrixXd sigma;  // q x (n*q), per-observation blocks
};

// Throws DimensionMismatch on wrong theta length, DomainError when theta is
// non-finite or outside the model domain.
void check_theta(const ModelSpec& spec, const Theta& theta);

// Evaluates mu_i and Sigma_i for i = 0..n-1 and verifies each Sigma_i is
// positive definite (NonPositiveDefinite carries the failing index).
Moments evaluate_moments(const ModelSpec& spec, const Theta& theta, int n);

// order = 1 fills first derivatives only; order = 2 both. Analytic suppliers
// are used when present, otherwise central finite differences on the moment
// functions: step 1e-6 * max(1, |theta_r|) for first differences, and
// 2e-4-scale stencils for second derivatives when no first-order supplier
// exists. Steps that would exit the domain are halved up to three times
// before DomainError is thrown.
DerivativeBundle evaluate_derivatives(const ModelSpec& spec, const Theta& theta, int n,
                                      int order = 2);

struct Violation {
    std::string where;   // e.g. "dsigma[4]", "d2mu(1,2)", "cov symmetry"
    double max_rel_err;  // worst |analytic - reference| / (1 + |analytic|_inf)
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Consistency checks at one theta: covariance symmetry and positive
// definiteness, second-derivative index symmetry, and agreement of any
// analytic derivative suppliers with the finite-difference fallback
// (relative mismatch above 1e-4 is flagged).
ValidationReport validate_spec(const ModelSpec& spec, const Theta& theta, int n);

}  // namespace mvnbc
