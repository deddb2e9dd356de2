#pragma once

// Shared fixtures and utilities for the test suites.

#include <mvnbc/builtin.hpp>
#include <mvnbc/likelihood.hpp>
#include <mvnbc/model.hpp>
#include <mvnbc/rng.hpp>
#include <mvnbc/types.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace testutil {

using mvnbc::Dataset;
using mvnbc::ModelSpec;
using mvnbc::Theta;

// Errors-in-variables calibration data (11 pairs, known measurement
// variance 57). Shipped as data/fuller.csv for the CLI; embedded here so
// library tests do not depend on paths.
inline Dataset calib_data() {
  Eigen::MatrixXd y(11, 2);
  y << 86, 70, 115, 97, 90, 53, 86, 64, 110, 95, 91, 64, 99, 50, 96, 70, 99,
      94, 104, 69, 96, 51;
  return Dataset{y};
}

constexpr double kCalibSigmaU2 = 57.0;

// Reference results for the calibration fit, frozen from an independent
// numerical implementation of the same estimator (4-decimal published
// values; loglik carried at full precision).
struct CalibAnchors {
  Theta mle;
  Theta se;
  Theta bias;
  Theta bce;
  double loglik;
};

inline CalibAnchors calib_anchors() {
  CalibAnchors a;
  a.mle = Theta(5);
  a.mle << 66.8606, 0.4331, 70.6364, 220.1405, 38.4058;
  a.se = Theta(5);
  a.se << 11.7272, 0.1633, 5.0194, 118.1731, 20.9357;
  a.bias = Theta(5);
  a.bias << -2.5334, 0.0359, 0.0000, -25.1946, -10.3344;
  a.bce = Theta(5);
  a.bce << 69.3939, 0.3973, 70.6364, 245.3351, 48.7402;
  a.loglik = -63.09890815536371;
  return a;
}

// Relative error with the same normalization used by the library's
// validation report: |a-b|_inf / (1 + |a|_inf).
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + a.cwiseAbs().maxCoeff());
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / (1.0 + std::abs(a));
}

// Deterministic random parameter draws for the three builtin families.
// Values stay well inside each domain so finite differencing is safe.
inline Theta random_eiv_theta(mvnbc::Rng& rng) {
  Theta th(5);
  th << -2.0 + 4.0 * rng.uniform(), -1.5 + 3.0 * rng.uniform(),
      -3.0 + 6.0 * rng.uniform(), 0.3 + 2.7 * rng.uniform(),
      0.3 + 2.7 * rng.uniform();
  return th;
}

inline Theta random_hetero_theta(mvnbc::Rng& rng) {
  Theta th(7);
  th << -2.0 + 4.0 * rng.uniform(), -1.5 + 3.0 * rng.uniform(),
      -0.8 + 1.6 * rng.uniform(), -3.0 + 6.0 * rng.uniform(),
      0.3 + 2.7 * rng.uniform(), 0.3 + 2.7 * rng.uniform(),
      -0.8 + 1.6 * rng.uniform();
  return th;
}

inline Theta random_uninl_theta(mvnbc::Rng& rng) {
  Theta th(3);
  th << 0.5 + 1.5 * rng.uniform(), -0.8 + 1.6 * rng.uniform(),
      0.3 + 2.7 * rng.uniform();
  return th;
}

inline Eigen::VectorXd even_grid(int n, double lo, double hi) {
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return g;
}

// Draws a synthetic dataset from the model's own moments: y_i = mu_i + L_i z.
inline Dataset draw_dataset(const ModelSpec& spec, const Theta& theta, int n,
                            mvnbc::Rng& rng) {
  const mvnbc::Moments m = mvnbc::evaluate_moments(spec, theta, n);
  Eigen::MatrixXd y(n, spec.q);
  for (int i = 0; i < n; ++i) {
    Eigen::LLT<Eigen::MatrixXd> llt(mvnbc::blk(m.sigma, i, spec.q));
    Eigen::VectorXd z(spec.q);
    for (int j = 0; j < spec.q; ++j) z[j] = rng.normal();
    y.row(i) = (m.mu.col(i) + llt.matrixL() * z).transpose();
  }
  return Dataset{y};
}

// Central-difference score from the log-likelihood alone; independent of the
// analytic derivative suppliers.
inline Theta fd_score(const ModelSpec& spec, const Theta& theta,
                      const Dataset& data, double scale = 1e-5) {
  Theta g(spec.p);
  for (int r = 0; r < spec.p; ++r) {
    const double h = scale * std::max(1.0, std::abs(theta[r]));
    Theta tp = theta, tm = theta;
    tp[r] += h;
    tm[r] -= h;
    g[r] = (mvnbc::log_likelihood(spec, tp, data) -
            mvnbc::log_likelihood(spec, tm, data)) /
           (2.0 * h);
  }
  return g;
}

// One model family per acceptance surface, parameterized uniformly.
struct FamilyCase {
  std::string name;
  ModelSpec spec;
  Theta theta;
};

// Three model families at a deterministic random point each, sized for n
// observations. `draw` indexes independent substreams.
inline std::vector<FamilyCase> family_cases(int n, uint64_t draw) {
  std::vector<FamilyCase> out;
  {
    mvnbc::Rng rng = mvnbc::Rng::stream(91, draw, 0);
    out.push_back({"eiv", mvnbc::simple_eiv(0.2 + 1.8 * rng.uniform()),
                   random_eiv_theta(rng)});
  }
  {
    mvnbc::Rng rng = mvnbc::Rng::stream(91, draw, 1);
    const double su2 = 0.2 + 1.8 * rng.uniform();
    out.push_back({"eiv-hetero",
                   mvnbc::hetero_eiv(su2, even_grid(n, -1.0, 1.0)),
                   random_hetero_theta(rng)});
  }
  {
    mvnbc::Rng rng = mvnbc::Rng::stream(91, draw, 2);
    out.push_back(
        {"uninl", mvnbc::scaled_exponential(even_grid(n, 0.1, 2.0)),
         random_uninl_theta(rng)});
  }
  return out;
}

}  // namespace testutil
