#pragma once

// Literal stacked-matrix reference implementation used as an independent
// oracle for the block-structured production code. Everything is built as
// one explicit global system: the nq-vector of stacked means, the nq x nq
// block-diagonal covariance, the Kronecker-product weight for the
// covariance half, and the augmented regressor matrix. Intended only for
// tiny problems (nq <= 8); cost is O((nq)^6)-ish and clarity is the point.

#include <mvnbc/likelihood.hpp>
#include <mvnbc/model.hpp>
#include <mvnbc/types.hpp>

#include <Eigen/Dense>
#include <vector>

namespace testutil {

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

struct DenseReference {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
  Eigen::VectorXd bias;
};

inline DenseReference dense_reference(const mvnbc::ModelSpec& spec,
                                      const mvnbc::Theta& theta,
                                      const mvnbc::Dataset& data) {
  const int n = data.n();
  const int q = spec.q;
  const int p = spec.p;
  const int nq = n * q;

  const mvnbc::Moments mom = mvnbc::evaluate_moments(spec, theta, n);
  const mvnbc::DerivativeBundle bundle =
      mvnbc::evaluate_derivatives(spec, theta, n, 2);

  // Global stacked mean/covariance and residual.
  Eigen::VectorXd mu_g(nq);
  Eigen::VectorXd y_g(nq);
  Eigen::MatrixXd sigma_g = Eigen::MatrixXd::Zero(nq, nq);
  for (int i = 0; i < n; ++i) {
    mu_g.segment(i * q, q) = mom.mu.col(i);
    y_g.segment(i * q, q) = data.y.row(i).transpose();
    sigma_g.block(i * q, i * q, q, q) = mvnbc::blk(mom.sigma, i, q);
  }
  const Eigen::VectorXd u = y_g - mu_g;

  // Per-parameter global derivatives: D has the stacked mean gradients,
  // big_c[r] the block-diagonal covariance gradients, V their vecs.
  Eigen::MatrixXd dmat(nq, p);
  std::vector<Eigen::MatrixXd> big_c(static_cast<size_t>(p));
  Eigen::MatrixXd vmat(nq * nq, p);
  for (int r = 0; r < p; ++r) {
    Eigen::MatrixXd cr = Eigen::MatrixXd::Zero(nq, nq);
    for (int i = 0; i < n; ++i) {
      dmat.col(r).segment(i * q, q) = bundle.dmu[static_cast<size_t>(r)].col(i);
      cr.block(i * q, i * q, q, q) =
          mvnbc::blk(bundle.dsigma[static_cast<size_t>(r)], i, q);
    }
    big_c[static_cast<size_t>(r)] = cr;
    vmat.col(r) = vec(cr);
  }

  const Eigen::MatrixXd sigma_inv =
      sigma_g.llt().solve(Eigen::MatrixXd::Identity(nq, nq));
  const Eigen::MatrixXd weight_mean = sigma_inv;
  const Eigen::MatrixXd weight_cov = 0.5 * kron(sigma_inv, sigma_inv);

  DenseReference out;

  const Eigen::LLT<Eigen::MatrixXd> llt(sigma_g);
  double logdet = 0.0;
  for (int j = 0; j < nq; ++j)
    logdet += 2.0 * std::log(llt.matrixL()(j, j));
  out.loglik = -0.5 * logdet - 0.5 * u.dot(sigma_inv * u);

  // Augmented residual: mean part u, covariance part -(sigma - u u^T).
  const Eigen::VectorXd resid_cov = -vec(sigma_g - u * u.transpose());
  out.score = dmat.transpose() * weight_mean * u +
              vmat.transpose() * weight_cov * resid_cov;

  out.information = dmat.transpose() * weight_mean * dmat +
                    vmat.transpose() * weight_cov * vmat;

  // Second-order response: xi = sum_r Phi_r Kinv e_r with
  // Phi_r = -1/2 (G_r + J_r), G_r holding the stacked second derivatives
  // and J_r the Kronecker coupling of mean gradients into the covariance
  // half. Bias solves K b = F' H xi.
  const Eigen::MatrixXd kinv =
      out.information.llt().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::VectorXd xi_mean = Eigen::VectorXd::Zero(nq);
  Eigen::VectorXd xi_cov = Eigen::VectorXd::Zero(nq * nq);
  for (int r = 0; r < p; ++r) {
    Eigen::MatrixXd g_mean(nq, p);
    Eigen::MatrixXd g_cov(nq * nq, p);
    for (int s = 0; s < p; ++s) {
      Eigen::MatrixXd c2 = Eigen::MatrixXd::Zero(nq, nq);
      for (int i = 0; i < n; ++i) {
        g_mean.col(s).segment(i * q, q) = bundle.d2mu_at(s, r).col(i);
        c2.block(i * q, i * q, q, q) =
            mvnbc::blk(bundle.d2sigma_at(s, r), i, q);
      }
      g_cov.col(s) =
          vec(c2) + 2.0 * vec(dmat.col(r) * dmat.col(s).transpose());
    }
    xi_mean += -0.5 * g_mean * kinv.col(r);
    xi_cov += -0.5 * g_cov * kinv.col(r);
  }
  const Eigen::VectorXd rhs = dmat.transpose() * weight_mean * xi_mean +
                              vmat.transpose() * weight_cov * xi_cov;
  out.bias = out.information.llt().solve(rhs);
  return out;
}

}  // namespace testutil
