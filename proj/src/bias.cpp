#include "mvnbc/bias.hpp"

#include <cmath>
#include <sstream>

namespace mvnbc {

namespace {

// Inverse of K with a conditioning guard; cond(K) > 1e12 (or a non-positive
// eigenvalue) is treated as singular.
Eigen::MatrixXd guarded_inverse(const Eigen::MatrixXd& k, double& cond_out) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() != Eigen::Success) {
        throw SingularInformation("eigendecomposition of the expected information failed");
    }
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) {
        std::ostringstream msg;
        msg << "expected information is numerically singular (eigenvalue range [" << lo << ", "
            << hi << "])";
        throw SingularInformation(msg.str());
    }
    cond_out = hi / lo;
    return k.llt().solve(Eigen::MatrixXd::Identity(k.rows(), k.cols()));
}

// Weighted projection of the xi response onto the score design:
// rhs_t = sum_i [ dmu_t' Sinv xi_mean + tr(Sinv dsigma_t Sinv xi_cov) / 2 ].
Eigen::VectorXd project_response(const ScoreSystem& sys, const DerivativeBundle& bundle,
                                 const XiVector& xi) {
    const int q = sys.q;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.p);
    for (int i = 0; i < sys.n; ++i) {
        const auto inv = blk(sys.sigma_inv, i, q);
        const Eigen::VectorXd wm = inv * xi.mean.col(i);
        const Eigen::MatrixXd wc = inv * blk(xi.cov, i, q) * inv;
        for (int t = 0; t < sys.p; ++t) {
            rhs[t] += bundle.dmu[t].col(i).dot(wm) +
                      0.5 * blk(bundle.dsigma[t], i, q).cwiseProduct(wc.transpose()).sum();
        }
    }
    return rhs;
}

}  // namespace

XiVector xi_response(const DerivativeBundle& bundle, const Eigen::MatrixXd& kinv,
                     Eigen::VectorXd* phi_norms) {
    if (!bundle.has_second) {
        throw DimensionMismatch("xi_response needs a bundle with second derivatives");
    }
    const int p = bundle.p, n = bundle.n, q = bundle.q;
    if (kinv.rows() != p || kinv.cols() != p) {
        throw DimensionMismatch("kinv has the wrong shape");
    }
    XiVector xi;
    xi.mean = Eigen::MatrixXd::Zero(q, n);
    xi.cov = Eigen::MatrixXd::Zero(q, n * q);
    if (phi_norms) *phi_norms = Eigen::VectorXd::Zero(p);

    for (int r = 0; r < p; ++r) {
        Eigen::MatrixXd mean_r = Eigen::MatrixXd::Zero(q, n);
        Eigen::MatrixXd cov_r = Eigen::MatrixXd::Zero(q, n * q);
        for (int s = 0; s < p; ++s) {
            const double w = -0.5 * kinv(s, r);
            if (w == 0.0) continue;
            mean_r += w * bundle.d2mu_at(s, r);
            cov_r += w * bundle.d2sigma_at(s, r);
            for (int i = 0; i < n; ++i) {
                blk(cov_r, i, q) +=
                    (2.0 * w) * (bundle.dmu[r].col(i) * bundle.dmu[s].col(i).transpose());
            }
        }
        xi.mean += mean_r;
        xi.cov += cov_r;
        if (phi_norms) {
            (*phi_norms)[r] = std::sqrt(mean_r.squaredNorm() + cov_r.squaredNorm());
        }
    }
    return xi;
}

Eigen::VectorXd bias_vector(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    const ScoreSystem sys = build_score_system(spec, theta, data);
    const DerivativeBundle bundle = evaluate_derivatives(spec, theta, sys.n, 2);
    const Eigen::MatrixXd k = fisher_information(sys, bundle);
    double cond = 0.0;
    const Eigen::MatrixXd kinv = guarded_inverse(k, cond);
    const XiVector xi = xi_response(bundle, kinv);
    return k.llt().solve(project_response(sys, bundle, xi));
}

Eigen::VectorXd cox_snell_bias(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    const ScoreSystem sys = build_score_system(spec, theta, data);
    const DerivativeBundle bundle = evaluate_derivatives(spec, theta, sys.n, 2);
    const CumulantSet cs = cumulants(sys, bundle);
    double cond = 0.0;
    const Eigen::MatrixXd kinv = guarded_inverse(-cs.k2, cond);

    const int p = sys.p;
    Eigen::VectorXd bias = Eigen::VectorXd::Zero(p);
    for (int a = 0; a < p; ++a) {
        double acc = 0.0;
        for (int t = 0; t < p; ++t)
            for (int s = 0; s < p; ++s)
                for (int r = 0; r < p; ++r) {
                    const double w = cs.k2d_at(t, s, r) - 0.5 * cs.k3_at(t, s, r);
                    acc += kinv(a, t) * kinv(s, r) * w;
                }
        bias[a] = acc;
    }
    return bias;
}

std::pair<FitResult, BiasReport> corrected_fit(const ModelSpec& spec, const Dataset& data,
                                               const FitOptions& opts) {
    FitResult fr = fit(spec, data, opts);

    const ScoreSystem sys = build_score_system(spec, fr.theta_hat, data);
    const DerivativeBundle bundle = evaluate_derivatives(spec, fr.theta_hat, sys.n, 2);
    const Eigen::MatrixXd k = fisher_information(sys, bundle);
    BiasReport report;
    const Eigen::MatrixXd kinv = guarded_inverse(k, report.cond_information);
    const XiVector xi = xi_response(bundle, kinv, &report.phi_norms);
    report.bias = k.llt().solve(project_response(sys, bundle, xi));
    report.theta_tilde = fr.theta_hat - report.bias;
    report.method = "matrix";
    return {std::move(fr), std::move(report)};
}

}  // namespace mvnbc
