#include "mvnbc/likelihood.hpp"

#include <cmath>
#include <sstream>

namespace mvnbc {

namespace {

void check_bundle(const ScoreSystem& sys, const DerivativeBundle& bundle, bool need_second) {
    if (bundle.n != sys.n || bundle.q != sys.q || bundle.p != sys.p) {
        throw DimensionMismatch("derivative bundle and score system disagree in shape");
    }
    if (need_second && !bundle.has_second) {
        throw DimensionMismatch("cumulants need a bundle with second derivatives");
    }
}

}  // namespace

ScoreSystem build_score_system(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    if (data.q() != spec.q) {
        std::ostringstream msg;
        msg << "data has " << data.q() << " columns per observation, model is " << spec.q
            << "-variate";
        throw DimensionMismatch(msg.str());
    }
    if (!data.y.allFinite()) throw DomainError("data contains non-finite values");
    const int n = data.n();
    const int q = spec.q;

    ScoreSystem sys;
    sys.n = n;
    sys.p = spec.p;
    sys.q = q;
    Moments m = evaluate_moments(spec, theta, n);
    sys.mu = std::move(m.mu);
    sys.sigma = std::move(m.sigma);
    sys.sigma_inv.resize(q, n * q);
    sys.resid.resize(q, n);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q, q);
    for (int i = 0; i < n; ++i) {
        Eigen::LLT<Eigen::MatrixXd> llt(blk(sys.sigma, i, q));
        if (llt.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "covariance block for observation " << i << " is not positive definite";
            throw NonPositiveDefinite(i, msg.str());
        }
        blk(sys.sigma_inv, i, q) = llt.solve(eye);
        const Eigen::MatrixXd& L = llt.matrixLLT();
        for (int j = 0; j < q; ++j) sys.logdet += 2.0 * std::log(L(j, j));
        sys.resid.col(i) = data.y.row(i).transpose() - sys.mu.col(i);
    }
    return sys;
}

double log_likelihood(const ScoreSystem& sys) {
    double quad = 0.0;
    for (int i = 0; i < sys.n; ++i) {
        const auto u = sys.resid.col(i);
        quad += u.dot(blk(sys.sigma_inv, i, sys.q) * u);
    }
    return -0.5 * sys.logdet - 0.5 * quad;
}

Eigen::VectorXd score(const ScoreSystem& sys, const DerivativeBundle& bundle) {
    check_bundle(sys, bundle, false);
    const int q = sys.q;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(sys.p);
    for (int i = 0; i < sys.n; ++i) {
        const auto inv = blk(sys.sigma_inv, i, q);
        const Eigen::VectorXd w = inv * sys.resid.col(i);
        // P = Sinv (Sigma - u u') Sinv; tr(dsigma_r P) is the covariance part
        const Eigen::MatrixXd P = inv - w * w.transpose();
        for (int r = 0; r < sys.p; ++r) {
            u[r] += bundle.dmu[r].col(i).dot(w) -
                    0.5 * blk(bundle.dsigma[r], i, q).cwiseProduct(P).sum();
        }
    }
    return u;
}

Eigen::MatrixXd fisher_information(const ScoreSystem& sys, const DerivativeBundle& bundle) {
    check_bundle(sys, bundle, false);
    const int p = sys.p;
    const int q = sys.q;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(p, p);
    std::vector<Eigen::VectorXd> b(p);   // Sinv dmu_r
    std::vector<Eigen::MatrixXd> M(p);   // Sinv dsigma_r
    for (int i = 0; i < sys.n; ++i) {
        const auto inv = blk(sys.sigma_inv, i, q);
        for (int r = 0; r < p; ++r) {
            b[r] = inv * bundle.dmu[r].col(i);
            M[r] = inv * blk(bundle.dsigma[r], i, q);
        }
        for (int s = 0; s < p; ++s)
            for (int r = s; r < p; ++r) {
                K(s, r) += bundle.dmu[s].col(i).dot(b[r]) +
                           0.5 * M[s].cwiseProduct(M[r].transpose()).sum();
            }
    }
    for (int s = 0; s < p; ++s)
        for (int r = s + 1; r < p; ++r) K(r, s) = K(s, r);
    return K;
}

CumulantSet cumulants(const ScoreSystem& sys, const DerivativeBundle& bundle) {
    check_bundle(sys, bundle, true);
    const int p = sys.p;
    const int q = sys.q;
    CumulantSet cs;
    cs.p = p;
    cs.k2 = Eigen::MatrixXd::Zero(p, p);
    cs.k3.assign(static_cast<size_t>(p) * p * p, 0.0);
    cs.k2d.assign(static_cast<size_t>(p) * p * p, 0.0);

    std::vector<Eigen::VectorXd> b(p);       // Sinv dmu_r
    std::vector<Eigen::MatrixXd> M(p);       // Sinv dsigma_r
    std::vector<Eigen::MatrixXd> N(p * p);   // Sinv d2sigma(s,r)
    auto idx = [p](int t, int s, int r) { return (t * p + s) * p + r; };
    const auto tr = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& bm) {
        return a.cwiseProduct(bm.transpose()).sum();  // tr(a * bm)
    };

    for (int i = 0; i < sys.n; ++i) {
        const auto inv = blk(sys.sigma_inv, i, q);
        for (int r = 0; r < p; ++r) {
            b[r] = inv * bundle.dmu[r].col(i);
            M[r] = inv * blk(bundle.dsigma[r], i, q);
        }
        for (int s = 0; s < p; ++s)
            for (int r = 0; r < p; ++r) N[s * p + r] = inv * blk(bundle.d2sigma_at(s, r), i, q);

        for (int s = 0; s < p; ++s)
            for (int r = 0; r < p; ++r) {
                cs.k2(s, r) -=
                    bundle.dmu[s].col(i).dot(b[r]) + 0.5 * (M[s] * M[r]).trace();
            }

        for (int t = 0; t < p; ++t)
            for (int s = 0; s < p; ++s)
                for (int r = 0; r < p; ++r) {
                    const Eigen::MatrixXd Mrs = M[r] * M[s];
                    const Eigen::MatrixXd Msr = M[s] * M[r];
                    double v3 = (Mrs * M[t]).trace() + (Msr * M[t]).trace();
                    v3 -= 0.5 * (tr(M[s], N[t * p + r]) + tr(M[r], N[t * p + s]) +
                                 tr(M[t], N[s * p + r]));
                    v3 -= -b[t].dot(blk(bundle.dsigma[s], i, q) * b[r]) -
                          b[s].dot(blk(bundle.dsigma[t], i, q) * b[r]) -
                          b[s].dot(blk(bundle.dsigma[r], i, q) * b[t]) +
                          b[t].dot(bundle.d2mu_at(s, r).col(i)) +
                          bundle.d2mu_at(t, s).col(i).dot(b[r]) +
                          b[s].dot(bundle.d2mu_at(t, r).col(i));
                    cs.k3[idx(t, s, r)] += v3;

                    double vd = 0.5 * ((Mrs * M[t]).trace() + (Msr * M[t]).trace() -
                                       tr(M[t], N[r * p + s]) - tr(M[s], N[r * p + t]));
                    vd -= bundle.d2mu_at(r, t).col(i).dot(b[s]) -
                          b[t].dot(blk(bundle.dsigma[r], i, q) * b[s]) +
                          b[t].dot(bundle.d2mu_at(r, s).col(i));
                    cs.k2d[idx(t, s, r)] += vd;
                }
    }
    return cs;
}

double log_likelihood(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    return log_likelihood(build_score_system(spec, theta, data));
}

Eigen::VectorXd score(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    const ScoreSystem sys = build_score_system(spec, theta, data);
    return score(sys, evaluate_derivatives(spec, theta, sys.n, 1));
}

Eigen::MatrixXd fisher_information(const ModelSpec& spec, const Theta& theta,
                                   const Dataset& data) {
    const ScoreSystem sys = build_score_system(spec, theta, data);
    return fisher_information(sys, evaluate_derivatives(spec, theta, sys.n, 1));
}

CumulantSet cumulants(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    const ScoreSystem sys = build_score_system(spec, theta, data);
    return cumulants(sys, evaluate_derivatives(spec, theta, sys.n, 2));
}

}  // namespace mvnbc
