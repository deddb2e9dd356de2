#include "mvnbc/builtin.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace mvnbc {

namespace {

// theta layout for simple_eiv
enum : int { eALPHA = 0, eBETA = 1, eMUX = 2, eSX2 = 3, eS2 = 4 };
// theta layout for hetero_eiv
enum : int { hALPHA = 0, hBETA = 1, hGAMMA = 2, hMUX = 3, hSX2 = 4, hS2 = 5, hETA = 6 };

void require_nonnegative(double sigma_u2) {
    if (!(sigma_u2 >= 0.0) || !std::isfinite(sigma_u2)) {
        std::ostringstream msg;
        msg << "sigma_u2 must be a finite nonnegative number, got " << sigma_u2;
        throw InvalidConstant(msg.str());
    }
}

void check_covariate_index(int i, int len) {
    if (i < 0 || i >= len) {
        std::ostringstream msg;
        msg << "observation " << i << " requested but the captured covariate has length " << len;
        throw DimensionMismatch(msg.str());
    }
}

}  // namespace

ModelSpec simple_eiv(double sigma_u2) {
    require_nonnegative(sigma_u2);
    ModelSpec spec;
    spec.p = 5;
    spec.q = 2;
    spec.family = "eiv";
    spec.param_names = {"alpha", "beta", "mu_x", "sigma_x2", "sigma2"};
    spec.constants["sigma_u2"] = sigma_u2;

    spec.mean_fn = [](const Theta& th, int) {
        return Eigen::Vector2d(th[eALPHA] + th[eBETA] * th[eMUX], th[eMUX]);
    };
    spec.cov_fn = [sigma_u2](const Theta& th, int) {
        const double be = th[eBETA], sx2 = th[eSX2], s2 = th[eS2];
        Eigen::Matrix2d sg;
        sg << be * be * sx2 + s2, be * sx2, be * sx2, sx2 + sigma_u2;
        return sg;
    };
    spec.in_domain = [](const Theta& th) {
        return th.allFinite() && th[eSX2] > 0.0 && th[eS2] > 0.0;
    };
    spec.first_derivs = [](const Theta& th, DerivativeBundle& b) {
        const double be = th[eBETA], mx = th[eMUX], sx2 = th[eSX2];
        for (int i = 0; i < b.n; ++i) {
            b.dmu[eALPHA](0, i) = 1.0;
            b.dmu[eBETA](0, i) = mx;
            b.dmu[eMUX](0, i) = be;
            b.dmu[eMUX](1, i) = 1.0;
            blk(b.dsigma[eBETA], i, 2) << 2.0 * be * sx2, sx2, sx2, 0.0;
            blk(b.dsigma[eSX2], i, 2) << be * be, be, be, 1.0;
            blk(b.dsigma[eS2], i, 2) << 1.0, 0.0, 0.0, 0.0;
        }
    };
    spec.second_derivs = [](const Theta& th, DerivativeBundle& b) {
        const double be = th[eBETA], sx2 = th[eSX2];
        for (int i = 0; i < b.n; ++i) {
            b.d2mu_at(eBETA, eMUX)(0, i) = 1.0;
            b.d2mu_at(eMUX, eBETA)(0, i) = 1.0;
            blk(b.d2sigma_at(eBETA, eBETA), i, 2) << 2.0 * sx2, 0.0, 0.0, 0.0;
            blk(b.d2sigma_at(eBETA, eSX2), i, 2) << 2.0 * be, 1.0, 1.0, 0.0;
            blk(b.d2sigma_at(eSX2, eBETA), i, 2) << 2.0 * be, 1.0, 1.0, 0.0;
        }
    };
    return spec;
}

ModelSpec hetero_eiv(double sigma_u2, const Eigen::VectorXd& z) {
    require_nonnegative(sigma_u2);
    if (z.size() < 1) throw DimensionMismatch("hetero_eiv needs a nonempty covariate z");
    if (!z.allFinite()) throw DomainError("covariate z contains non-finite values");
    const int nz = static_cast<int>(z.size());

    ModelSpec spec;
    spec.p = 7;
    spec.q = 2;
    spec.family = "eiv-hetero";
    spec.param_names = {"alpha", "beta", "gamma", "mu_x", "sigma_x2", "sigma2", "eta"};
    spec.constants["sigma_u2"] = sigma_u2;

    spec.mean_fn = [z, nz](const Theta& th, int i) {
        check_covariate_index(i, nz);
        return Eigen::Vector2d(th[hALPHA] + th[hBETA] * th[hMUX] + std::exp(th[hGAMMA] * z[i]),
                               th[hMUX]);
    };
    spec.cov_fn = [sigma_u2, z, nz](const Theta& th, int i) {
        check_covariate_index(i, nz);
        const double be = th[hBETA], sx2 = th[hSX2], s2 = th[hS2];
        Eigen::Matrix2d sg;
        sg << be * be * sx2 + s2 * std::exp(th[hETA] * z[i]), be * sx2, be * sx2,
            sx2 + sigma_u2;
        return sg;
    };
    spec.in_domain = [](const Theta& th) {
        return th.allFinite() && th[hSX2] > 0.0 && th[hS2] > 0.0;
    };
    spec.first_derivs = [z, nz](const Theta& th, DerivativeBundle& b) {
        check_covariate_index(b.n - 1, nz);
        const double be = th[hBETA], mx = th[hMUX], sx2 = th[hSX2], s2 = th[hS2];
        for (int i = 0; i < b.n; ++i) {
            const double eg = std::exp(th[hGAMMA] * z[i]);
            const double ee = std::exp(th[hETA] * z[i]);
            b.dmu[hALPHA](0, i) = 1.0;
            b.dmu[hBETA](0, i) = mx;
            b.dmu[hGAMMA](0, i) = z[i] * eg;
            b.dmu[hMUX](0, i) = be;
            b.dmu[hMUX](1, i) = 1.0;
            blk(b.dsigma[hBETA], i, 2) << 2.0 * be * sx2, sx2, sx2, 0.0;
            blk(b.dsigma[hSX2], i, 2) << be * be, be, be, 1.0;
            blk(b.dsigma[hS2], i, 2) << ee, 0.0, 0.0, 0.0;
            blk(b.dsigma[hETA], i, 2) << z[i] * s2 * ee, 0.0, 0.0, 0.0;
        }
    };
    spec.second_derivs = [z, nz](const Theta& th, DerivativeBundle& b) {
        check_covariate_index(b.n - 1, nz);
        const double be = th[hBETA], sx2 = th[hSX2], s2 = th[hS2];
        for (int i = 0; i < b.n; ++i) {
            const double eg = std::exp(th[hGAMMA] * z[i]);
            const double ee = std::exp(th[hETA] * z[i]);
            b.d2mu_at(hBETA, hMUX)(0, i) = 1.0;
            b.d2mu_at(hMUX, hBETA)(0, i) = 1.0;
            b.d2mu_at(hGAMMA, hGAMMA)(0, i) = z[i] * z[i] * eg;
            blk(b.d2sigma_at(hBETA, hBETA), i, 2) << 2.0 * sx2, 0.0, 0.0, 0.0;
            blk(b.d2sigma_at(hBETA, hSX2), i, 2) << 2.0 * be, 1.0, 1.0, 0.0;
            blk(b.d2sigma_at(hSX2, hBETA), i, 2) << 2.0 * be, 1.0, 1.0, 0.0;
            blk(b.d2sigma_at(hS2, hETA), i, 2) << z[i] * ee, 0.0, 0.0, 0.0;
            blk(b.d2sigma_at(hETA, hS2), i, 2) << z[i] * ee, 0.0, 0.0, 0.0;
            blk(b.d2sigma_at(hETA, hETA), i, 2) << z[i] * z[i] * s2 * ee, 0.0, 0.0, 0.0;
        }
    };
    return spec;
}

ModelSpec univariate_nonlinear(UniMean mean, int n_beta, Theta start_hint) {
    if (!mean.value) throw UnsupportedModel("univariate_nonlinear needs a mean function");
    if (n_beta < 1) throw DimensionMismatch("univariate_nonlinear needs at least one mean parameter");
    if (start_hint.size() != 0 && start_hint.size() != n_beta) {
        throw DimensionMismatch("start_hint must cover exactly the mean parameters");
    }
    const int p = n_beta + 1;

    ModelSpec spec;
    spec.p = p;
    spec.q = 1;
    spec.family = "uninl";
    for (int r = 0; r < n_beta; ++r) spec.param_names.push_back("beta" + std::to_string(r + 1));
    spec.param_names.push_back("sigma2");
    spec.start_hint = std::move(start_hint);

    auto value = mean.value;
    spec.mean_fn = [value, n_beta](const Theta& th, int i) {
        Eigen::VectorXd mu(1);
        mu[0] = value(th.head(n_beta), i);
        return mu;
    };
    spec.cov_fn = [p](const Theta& th, int) {
        Eigen::MatrixXd sg(1, 1);
        sg(0, 0) = th[p - 1];
        return sg;
    };
    spec.in_domain = [p](const Theta& th) { return th.allFinite() && th[p - 1] > 0.0; };

    // the scale derivative is always exact; mean derivatives when supplied
    if (mean.grad) {
        auto grad = mean.grad;
        spec.first_derivs = [grad, n_beta, p](const Theta& th, DerivativeBundle& b) {
            for (int i = 0; i < b.n; ++i) {
                const Eigen::VectorXd g = grad(th.head(n_beta), i);
                for (int r = 0; r < n_beta; ++r) b.dmu[r](0, i) = g[r];
                b.dsigma[p - 1](0, i) = 1.0;
            }
        };
        if (mean.hess) {
            auto hess = mean.hess;
            spec.second_derivs = [hess, n_beta](const Theta& th, DerivativeBundle& b) {
                for (int i = 0; i < b.n; ++i) {
                    const Eigen::MatrixXd h = hess(th.head(n_beta), i);
                    for (int s = 0; s < n_beta; ++s)
                        for (int r = 0; r < n_beta; ++r) b.d2mu_at(s, r)(0, i) = h(s, r);
                }
            };
        }
    }
    return spec;
}

ModelSpec scaled_exponential(const Eigen::VectorXd& x) {
    if (x.size() < 1) throw DimensionMismatch("scaled_exponential needs a nonempty covariate x");
    if (!x.allFinite()) throw DomainError("covariate x contains non-finite values");
    const int nx = static_cast<int>(x.size());
    UniMean mean;
    mean.value = [x, nx](const Eigen::VectorXd& beta, int i) {
        check_covariate_index(i, nx);
        return beta[0] * std::exp(beta[1] * x[i]);
    };
    mean.grad = [x, nx](const Eigen::VectorXd& beta, int i) {
        check_covariate_index(i, nx);
        const double e = std::exp(beta[1] * x[i]);
        return Eigen::Vector2d(e, beta[0] * x[i] * e).eval();
    };
    mean.hess = [x, nx](const Eigen::VectorXd& beta, int i) {
        check_covariate_index(i, nx);
        const double e = std::exp(beta[1] * x[i]);
        Eigen::Matrix2d h;
        h << 0.0, x[i] * e, x[i] * e, beta[0] * x[i] * x[i] * e;
        return Eigen::MatrixXd(h);
    };
    Theta hint(2);
    hint << 1.0, 0.1;
    return univariate_nonlinear(std::move(mean), 2, hint);
}

}  // namespace mvnbc
