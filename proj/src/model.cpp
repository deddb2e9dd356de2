#include "mvnbc/model.hpp"

#include <cmath>
#include <sstream>

namespace mvnbc {

namespace {

// Relative finite-difference steps. First differences use the classic
// sqrt(eps)-scale step; plain second differences need a much larger step or
// roundoff dominates (error ~ eps / h^2).
constexpr double kFirstStep = 1e-6;
constexpr double kSecondStep = 2e-4;

double scaled_step(double base, double x) { return base * std::max(1.0, std::abs(x)); }

bool in_domain(const ModelSpec& spec, const Theta& theta) {
    if (!theta.allFinite()) return false;
    return !spec.in_domain || spec.in_domain(theta);
}

// Largest step h, h/2, h/4 or h/8 such that theta +- h e_r stays inside the
// model domain; DomainError if even h/8 leaves it.
double domain_step(const ModelSpec& spec, const Theta& theta, int r, double h) {
    for (int k = 0; k <= 3; ++k, h *= 0.5) {
        Theta up = theta, dn = theta;
        up[r] += h;
        dn[r] -= h;
        if (in_domain(spec, up) && in_domain(spec, dn)) return h;
    }
    std::ostringstream msg;
    msg << "finite-difference step for parameter " << r
        << " leaves the model domain even after three halvings";
    throw DomainError(msg.str());
}

DerivativeBundle make_bundle(const ModelSpec& spec, int n, int order) {
    DerivativeBundle b;
    b.p = spec.p;
    b.n = n;
    b.q = spec.q;
    b.has_second = (order >= 2);
    b.dmu.assign(spec.p, Eigen::MatrixXd::Zero(spec.q, n));
    b.dsigma.assign(spec.p, Eigen::MatrixXd::Zero(spec.q, n * spec.q));
    if (b.has_second) {
        b.d2mu.assign(spec.p * spec.p, Eigen::MatrixXd::Zero(spec.q, n));
        b.d2sigma.assign(spec.p * spec.p, Eigen::MatrixXd::Zero(spec.q, n * spec.q));
    }
    return b;
}

void fd_first(const ModelSpec& spec, const Theta& theta, int n, DerivativeBundle& out) {
    for (int r = 0; r < spec.p; ++r) {
        const double h = domain_step(spec, theta, r, scaled_step(kFirstStep, theta[r]));
        Theta up = theta, dn = theta;
        up[r] += h;
        dn[r] -= h;
        const Moments mp = evaluate_moments(spec, up, n);
        const Moments mm = evaluate_moments(spec, dn, n);
        out.dmu[r] = (mp.mu - mm.mu) / (2.0 * h);
        out.dsigma[r] = (mp.sigma - mm.sigma) / (2.0 * h);
    }
}

// Second derivatives by differencing the (analytic) first derivatives: one
// difference level, so the small first-difference step is appropriate.
void fd_second_from_first(const ModelSpec& spec, const Theta& theta, int n,
                          DerivativeBundle& out) {
    for (int s = 0; s < spec.p; ++s) {
        const double h = domain_step(spec, theta, s, scaled_step(kFirstStep, theta[s]));
        Theta up = theta, dn = theta;
        up[s] += h;
        dn[s] -= h;
        DerivativeBundle bp = make_bundle(spec, n, 1);
        DerivativeBundle bm = make_bundle(spec, n, 1);
        spec.first_derivs(up, bp);
        spec.first_derivs(dn, bm);
        for (int r = s; r < spec.p; ++r) {
            out.d2mu_at(s, r) = (bp.dmu[r] - bm.dmu[r]) / (2.0 * h);
            out.d2sigma_at(s, r) = (bp.dsigma[r] - bm.dsigma[r]) / (2.0 * h);
            if (r != s) {
                out.d2mu_at(r, s) = out.d2mu_at(s, r);
                out.d2sigma_at(r, s) = out.d2sigma_at(s, r);
            }
        }
    }
}

// Second derivatives directly from the moment functions: 3-point stencils on
// the diagonal, 4-point cross stencils off it.
void fd_second_direct(const ModelSpec& spec, const Theta& theta, int n, DerivativeBundle& out) {
    const Moments base = evaluate_moments(spec, theta, n);
    for (int s = 0; s < spec.p; ++s) {
        double hs = domain_step(spec, theta, s, scaled_step(kSecondStep, theta[s]));
        {
            Theta up = theta, dn = theta;
            up[s] += hs;
            dn[s] -= hs;
            const Moments mp = evaluate_moments(spec, up, n);
            const Moments mm = evaluate_moments(spec, dn, n);
            out.d2mu_at(s, s) = (mp.mu - 2.0 * base.mu + mm.mu) / (hs * hs);
            out.d2sigma_at(s, s) = (mp.sigma - 2.0 * base.sigma + mm.sigma) / (hs * hs);
        }
        for (int r = s + 1; r < spec.p; ++r) {
            double hr = domain_step(spec, theta, r, scaled_step(kSecondStep, theta[r]));
            // the four corners must also lie inside the domain
            int tries = 0;
            for (;; ++tries) {
                bool ok = true;
                for (int ds = -1; ds <= 1 && ok; ds += 2)
                    for (int dr = -1; dr <= 1 && ok; dr += 2) {
                        Theta t = theta;
                        t[s] += ds * hs;
                        t[r] += dr * hr;
                        ok = in_domain(spec, t);
                    }
                if (ok) break;
                if (tries == 3) {
                    std::ostringstream msg;
                    msg << "cross finite-difference step for parameters (" << s << "," << r
                        << ") leaves the model domain even after three halvings";
                    throw DomainError(msg.str());
                }
                hs *= 0.5;
                hr *= 0.5;
            }
            Eigen::MatrixXd mu_acc = Eigen::MatrixXd::Zero(spec.q, n);
            Eigen::MatrixXd sg_acc = Eigen::MatrixXd::Zero(spec.q, n * spec.q);
            for (int ds = -1; ds <= 1; ds += 2)
                for (int dr = -1; dr <= 1; dr += 2) {
                    Theta t = theta;
                    t[s] += ds * hs;
                    t[r] += dr * hr;
                    const double sign = ds * dr;
                    const Moments m = evaluate_moments(spec, t, n);
                    mu_acc += sign * m.mu;
                    sg_acc += sign * m.sigma;
                }
            out.d2mu_at(s, r) = mu_acc / (4.0 * hs * hr);
            out.d2sigma_at(s, r) = sg_acc / (4.0 * hs * hr);
            out.d2mu_at(r, s) = out.d2mu_at(s, r);
            out.d2sigma_at(r, s) = out.d2sigma_at(s, r);
        }
    }
}

double rel_err(const Eigen::MatrixXd& candidate, const Eigen::MatrixXd& reference) {
    const double scale = 1.0 + candidate.cwiseAbs().maxCoeff();
    return (candidate - reference).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

void check_theta(const ModelSpec& spec, const Theta& theta) {
    if (theta.size() != spec.p) {
        std::ostringstream msg;
        msg << "theta has length " << theta.size() << ", model has " << spec.p << " parameters";
        throw DimensionMismatch(msg.str());
    }
    if (!theta.allFinite()) throw DomainError("theta contains non-finite entries");
    if (spec.in_domain && !spec.in_domain(theta)) {
        throw DomainError("theta lies outside the model's parameter domain");
    }
}

Moments evaluate_moments(const ModelSpec& spec, const Theta& theta, int n) {
    check_theta(spec, theta);
    if (n < 1) throw DimensionMismatch("need at least one observation");
    const int q = spec.q;
    Moments m;
    m.mu.resize(q, n);
    m.sigma.resize(q, n * q);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd mu_i = spec.mean_fn(theta, i);
        if (mu_i.size() != q) {
            std::ostringstream msg;
            msg << "mean_fn returned length " << mu_i.size() << " for observation " << i
                << ", expected " << q;
            throw DimensionMismatch(msg.str());
        }
        const Eigen::MatrixXd sg_i = spec.cov_fn(theta, i);
        if (sg_i.rows() != q || sg_i.cols() != q) {
            std::ostringstream msg;
            msg << "cov_fn returned " << sg_i.rows() << "x" << sg_i.cols() << " for observation "
                << i << ", expected " << q << "x" << q;
            throw DimensionMismatch(msg.str());
        }
        m.mu.col(i) = mu_i;
        blk(m.sigma, i, q) = sg_i;
        Eigen::LLT<Eigen::MatrixXd> llt(sg_i);
        if (llt.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "covariance block for observation " << i << " is not positive definite";
            throw NonPositiveDefinite(i, msg.str());
        }
    }
    return m;
}

DerivativeBundle evaluate_derivatives(const ModelSpec& spec, const Theta& theta, int n,
                                      int order) {
    check_theta(spec, theta);
    if (n < 1) throw DimensionMismatch("need at least one observation");
    DerivativeBundle b = make_bundle(spec, n, order);
    if (spec.first_derivs) {
        spec.first_derivs(theta, b);
    } else {
        fd_first(spec, theta, n, b);
    }
    if (order >= 2) {
        if (spec.second_derivs) {
            spec.second_derivs(theta, b);
        } else if (spec.first_derivs) {
            fd_second_from_first(spec, theta, n, b);
        } else {
            fd_second_direct(spec, theta, n, b);
        }
    }
    return b;
}

ValidationReport validate_spec(const ModelSpec& spec, const Theta& theta, int n) {
    check_theta(spec, theta);
    ValidationReport report;
    auto flag = [&report](const std::string& where, double err, const std::string& msg) {
        report.violations.push_back({where, err, msg});
    };

    // covariance symmetry, checked on the raw cov_fn output
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd sg = spec.cov_fn(theta, i);
        const double err = rel_err(sg, sg.transpose().eval());
        if (err > 1e-10) {
            std::ostringstream msg;
            msg << "cov_fn output for observation " << i << " is asymmetric";
            flag("cov symmetry", err, msg.str());
            break;
        }
    }

    try {
        evaluate_moments(spec, theta, n);
    } catch (const NonPositiveDefinite& e) {
        flag("positive definiteness", 0.0, e.what());
        return report;  // derivative checks would throw the same way
    }

    const DerivativeBundle full = evaluate_derivatives(spec, theta, n, 2);

    // index symmetry of the second-derivative storage
    for (int s = 0; s < spec.p; ++s)
        for (int r = s + 1; r < spec.p; ++r) {
            const double em = rel_err(full.d2mu_at(s, r), full.d2mu_at(r, s));
            const double es = rel_err(full.d2sigma_at(s, r), full.d2sigma_at(r, s));
            if (em > 1e-12 || es > 1e-12) {
                std::ostringstream msg;
                msg << "second derivatives at (" << s << "," << r << ") and (" << r << "," << s
                    << ") disagree";
                flag("d2 symmetry", std::max(em, es), msg.str());
            }
        }

    const double tol = 1e-4;
    if (spec.first_derivs) {
        ModelSpec fd = spec;
        fd.first_derivs = nullptr;
        fd.second_derivs = nullptr;
        const DerivativeBundle ref = evaluate_derivatives(fd, theta, n, 1);
        for (int r = 0; r < spec.p; ++r) {
            double err = rel_err(full.dmu[r], ref.dmu[r]);
            if (err > tol) {
                std::ostringstream msg;
                msg << "analytic dmu[" << r << "] disagrees with finite differences";
                flag("dmu[" + std::to_string(r) + "]", err, msg.str());
            }
            err = rel_err(full.dsigma[r], ref.dsigma[r]);
            if (err > tol) {
                std::ostringstream msg;
                msg << "analytic dsigma[" << r << "] disagrees with finite differences";
                flag("dsigma[" + std::to_string(r) + "]", err, msg.str());
            }
        }
    }
    if (spec.second_derivs) {
        ModelSpec fd = spec;
        fd.second_derivs = nullptr;
        const DerivativeBundle ref = evaluate_derivatives(fd, theta, n, 2);
        for (int s = 0; s < spec.p; ++s)
            for (int r = s; r < spec.p; ++r) {
                double err = rel_err(full.d2mu_at(s, r), ref.d2mu_at(s, r));
                if (err > tol) {
                    std::ostringstream msg;
                    msg << "analytic d2mu(" << s << "," << r << ") disagrees with finite differences";
                    flag("d2mu(" + std::to_string(s) + "," + std::to_string(r) + ")", err,
                         msg.str());
                }
                err = rel_err(full.d2sigma_at(s, r), ref.d2sigma_at(s, r));
                if (err > tol) {
                    std::ostringstream msg;
                    msg << "analytic d2sigma(" << s << "," << r
                        << ") disagrees with finite differences";
                    flag("d2sigma(" + std::to_string(s) + "," + std::to_string(r) + ")", err,
                         msg.str());
                }
            }
    }
    return report;
}

}  // namespace mvnbc
