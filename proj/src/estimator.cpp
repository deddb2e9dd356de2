#include "mvnbc/estimator.hpp"

#include <cmath>
#include <sstream>

namespace mvnbc {

namespace {

double column_mean(const Eigen::MatrixXd& y, int c) { return y.col(c).mean(); }

double column_var(const Eigen::MatrixXd& y, int c) {
    const double m = y.col(c).mean();
    return (y.col(c).array() - m).square().mean();  // 1/n divisor
}

double column_cov(const Eigen::MatrixXd& y, int a, int b) {
    const double ma = y.col(a).mean(), mb = y.col(b).mean();
    return ((y.col(a).array() - ma) * (y.col(b).array() - mb)).mean();
}

double require_constant(const ModelSpec& spec, const std::string& name) {
    const auto it = spec.constants.find(name);
    if (it == spec.constants.end()) {
        throw InvalidConstant("model constant '" + name + "' is not set");
    }
    return it->second;
}

// Method-of-moments start for the errors-in-variables families. The response
// is column 0, the observed covariate column 1.
Theta eiv_start(const ModelSpec& spec, const Dataset& data, bool hetero) {
    if (data.q() != 2) throw DimensionMismatch("errors-in-variables data must have q = 2");
    const double su2 = require_constant(spec, "sigma_u2");
    const double xbar = column_mean(data.y, 1);
    const double vx = column_var(data.y, 1);
    const double vy = column_var(data.y, 0);
    const double sx2 = std::max(vx - su2, 0.1 * vx);
    const double beta = column_cov(data.y, 1, 0) / sx2;
    const double s2 = std::max(vy - beta * beta * sx2, 0.1 * vy);
    if (!hetero) {
        Theta th(5);
        th << column_mean(data.y, 0) - beta * xbar, beta, xbar, sx2, s2;
        return th;
    }
    // mean carries an extra exp(gamma z) term; at gamma = 0 it is the constant 1
    Theta th(7);
    th << column_mean(data.y, 0) - beta * xbar - 1.0, beta, 0.0, xbar, sx2, s2, 0.0;
    return th;
}

// One Gauss-Newton step from the hinted mean parameters, residual variance as
// the scale start.
Theta uninl_start(const ModelSpec& spec, const Dataset& data) {
    if (data.q() != 1) throw DimensionMismatch("univariate nonlinear data must have q = 1");
    const int n = data.n();
    const int pb = spec.p - 1;
    Theta base(spec.p);
    if (spec.start_hint.size() == pb) {
        base.head(pb) = spec.start_hint;
    } else if (spec.start_hint.size() == 0) {
        base.head(pb).setOnes();
    } else {
        throw DimensionMismatch("start_hint must cover the mean parameters");
    }
    base[pb] = 1.0;

    const Moments m0 = evaluate_moments(spec, base, n);
    const DerivativeBundle b = evaluate_derivatives(spec, base, n, 1);
    Eigen::MatrixXd jac(n, pb);
    for (int r = 0; r < pb; ++r) jac.col(r) = b.dmu[r].row(0).transpose();
    const Eigen::VectorXd resid = data.y.col(0) - m0.mu.row(0).transpose();
    const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(resid);

    Theta th(spec.p);
    th.head(pb) = base.head(pb) + delta;
    th[pb] = 1.0;  // scale slot does not influence the mean
    double rss = resid.squaredNorm();
    try {
        const Moments m1 = evaluate_moments(spec, th, n);
        rss = (data.y.col(0) - m1.mu.row(0).transpose()).squaredNorm();
    } catch (const Error&) {
        th.head(pb) = base.head(pb);  // Gauss-Newton overshot; keep the hint
    }
    th[pb] = std::max(rss / n, 1e-8 * (1.0 + column_var(data.y, 0)));
    return th;
}

}  // namespace

Theta auto_start(const ModelSpec& spec, const Dataset& data) {
    if (data.n() < 1) throw DimensionMismatch("need at least one observation");
    if (spec.family == "eiv") return eiv_start(spec, data, false);
    if (spec.family == "eiv-hetero") return eiv_start(spec, data, true);
    if (spec.family == "uninl") return uninl_start(spec, data);
    if (spec.start_hint.size() == spec.p) return spec.start_hint;
    throw UnsupportedModel("no automatic starting values for family '" + spec.family + "'");
}

FitResult fit(const ModelSpec& spec, const Dataset& data, const FitOptions& opts) {
    Theta theta = opts.start ? *opts.start : auto_start(spec, data);
    check_theta(spec, theta);
    const int n = data.n();

    std::vector<IterationRecord> trace;
    const auto admissible = [&](const Theta& cand, double& ll_out) {
        if (!cand.allFinite()) return false;
        if (spec.in_domain && !spec.in_domain(cand)) return false;
        try {
            ll_out = log_likelihood(build_score_system(spec, cand, data));
        } catch (const NonPositiveDefinite&) {
            return false;
        } catch (const DomainError&) {
            return false;
        }
        return true;
    };

    const auto finish = [&](const Theta& th, int iters) {
        FitResult res;
        res.theta_hat = th;
        const ScoreSystem sys = build_score_system(spec, th, data);
        const DerivativeBundle bun = evaluate_derivatives(spec, th, n, 1);
        res.information = fisher_information(sys, bun);
        Eigen::LLT<Eigen::MatrixXd> llt(res.information);
        if (llt.info() != Eigen::Success) {
            throw SingularInformation("expected information is singular at the estimate");
        }
        res.cov = llt.solve(Eigen::MatrixXd::Identity(spec.p, spec.p));
        res.std_errors = res.cov.diagonal().cwiseSqrt();
        res.loglik = log_likelihood(sys);
        res.iterations = iters;
        res.converged = true;
        res.trace = std::move(trace);
        return res;
    };

    for (int it = 1; it <= opts.max_iter; ++it) {
        const ScoreSystem sys = build_score_system(spec, theta, data);
        const DerivativeBundle bun = evaluate_derivatives(spec, theta, n, 1);
        const double ll = log_likelihood(sys);
        const Eigen::VectorXd u = score(sys, bun);
        const Eigen::MatrixXd k = fisher_information(sys, bun);
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) {
            throw SingularInformation("expected information is singular during scoring");
        }
        const Eigen::VectorXd step = llt.solve(u);
        trace.push_back({theta, ll, u.lpNorm<Eigen::Infinity>(), step.norm()});

        if (u.lpNorm<Eigen::Infinity>() <= opts.tol_score * n &&
            step.norm() <= opts.tol_param * (1.0 + theta.norm())) {
            // converged; take the final (tiny) full step when it is admissible
            double ll_last = 0.0;
            Theta polished = theta + step;
            if (admissible(polished, ll_last)) theta = polished;
            return finish(theta, it);
        }

        bool accepted = false;
        double lambda = 1.0;
        for (int h = 0; h <= opts.step_halving_max; ++h, lambda *= 0.5) {
            const Theta cand = theta + lambda * step;
            double ll_new = 0.0;
            if (!admissible(cand, ll_new)) continue;
            if (ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
                theta = cand;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            std::ostringstream msg;
            msg << "no admissible scoring step after " << opts.step_halving_max
                << " halvings at iteration " << it;
            throw NoConvergence(msg.str(), std::move(trace));
        }
    }
    std::ostringstream msg;
    msg << "scoring did not converge within " << opts.max_iter << " iterations";
    throw NoConvergence(msg.str(), std::move(trace));
}

}  // namespace mvnbc
