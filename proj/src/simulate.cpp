#include "mvnbc/simulate.hpp"

#include "mvnbc/bias.hpp"
#include "mvnbc/builtin.hpp"
#include "mvnbc/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

namespace mvnbc {

namespace {

using nlohmann::json;

Eigen::VectorXd even_grid(int n) {
    Eigen::VectorXd z(n);
    if (n == 1) {
        z[0] = 0.0;
        return z;
    }
    for (int i = 0; i < n; ++i) z[i] = -1.0 + 2.0 * i / (n - 1.0);
    return z;
}

ModelSpec make_study_model(const SimDesign& d, int n) {
    const auto it = d.constants.find("sigma_u2");
    if (it == d.constants.end()) {
        throw ConfigError("study design for model '" + d.model + "' needs constant sigma_u2");
    }
    if (d.model == "eiv") return simple_eiv(it->second);
    if (d.model == "eiv-hetero") return hetero_eiv(it->second, even_grid(n));
    throw UnsupportedModel("study design supports models 'eiv' and 'eiv-hetero', got '" +
                           d.model + "'");
}

int expected_p(const std::string& model) { return model == "eiv-hetero" ? 7 : 5; }

}  // namespace

SimDesign parse_design(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("design is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("design must be a JSON object");

    SimDesign d;
    try {
        d.model = j.at("model").get<std::string>();
        if (j.contains("constants")) {
            for (const auto& [k, v] : j.at("constants").items()) {
                d.constants[k] = v.get<double>();
            }
        }
        const auto th = j.at("theta").get<std::vector<double>>();
        d.theta_true = Eigen::Map<const Eigen::VectorXd>(th.data(),
                                                         static_cast<Eigen::Index>(th.size()));
        d.sample_sizes = j.at("sample_sizes").get<std::vector<int>>();
        d.replications = j.value("replications", 2000);
        d.seed = j.value("seed", std::uint64_t{0});
        d.workers = j.value("workers", 1);
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            d.fit_options.max_iter = f.value("max_iter", d.fit_options.max_iter);
            d.fit_options.tol_param = f.value("tol_param", d.fit_options.tol_param);
            d.fit_options.tol_score = f.value("tol_score", d.fit_options.tol_score);
            d.fit_options.step_halving_max =
                f.value("step_halving_max", d.fit_options.step_halving_max);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed design: ") + e.what());
    }

    if (d.model != "eiv" && d.model != "eiv-hetero") {
        throw ConfigError("design model must be 'eiv' or 'eiv-hetero', got '" + d.model + "'");
    }
    if (d.constants.find("sigma_u2") == d.constants.end()) {
        throw ConfigError("design for model '" + d.model + "' needs constant sigma_u2");
    }
    if (d.theta_true.size() != expected_p(d.model)) {
        std::ostringstream msg;
        msg << "model '" << d.model << "' has " << expected_p(d.model)
            << " parameters, design theta has " << d.theta_true.size();
        throw ConfigError(msg.str());
    }
    for (Eigen::Index r = 0; r < d.theta_true.size(); ++r) {
        if (d.theta_true[r] == 0.0) {
            std::ostringstream msg;
            msg << "theta[" << r << "] is zero; relative bias would be undefined";
            throw ConfigError(msg.str());
        }
    }
    if (d.sample_sizes.empty()) throw ConfigError("sample_sizes must be nonempty");
    for (int n : d.sample_sizes) {
        if (n < 2) throw ConfigError("every sample size must be at least 2");
    }
    if (d.replications < 1) throw ConfigError("replications must be positive");
    if (d.workers < 1 || d.workers > 256) throw ConfigError("workers must be in [1, 256]");
    return d;
}

Dataset simulate_dataset(const ModelSpec& spec, const Theta& theta, int n, Rng& rng) {
    const Moments m = evaluate_moments(spec, theta, n);
    const int q = spec.q;
    Dataset data;
    data.y.resize(n, q);
    Eigen::VectorXd zvec(q);
    for (int i = 0; i < n; ++i) {
        Eigen::LLT<Eigen::MatrixXd> llt(blk(m.sigma, i, q));
        for (int j = 0; j < q; ++j) zvec[j] = rng.normal();
        data.y.row(i) =
            (m.mu.col(i) + llt.matrixL() * zvec).transpose();
    }
    return data;
}

SimResult run_study(const SimDesign& design) {
    const int R = design.replications;
    SimResult result;

    for (int n : design.sample_sizes) {
        const ModelSpec spec = make_study_model(design, n);
        const int p = spec.p;

        Eigen::MatrixXd mle(R, p), bce(R, p);
        std::vector<std::uint8_t> failed(static_cast<size_t>(R), 0);

        const int workers = std::max(1, std::min({design.workers, R}));
        const auto run_range = [&](int lo, int hi) {
            for (int rep = lo; rep < hi; ++rep) {
                Rng rng = Rng::stream(design.seed, static_cast<std::uint64_t>(n),
                                      static_cast<std::uint64_t>(rep));
                try {
                    const Dataset data = simulate_dataset(spec, design.theta_true, n, rng);
                    const auto [fr, br] = corrected_fit(spec, data, design.fit_options);
                    mle.row(rep) = fr.theta_hat.transpose();
                    bce.row(rep) = br.theta_tilde.transpose();
                } catch (const Error&) {
                    failed[rep] = 1;
                }
            }
        };

        if (workers == 1) {
            run_range(0, R);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(workers);
            const int chunk = (R + workers - 1) / workers;
            for (int w = 0; w < workers; ++w) {
                const int lo = w * chunk;
                const int hi = std::min(R, lo + chunk);
                pool.emplace_back([&, w, lo, hi] {
                    try {
                        run_range(lo, hi);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            for (auto& t : pool) t.join();
            for (const auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
        }

        int n_failed = 0;
        for (std::uint8_t f : failed) n_failed += f;
        if (10 * n_failed > R) {
            std::ostringstream msg;
            msg << n_failed << " of " << R << " replications failed at sample size " << n
                << " (ceiling is 10%)";
            throw TooManyFailures(n, n_failed, msg.str());
        }
        const int ok = R - n_failed;

        for (int r = 0; r < p; ++r) {
            const double truth = design.theta_true[r];
            for (int which = 0; which < 2; ++which) {
                const Eigen::MatrixXd& est = (which == 0) ? mle : bce;
                double sum = 0.0, sumsq_err = 0.0;
                for (int rep = 0; rep < R; ++rep) {
                    if (failed[rep]) continue;
                    const double v = est(rep, r);
                    sum += v;
                    sumsq_err += (v - truth) * (v - truth);
                }
                const double mean = sum / ok;
                double var = 0.0;
                for (int rep = 0; rep < R; ++rep) {
                    if (failed[rep]) continue;
                    var += (est(rep, r) - mean) * (est(rep, r) - mean);
                }
                var = (ok > 1) ? var / (ok - 1) : 0.0;

                SimCell cell;
                cell.n = n;
                cell.parameter = spec.param_names[r];
                cell.estimator = (which == 0) ? "mle" : "bce";
                cell.rel_bias = (mean - truth) / truth;
                cell.rmse = std::sqrt(sumsq_err / ok);
                cell.mc_std_error = std::sqrt(var / ok) / std::abs(truth);
                cell.n_failed = n_failed;
                result.cells.push_back(std::move(cell));
            }
        }
    }
    return result;
}

std::string to_csv(const SimResult& result) {
    std::string out = "n,parameter,estimator,rel_bias,rmse,mc_std_error,n_failed\n";
    for (const SimCell& c : result.cells) {
        out += std::to_string(c.n);
        out += ',';
        out += c.parameter;
        out += ',';
        out += c.estimator;
        out += ',';
        out += format_double(c.rel_bias);
        out += ',';
        out += format_double(c.rmse);
        out += ',';
        out += format_double(c.mc_std_error);
        out += ',';
        out += std::to_string(c.n_failed);
        out += '\n';
    }
    return out;
}

std::string to_text(const SimResult& result) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%6s  %-10s  %-4s  %12s  %12s  %12s  %8s\n", "n",
                  "parameter", "est", "rel_bias", "rmse", "mc_se", "failed");
    out << line;
    for (const SimCell& c : result.cells) {
        std::snprintf(line, sizeof(line), "%6d  %-10s  %-4s  %12.4f  %12.4f  %12.4f  %8d\n", c.n,
                      c.parameter.c_str(), c.estimator.c_str(), c.rel_bias, c.rmse,
                      c.mc_std_error, c.n_failed);
        out << line;
    }
    return out.str();
}

SimResult parse_summary_csv(const std::string& text) {
    const std::vector<std::string> lines = csv_lines(text);
    if (lines.empty()) throw CsvError(1, 0, "missing header line");
    const std::vector<std::string> header = csv_fields(lines[0]);
    const std::vector<std::string> expected = {"n",    "parameter",    "estimator", "rel_bias",
                                               "rmse", "mc_std_error", "n_failed"};
    if (header != expected) throw CsvError(1, 0, "unexpected summary header");

    const auto num = [](const std::string& f, int lineno, int colno) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc{} || ptr != f.data() + f.size()) {
            std::ostringstream msg;
            msg << "line " << lineno << ", column " << colno << ": cannot parse '" << f << "'";
            throw CsvError(lineno, colno, msg.str());
        }
        return v;
    };

    SimResult result;
    for (size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty() && li + 1 == lines.size()) break;
        const int lineno = static_cast<int>(li + 1);
        const std::vector<std::string> f = csv_fields(lines[li]);
        if (f.size() != expected.size()) {
            throw CsvError(lineno, 0, "summary record has the wrong number of fields");
        }
        SimCell c;
        c.n = static_cast<int>(num(f[0], lineno, 1));
        c.parameter = f[1];
        c.estimator = f[2];
        c.rel_bias = num(f[3], lineno, 4);
        c.rmse = num(f[4], lineno, 5);
        c.mc_std_error = num(f[5], lineno, 6);
        c.n_failed = static_cast<int>(num(f[6], lineno, 7));
        result.cells.push_back(std::move(c));
    }
    return result;
}

}  // namespace mvnbc
