#include "mvnbc/bias.hpp"
#include "mvnbc/builtin.hpp"
#include "mvnbc/csv.hpp"
#include "mvnbc/estimator.hpp"
#include "mvnbc/likelihood.hpp"
#include "mvnbc/report.hpp"
#include "mvnbc/rng.hpp"
#include "mvnbc/simulate.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace mvnbc;

// exit codes: 0 ok, 2 parse/usage, 3 no convergence, 4 singular information,
// 5 simulation failure ceiling, 6 derivative check failure

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, ',')) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cur.data(), cur.data() + cur.size(), v);
        if (ec != std::errc{} || ptr != cur.data() + cur.size()) {
            throw ConfigError("cannot parse '" + cur + "' as a number in '" + text + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("expected a comma-separated list of numbers");
    return out;
}

std::map<std::string, double> parse_constants(const std::vector<std::string>& items) {
    std::map<std::string, double> out;
    for (const std::string& item : items) {
        const size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("constants take the form name=value, got '" + item + "'");
        }
        const std::string name = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
        if (ec != std::errc{} || ptr != val.data() + val.size()) {
            throw ConfigError("cannot parse constant '" + item + "'");
        }
        out[name] = v;
    }
    return out;
}

double constant_or(const std::map<std::string, double>& constants, const std::string& name,
                   const double* fallback) {
    const auto it = constants.find(name);
    if (it != constants.end()) return it->second;
    if (fallback) return *fallback;
    throw InvalidConstant("model constant '" + name + "' is required (pass --const " + name +
                          "=VALUE)");
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw Error("failed while writing '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Eigen::VectorXd covariate_from_file(const std::string& path, const std::string& column) {
    const CsvTable t = read_csv(path);
    const int c = t.require_col(column);
    return t.values.col(c);
}

Eigen::VectorXd even_grid(int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = (n == 1) ? lo : lo + (hi - lo) * i / (n - 1.0);
    return v;
}

struct LoadedModel {
    ModelSpec spec;
    Dataset data;
};

// Builds the named model and the dataset it fits from one strict CSV table.
LoadedModel model_from_table(const std::string& model, const CsvTable& t,
                             const std::map<std::string, double>& constants) {
    if (t.values.rows() < 1) throw CsvError(2, 0, "the table has no data rows");
    LoadedModel lm;
    if (model == "eiv" || model == "eiv-hetero") {
        const int iy = t.require_col("Y");
        const int ix = t.require_col("X");
        lm.data.y.resize(t.values.rows(), 2);
        lm.data.y.col(0) = t.values.col(iy);
        lm.data.y.col(1) = t.values.col(ix);
        const double su2 = constant_or(constants, "sigma_u2", nullptr);
        if (model == "eiv") {
            lm.spec = simple_eiv(su2);
        } else {
            lm.spec = hetero_eiv(su2, t.values.col(t.require_col("z")));
        }
    } else if (model == "uninl") {
        const int iy = t.require_col("Y");
        const int ix = t.require_col("X");
        lm.data.y = t.values.col(iy);
        lm.spec = scaled_exponential(t.values.col(ix));
    } else {
        throw UnsupportedModel("unknown model '" + model +
                               "' (available: eiv, eiv-hetero, uninl)");
    }
    return lm;
}

// Model for check-derivs: no response data needed to construct it, only the
// covariate (given or a default grid).
ModelSpec model_for_check(const std::string& model, int n,
                          const std::map<std::string, double>& constants,
                          const std::string& z_file) {
    const double one = 1.0;
    if (model == "eiv") {
        return simple_eiv(constant_or(constants, "sigma_u2", &one));
    }
    if (model == "eiv-hetero") {
        const Eigen::VectorXd z =
            z_file.empty() ? even_grid(n, -1.0, 1.0) : covariate_from_file(z_file, "z");
        return hetero_eiv(constant_or(constants, "sigma_u2", &one), z);
    }
    if (model == "uninl") {
        const Eigen::VectorXd x =
            z_file.empty() ? even_grid(n, 0.1, 2.0) : covariate_from_file(z_file, "X");
        return scaled_exponential(x);
    }
    throw UnsupportedModel("unknown model '" + model + "' (available: eiv, eiv-hetero, uninl)");
}

void bump(double& v) { v += 1e-2 * (1.0 + std::abs(v)); }

// Test hook: corrupt one analytic derivative so the self-check must fail.
// Slot forms: dmu[r], dsigma[r], d2mu(s,r), d2sigma(s,r).
void inject_error(ModelSpec& spec, const std::string& slot) {
    int s = -1, r = -1;
    char kind[16] = {0};
    if (std::sscanf(slot.c_str(), "d2%9[a-z](%d,%d)", kind, &s, &r) == 3) {
        if (!spec.second_derivs) {
            throw ConfigError("inject-error needs an analytic second-derivative supplier");
        }
        const bool mu = std::string(kind) == "mu";
        if (!mu && std::string(kind) != "sigma") throw ConfigError("bad slot '" + slot + "'");
        auto orig = spec.second_derivs;
        spec.second_derivs = [orig, mu, s, r](const Theta& th, DerivativeBundle& b) {
            orig(th, b);
            if (s < 0 || s >= b.p || r < 0 || r >= b.p) {
                throw ConfigError("inject-error slot index out of range");
            }
            bump(mu ? b.d2mu_at(s, r)(0, 0) : b.d2sigma_at(s, r)(0, 0));
        };
        return;
    }
    if (std::sscanf(slot.c_str(), "d%9[a-z][%d]", kind, &r) == 2) {
        if (!spec.first_derivs) {
            throw ConfigError("inject-error needs an analytic first-derivative supplier");
        }
        const bool mu = std::string(kind) == "mu";
        if (!mu && std::string(kind) != "sigma") throw ConfigError("bad slot '" + slot + "'");
        auto orig = spec.first_derivs;
        spec.first_derivs = [orig, mu, r](const Theta& th, DerivativeBundle& b) {
            orig(th, b);
            if (r < 0 || r >= b.p) throw ConfigError("inject-error slot index out of range");
            bump(mu ? b.dmu[r](0, 0) : b.dsigma[r](0, 0));
        };
        return;
    }
    throw ConfigError("bad inject-error slot '" + slot +
                      "' (forms: dmu[r], dsigma[r], d2mu(s,r), d2sigma(s,r))");
}

Eigen::VectorXd numerical_score(const ModelSpec& spec, const Theta& theta, const Dataset& data) {
    Eigen::VectorXd g(spec.p);
    for (int ridx = 0; ridx < spec.p; ++ridx) {
        double h = 1e-5 * std::max(1.0, std::abs(theta[ridx]));
        bool ok = false;
        for (int k = 0; k <= 3; ++k, h *= 0.5) {
            Theta up = theta, dn = theta;
            up[ridx] += h;
            dn[ridx] -= h;
            if (spec.in_domain && !(spec.in_domain(up) && spec.in_domain(dn))) continue;
            g[ridx] = (log_likelihood(spec, up, data) - log_likelihood(spec, dn, data)) /
                      (2.0 * h);
            ok = true;
            break;
        }
        if (!ok) throw DomainError("numerical score step leaves the domain");
    }
    return g;
}

int cmd_fit(const std::string& model, const std::vector<std::string>& const_items,
            const std::string& data_path, const std::string& out_path,
            const std::string& format, const std::string& plot_path,
            const std::string& start_list, int max_iter) {
    const std::map<std::string, double> constants = parse_constants(const_items);
    LoadedModel lm = model_from_table(model, read_csv(data_path), constants);

    FitOptions opts;
    opts.max_iter = max_iter;
    if (!start_list.empty()) {
        const std::vector<double> v = parse_number_list(start_list);
        if (static_cast<int>(v.size()) != lm.spec.p) {
            std::ostringstream msg;
            msg << "--start has " << v.size() << " values, model '" << model << "' has "
                << lm.spec.p << " parameters";
            throw ConfigError(msg.str());
        }
        opts.start = Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                       static_cast<Eigen::Index>(v.size()));
    }

    const auto [fr, br] = corrected_fit(lm.spec, lm.data, opts);
    FitReport report;
    report.model = model;
    report.constants = lm.spec.constants;
    report.n = lm.data.n();
    report.names = lm.spec.param_names;
    report.fit = fr;
    report.bias = br;

    std::string content;
    if (format == "json") {
        content = to_json(report);
    } else if (format == "text") {
        content = to_text(report);
    } else if (format == "csv") {
        content = to_csv(report);
    } else {
        throw ConfigError("unknown format '" + format + "' (json, text, csv)");
    }
    write_output(out_path, content);
    if (!plot_path.empty()) write_plot(report, lm.data, plot_path);
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& format, int workers_override) {
    SimDesign design = parse_design(read_file(config_path));
    if (workers_override > 0) design.workers = workers_override;
    const SimResult result = run_study(design);
    if (format == "csv") {
        write_output(out_path, to_csv(result));
    } else if (format == "text") {
        write_output(out_path, to_text(result));
    } else {
        throw ConfigError("unknown format '" + format + "' (csv, text)");
    }
    return 0;
}

int cmd_check_derivs(const std::string& model, const std::string& theta_list, int n,
                     const std::vector<std::string>& const_items, const std::string& z_file,
                     const std::string& inject_slot) {
    const std::map<std::string, double> constants = parse_constants(const_items);
    ModelSpec spec = model_for_check(model, n, constants, z_file);
    const std::vector<double> v = parse_number_list(theta_list);
    if (static_cast<int>(v.size()) != spec.p) {
        std::ostringstream msg;
        msg << "--theta has " << v.size() << " values, model '" << model << "' has " << spec.p
            << " parameters";
        throw ConfigError(msg.str());
    }
    const Theta theta =
        Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    check_theta(spec, theta);
    if (!inject_slot.empty()) inject_error(spec, inject_slot);

    bool ok = true;
    const ValidationReport report = validate_spec(spec, theta, n);
    if (report.ok()) {
        std::printf("model structure (symmetry, positive definiteness, analytic vs numerical "
                    "derivatives): ok\n");
    } else {
        ok = false;
        for (const Violation& viol : report.violations) {
            std::printf("FAIL %s: %s (rel err %.3e)\n", viol.where.c_str(),
                        viol.message.c_str(), viol.max_rel_err);
        }
    }

    // score against a numerical gradient of the log-likelihood on synthetic data
    Rng rng = Rng::stream(1, static_cast<std::uint64_t>(n), 0);
    const Dataset data = simulate_dataset(spec, theta, n, rng);
    const Eigen::VectorXd u = score(spec, theta, data);
    const Eigen::VectorXd u_fd = numerical_score(spec, theta, data);
    const double rel =
        (u - u_fd).lpNorm<Eigen::Infinity>() / (1.0 + u.lpNorm<Eigen::Infinity>());
    if (rel <= 1e-5) {
        std::printf("score vs numerical gradient: max rel err %.3e ok\n", rel);
    } else {
        ok = false;
        std::printf("FAIL score vs numerical gradient: max rel err %.3e\n", rel);
    }
    return ok ? 0 : 6;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NoConvergence*>(&e)) return 3;
    if (dynamic_cast<const SingularInformation*>(&e)) return 4;
    if (dynamic_cast<const TooManyFailures*>(&e)) return 5;
    if (dynamic_cast<const NonPositiveDefinite*>(&e)) return 3;
    if (dynamic_cast<const Error*>(&e)) return 2;  // parse, config, dimensions, domain
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maximum likelihood with second-order bias correction for multivariate normal "
                 "models whose mean and covariance share parameters"};
    app.require_subcommand(1);

    // fit
    std::string fit_model, fit_data, fit_out, fit_format = "json", fit_plot, fit_start;
    std::vector<std::string> fit_consts;
    int fit_max_iter = 200;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a model and report corrected estimates");
    fit_cmd->add_option("--model", fit_model, "eiv | eiv-hetero | uninl")->required();
    fit_cmd->add_option("--data", fit_data, "CSV with named columns (eiv: Y,X; eiv-hetero: Y,X,z; uninl: Y,X)")
        ->required();
    fit_cmd->add_option("--const", fit_consts, "model constant name=value (repeatable)");
    fit_cmd->add_option("--out", fit_out, "output path (default: stdout)");
    fit_cmd->add_option("--format", fit_format, "json | text | csv (default json)");
    fit_cmd->add_option("--emit-plot", fit_plot,
                        "write an SVG scatter with fitted lines (plus a sibling .csv)");
    fit_cmd->add_option("--start", fit_start, "starting theta as a comma-separated list");
    fit_cmd->add_option("--max-iter", fit_max_iter, "scoring iteration cap (default 200)");

    // simulate
    std::string sim_config, sim_out, sim_format = "csv";
    int sim_workers = 0;
    CLI::App* sim_cmd =
        app.add_subcommand("simulate", "replicated bias-correction study from a JSON design");
    sim_cmd->add_option("--config", sim_config, "JSON design file")->required();
    sim_cmd->add_option("--out", sim_out, "output path (default: stdout)");
    sim_cmd->add_option("--format", sim_format, "csv | text (default csv)");
    sim_cmd->add_option("--workers", sim_workers, "worker threads (overrides the design)");

    // check-derivs
    std::string chk_model, chk_theta, chk_zfile, chk_inject;
    std::vector<std::string> chk_consts;
    int chk_n = 7;
    CLI::App* chk_cmd = app.add_subcommand(
        "check-derivs", "verify analytic derivatives and the score at one theta");
    chk_cmd->add_option("--model", chk_model, "eiv | eiv-hetero | uninl")->required();
    chk_cmd->add_option("--theta", chk_theta, "evaluation point, comma-separated")->required();
    chk_cmd->add_option("--n", chk_n, "number of synthetic observations (default 7)");
    chk_cmd->add_option("--const", chk_consts,
                        "model constant name=value (sigma_u2 defaults to 1 here)");
    chk_cmd->add_option("--z-file", chk_zfile,
                        "CSV with the covariate column (z for eiv-hetero, X for uninl)");
    chk_cmd->add_option("--inject-error", chk_inject, "corrupt one derivative slot (testing)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_model, fit_consts, fit_data, fit_out, fit_format, fit_plot,
                           fit_start, fit_max_iter);
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(sim_config, sim_out, sim_format, sim_workers);
        }
        if (chk_cmd->parsed()) {
            return cmd_check_derivs(chk_model, chk_theta, chk_n, chk_consts, chk_zfile,
                                    chk_inject);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 2;
}
