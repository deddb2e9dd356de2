#include "mvnbc/report.hpp"

#include "mvnbc/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvnbc {

namespace {

using nlohmann::json;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw Error("failed while writing '" + path + "'");
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string to_json(const FitReport& report) {
    json j;
    j["model"] = report.model;
    j["n"] = report.n;
    j["constants"] = report.constants;
    j["converged"] = report.fit.converged;
    j["iterations"] = report.fit.iterations;
    j["loglik"] = report.fit.loglik;
    j["condition_number"] = report.bias.cond_information;
    j["bias_method"] = report.bias.method;
    j["parameters"] = json::array();
    for (size_t r = 0; r < report.names.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        j["parameters"].push_back({{"name", report.names[r]},
                                   {"estimate", report.fit.theta_hat[ri]},
                                   {"std_error", report.fit.std_errors[ri]},
                                   {"bias", report.bias.bias[ri]},
                                   {"corrected", report.bias.theta_tilde[ri]}});
    }
    return j.dump(2) + "\n";
}

std::string to_text(const FitReport& report) {
    std::ostringstream out;
    char line[200];
    std::snprintf(line, sizeof(line), "model: %s   observations: %d   converged in %d iterations\n",
                  report.model.c_str(), report.n, report.fit.iterations);
    out << line;
    std::snprintf(line, sizeof(line), "log-likelihood: %.4f\n\n", report.fit.loglik);
    out << line;
    std::snprintf(line, sizeof(line), "%-12s %12s %12s %12s %12s\n", "parameter", "estimate",
                  "std_error", "bias", "corrected");
    out << line;
    for (size_t r = 0; r < report.names.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        std::snprintf(line, sizeof(line), "%-12s %12.4f %12.4f %12.4f %12.4f\n",
                      report.names[r].c_str(), report.fit.theta_hat[ri],
                      report.fit.std_errors[ri], report.bias.bias[ri],
                      report.bias.theta_tilde[ri]);
        out << line;
    }
    return out.str();
}

std::string to_csv(const FitReport& report) {
    std::string out = "parameter,estimate,std_error,bias,corrected\n";
    for (size_t r = 0; r < report.names.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        out += report.names[r];
        out += ',';
        out += format_double(report.fit.theta_hat[ri]);
        out += ',';
        out += format_double(report.fit.std_errors[ri]);
        out += ',';
        out += format_double(report.bias.bias[ri]);
        out += ',';
        out += format_double(report.bias.theta_tilde[ri]);
        out += '\n';
    }
    return out;
}

void write_plot(const FitReport& report, const Dataset& data, const std::string& svg_path) {
    if (report.model != "eiv" && report.model != "eiv-hetero") {
        throw UnsupportedModel("plots are supported for the errors-in-variables families only");
    }
    if (data.q() != 2) throw DimensionMismatch("plot needs two-column (Y, X) data");
    const int n = data.n();
    const double a_hat = report.fit.theta_hat[0], b_hat = report.fit.theta_hat[1];
    const double a_bce = report.bias.theta_tilde[0], b_bce = report.bias.theta_tilde[1];

    const double x_lo = data.y.col(1).minCoeff(), x_hi = data.y.col(1).maxCoeff();
    double y_lo = data.y.col(0).minCoeff(), y_hi = data.y.col(0).maxCoeff();
    for (double x : {x_lo, x_hi}) {
        for (double y : {a_hat + b_hat * x, a_bce + b_bce * x}) {
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }

    // companion data table: the points and both line segments
    std::string csv = "kind,x,y\n";
    for (int i = 0; i < n; ++i) {
        csv += "point," + format_double(data.y(i, 1)) + ',' + format_double(data.y(i, 0)) + '\n';
    }
    for (double x : {x_lo, x_hi}) {
        csv += "line_mle," + format_double(x) + ',' + format_double(a_hat + b_hat * x) + '\n';
    }
    for (double x : {x_lo, x_hi}) {
        csv += "line_bce," + format_double(x) + ',' + format_double(a_bce + b_bce * x) + '\n';
    }
    std::string csv_path = svg_path;
    const size_t dot = csv_path.rfind('.');
    if (dot != std::string::npos && csv_path.find('/', dot) == std::string::npos) {
        csv_path.resize(dot);
    }
    csv_path += ".csv";
    write_file(csv_path, csv);

    // fixed-size SVG with 5% padding around the data box
    const double W = 640, H = 480, m = 50;
    const double px = 0.05 * std::max(x_hi - x_lo, 1e-12);
    const double py = 0.05 * std::max(y_hi - y_lo, 1e-12);
    const double ax_lo = x_lo - px, ax_hi = x_hi + px;
    const double ay_lo = y_lo - py, ay_hi = y_hi + py;
    const auto sx = [&](double x) { return m + (x - ax_lo) / (ax_hi - ax_lo) * (W - 2 * m); };
    const auto sy = [&](double y) { return H - m - (y - ay_lo) / (ay_hi - ay_lo) * (H - 2 * m); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n"
        << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n"
        << "<g stroke=\"#444\" stroke-width=\"1\">\n"
        << "<line x1=\"" << fmt2(m) << "\" y1=\"" << fmt2(H - m) << "\" x2=\"" << fmt2(W - m)
        << "\" y2=\"" << fmt2(H - m) << "\"/>\n"
        << "<line x1=\"" << fmt2(m) << "\" y1=\"" << fmt2(m) << "\" x2=\"" << fmt2(m)
        << "\" y2=\"" << fmt2(H - m) << "\"/>\n"
        << "</g>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = ax_lo + k * (ax_hi - ax_lo) / 4;
        const double yv = ay_lo + k * (ay_hi - ay_lo) / 4;
        svg << "<text x=\"" << fmt2(sx(xv)) << "\" y=\"" << fmt2(H - m + 18)
            << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt2(xv) << "</text>\n"
            << "<text x=\"" << fmt2(m - 6) << "\" y=\"" << fmt2(sy(yv) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << fmt2(yv) << "</text>\n";
    }
    svg << "<line x1=\"" << fmt2(sx(x_lo)) << "\" y1=\"" << fmt2(sy(a_hat + b_hat * x_lo))
        << "\" x2=\"" << fmt2(sx(x_hi)) << "\" y2=\"" << fmt2(sy(a_hat + b_hat * x_hi))
        << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    svg << "<line x1=\"" << fmt2(sx(x_lo)) << "\" y1=\"" << fmt2(sy(a_bce + b_bce * x_lo))
        << "\" x2=\"" << fmt2(sx(x_hi)) << "\" y2=\"" << fmt2(sy(a_bce + b_bce * x_hi))
        << "\" stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
    for (int i = 0; i < n; ++i) {
        svg << "<circle cx=\"" << fmt2(sx(data.y(i, 1))) << "\" cy=\"" << fmt2(sy(data.y(i, 0)))
            << "\" r=\"3\" fill=\"#333\"/>\n";
    }
    svg << "<text x=\"" << fmt2(W - m) << "\" y=\"" << fmt2(m)
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"#1f77b4\">maximum likelihood</text>\n"
        << "<text x=\"" << fmt2(W - m) << "\" y=\"" << fmt2(m + 16)
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"#d62728\">bias corrected</text>\n"
        << "</svg>\n";
    write_file(svg_path, svg.str());
}

}  // namespace mvnbc
