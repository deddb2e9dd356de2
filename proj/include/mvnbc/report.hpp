#pragma once

#include "mvnbc/bias.hpp"
#include "mvnbc/estimator.hpp"
#include "mvnbc/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace mvnbc {

// Everything a fit report needs, assembled by the caller.
struct FitReport {
    std::string model;
    std::map<std::string, double> constants;
    int n = 0;
    std::vector<std::string> names;
    FitResult fit;
    BiasReport bias;
};

// JSON and CSV carry full precision; the text table rounds to 4 decimals.
std::string to_json(const FitReport& report);
std::string to_text(const FitReport& report);
std::string to_csv(const FitReport& report);

// Scatter of the observations with the fitted and bias-corrected regression
// lines, written as <base>.svg plus a <base>.csv with the plotted points and
// line endpoints. Supported for the errors-in-variables families only
// (UnsupportedModel otherwise).
void write_plot(const FitReport& report, const Dataset& data, const std::string& svg_path);

}  // namespace mvnbc
