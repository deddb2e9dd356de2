#pragma once

#include "mvnbc/estimator.hpp"
#include "mvnbc/model.hpp"
#include "mvnbc/rng.hpp"
#include "mvnbc/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mvnbc {

// Monte Carlo study design. Supported models: "eiv" and "eiv-hetero" (the
// latter pairs each sample size with an evenly spaced covariate grid on
// [-1, 1]).
struct SimDesign {
    std::string model;
    std::map<std::string, double> constants;
    Theta theta_true;
    std::vector<int> sample_sizes;
    int replications = 2000;
    std::uint64_t seed = 0;
    int workers = 1;
    FitOptions fit_options;
};

// One summary row: an (n, parameter, estimator) cell. estimator is "mle" or
// "bce". mc_std_error is the Monte Carlo standard error of rel_bias.
struct SimCell {
    int n = 0;
    std::string parameter;
    std::string estimator;
    double rel_bias = 0.0;
    double rmse = 0.0;
    double mc_std_error = 0.0;
    int n_failed = 0;
};

struct SimResult {
    std::vector<SimCell> cells;
};

// More than 10% of replications failed at some sample size.
struct TooManyFailures : Error {
    int sample_size;
    int failed;
    TooManyFailures(int n, int nf, const std::string& msg)
        : Error(msg), sample_size(n), failed(nf) {}
};

// Parses the JSON study design; ConfigError on malformed or missing fields.
SimDesign parse_design(const std::string& json_text);

// One synthetic dataset: y_i = mu_i + chol(Sigma_i) z_i with q standard
// normals per observation, drawn in observation order.
Dataset simulate_dataset(const ModelSpec& spec, const Theta& theta, int n, Rng& rng);

// Replicated fit + bias-correction study. Replication r of sample size n uses
// the substream (seed, n, r), so results do not depend on the worker count.
// Failed replications (non-convergence, singular information) are dropped and
// counted; TooManyFailures if more than 10% fail at one sample size.
SimResult run_study(const SimDesign& design);

std::string to_csv(const SimResult& result);
std::string to_text(const SimResult& result);
SimResult parse_summary_csv(const std::string& text);

}  // namespace mvnbc
