// Acceptance suite: every release-gating requirement as one pass/fail line.
// Exits nonzero when any criterion fails.

#include <mvnbc/bias.hpp>
#include <mvnbc/builtin.hpp>
#include <mvnbc/csv.hpp>
#include <mvnbc/estimator.hpp>
#include <mvnbc/likelihood.hpp>
#include <mvnbc/rng.hpp>
#include <mvnbc/simulate.hpp>

#include "dense_reference.hpp"
#include "helpers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace mvnbc;
using namespace testutil;

namespace {

int g_failed = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL",
              criterion, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failed;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Dataset calib_from_disk() {
  const CsvTable t = read_csv(std::string(MVNBC_DATA_DIR) + "/fuller.csv");
  Dataset d;
  d.y.resize(t.values.rows(), 2);
  d.y.col(0) = t.values.col(t.require_col("Y"));
  d.y.col(1) = t.values.col(t.require_col("X"));
  return d;
}

// ---- criteria 1 and 2: reference-dataset estimates, bias and errors ----

void criterion_1_and_2() {
  const ModelSpec spec = simple_eiv(kCalibSigmaU2);
  const Dataset data = calib_from_disk();
  const CalibAnchors a = calib_anchors();

  const auto t0 = std::chrono::steady_clock::now();
  const auto [fit_res, bias_rep] = corrected_fit(spec, data);
  const double elapsed = seconds_since(t0);

  double mle_err = 0.0;
  for (int r = 0; r < 5; ++r)
    mle_err = std::max(mle_err, std::abs(fit_res.theta_hat[r] - a.mle[r]));
  {
    std::ostringstream d;
    d << "max |estimate - reference| " << mle_err << ", " << elapsed << "s";
    report(1, fit_res.converged && mle_err < 5e-4 && elapsed < 1.0,
           "maximum likelihood estimates on the reference dataset",
           d.str());
  }

  double bias_err = 0.0, bce_err = 0.0, se_err = 0.0;
  for (int r = 0; r < 5; ++r) {
    bias_err = std::max(bias_err, std::abs(bias_rep.bias[r] - a.bias[r]));
    bce_err =
        std::max(bce_err, std::abs(bias_rep.theta_tilde[r] - a.bce[r]));
    se_err = std::max(se_err, std::abs(fit_res.std_errors[r] - a.se[r]));
  }
  std::ostringstream d;
  d << "max bias err " << bias_err << ", corrected err " << bce_err
    << ", std err err " << se_err;
  report(2, bias_err < 1e-3 && bce_err < 1e-3 && se_err < 1e-2,
         "bias vector, corrected estimates and standard errors", d.str());
}

// ---- criterion 3: two independent bias routes agree everywhere ----

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int cases = 0;
  for (uint64_t draw = 0; draw < 20; ++draw) {
    for (int n : {3, 5, 10}) {
      for (const FamilyCase& fc : family_cases(n, draw)) {
        mvnbc::Rng rng = mvnbc::Rng::stream(41, draw, static_cast<uint64_t>(n));
        const Dataset data = draw_dataset(fc.spec, fc.theta, n, rng);
        const Eigen::VectorXd b1 = bias_vector(fc.spec, fc.theta, data);
        const Eigen::VectorXd b2 = cox_snell_bias(fc.spec, fc.theta, data);
        worst = std::max(worst, (b1 - b2).cwiseAbs().maxCoeff() /
                                    (1.0 + b1.cwiseAbs().maxCoeff()));
        ++cases;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << cases << " cases, worst rel diff " << worst << ", " << elapsed << "s";
  report(3, worst < 1e-10 && elapsed < 30.0,
         "matrix bias route vs cumulant bias route "
         "(3 models x 20 points x n in {3,5,10})",
         d.str());
}

// ---- criterion 4: univariate closed-form bias and block orthogonality ----

void criterion_4() {
  double worst_bias = 0.0, worst_cross = 0.0;
  for (uint64_t draw = 0; draw < 20; ++draw) {
    mvnbc::Rng rng = mvnbc::Rng::stream(42, draw, 0);
    const int n = 5 + static_cast<int>(rng.uniform() * 20.0);
    const ModelSpec spec = scaled_exponential(even_grid(n, 0.1, 2.0));
    const Theta th = random_uninl_theta(rng);
    const Dataset data = draw_dataset(spec, th, n, rng);

    const Eigen::VectorXd b = bias_vector(spec, th, data);
    const double expect = -(spec.p - 1.0) * th[2] / n;
    worst_bias = std::max(worst_bias, std::abs(b[2] - expect));

    const Eigen::MatrixXd k = fisher_information(spec, th, data);
    const double scale = k.cwiseAbs().maxCoeff();
    worst_cross =
        std::max({worst_cross, std::abs(k(0, 2)) / scale,
                  std::abs(k(1, 2)) / scale});
  }
  std::ostringstream d;
  d << "worst |bias - closed form| " << worst_bias
    << ", worst scaled cross-block " << worst_cross;
  report(4, worst_bias < 1e-10 && worst_cross < 1e-12,
         "univariate model: closed-form variance bias and coefficient/"
         "variance orthogonality",
         d.str());
}

// ---- criterion 5: tiny problems against the stacked-matrix reference ----

void criterion_5() {
  double worst = 0.0;
  int cases = 0;
  const auto check_case = [&](const ModelSpec& spec, const Theta& th, int n,
                              uint64_t draw) {
    mvnbc::Rng rng = mvnbc::Rng::stream(43, draw, static_cast<uint64_t>(n));
    const Dataset data = draw_dataset(spec, th, n, rng);
    const DenseReference ref = dense_reference(spec, th, data);
    const Eigen::VectorXd u = score(spec, th, data);
    const Eigen::MatrixXd k = fisher_information(spec, th, data);
    const Eigen::VectorXd b = bias_vector(spec, th, data);
    worst = std::max({worst,
                      (u - ref.score).cwiseAbs().maxCoeff() /
                          (1.0 + u.cwiseAbs().maxCoeff()),
                      (k - ref.information).cwiseAbs().maxCoeff() /
                          (1.0 + k.cwiseAbs().maxCoeff()),
                      (b - ref.bias).cwiseAbs().maxCoeff() /
                          (1.0 + b.cwiseAbs().maxCoeff())});
    ++cases;
  };
  for (uint64_t draw = 0; draw < 5; ++draw) {
    mvnbc::Rng rng = mvnbc::Rng::stream(44, draw, 0);
    for (int n = 2; n <= 4; ++n)
      check_case(simple_eiv(0.2 + 1.8 * rng.uniform()),
                 random_eiv_theta(rng), n, draw);
    // the 7-parameter family needs n*q >= p
    check_case(hetero_eiv(0.2 + 1.8 * rng.uniform(),
                          even_grid(4, -1.0, 1.0)),
               random_hetero_theta(rng), 4, draw);
  }
  std::ostringstream d;
  d << cases << " cases, worst rel diff " << worst;
  report(5, worst < 1e-10,
         "score, information and bias vs an explicit stacked-matrix "
         "implementation (q=2, n<=4)",
         d.str());
}

// ---- criterion 6: analytic derivatives against numerical references ----

void criterion_6() {
  double worst_score = 0.0, worst_first = 0.0, worst_second = 0.0;
  for (uint64_t draw = 0; draw < 20; ++draw) {
    for (const FamilyCase& fc : family_cases(6, draw)) {
      mvnbc::Rng rng = mvnbc::Rng::stream(45, draw, 1);
      const Dataset data = draw_dataset(fc.spec, fc.theta, 6, rng);
      const Eigen::VectorXd u = score(fc.spec, fc.theta, data);
      const Eigen::VectorXd u_fd = fd_score(fc.spec, fc.theta, data);
      worst_score = std::max(worst_score,
                             (u - u_fd).cwiseAbs().maxCoeff() /
                                 (1.0 + u.cwiseAbs().maxCoeff()));

      const DerivativeBundle analytic =
          evaluate_derivatives(fc.spec, fc.theta, 6, 2);
      ModelSpec no_first = fc.spec;
      no_first.first_derivs = nullptr;
      no_first.second_derivs = nullptr;
      const DerivativeBundle fd1 =
          evaluate_derivatives(no_first, fc.theta, 6, 1);
      for (int r = 0; r < fc.spec.p; ++r) {
        worst_first = std::max(
            {worst_first,
             rel_err(analytic.dmu[static_cast<size_t>(r)],
                     fd1.dmu[static_cast<size_t>(r)]),
             rel_err(analytic.dsigma[static_cast<size_t>(r)],
                     fd1.dsigma[static_cast<size_t>(r)])});
      }
      ModelSpec no_second = fc.spec;
      no_second.second_derivs = nullptr;
      const DerivativeBundle fd2 =
          evaluate_derivatives(no_second, fc.theta, 6, 2);
      for (int s = 0; s < fc.spec.p; ++s)
        for (int r = 0; r < fc.spec.p; ++r) {
          worst_second = std::max(
              {worst_second, rel_err(analytic.d2mu_at(s, r), fd2.d2mu_at(s, r)),
               rel_err(analytic.d2sigma_at(s, r), fd2.d2sigma_at(s, r))});
        }
    }
  }
  std::ostringstream d;
  d << "worst score diff " << worst_score << ", first-derivative diff "
    << worst_first << ", second-derivative diff " << worst_second;
  report(6,
         worst_score < 1e-5 && worst_first < 1e-6 && worst_second < 1e-6,
         "score and analytic derivative bundles vs finite differences "
         "(3 models x 20 points)",
         d.str());
}

// ---- criterion 7: replicated study brackets the known small-sample bias ----

void criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  SimDesign design;
  design.model = "eiv";
  design.constants["sigma_u2"] = 57.0;
  design.theta_true.resize(5);
  design.theta_true << 67.0, 0.42, 70.0, 247.0, 43.0;
  design.sample_sizes = {25, 50};
  design.replications = 2000;
  design.seed = 42;
  design.workers = 8;

  SimResult res;
  try {
    res = run_study(design);
  } catch (const std::exception& e) {
    report(7, false, "replicated bias study", std::string("threw: ") + e.what());
    return;
  }
  const double elapsed = seconds_since(t0);

  const auto cell = [&](int n, const std::string& par,
                        const std::string& est) -> const SimCell& {
    for (const SimCell& c : res.cells)
      if (c.n == n && c.parameter == par && c.estimator == est) return c;
    static SimCell missing;
    return missing;
  };

  bool pass = true;
  std::ostringstream d;

  // (a) uncorrected variance bias at n=25 brackets the published value
  const SimCell& m25 = cell(25, "sigma2", "mle");
  const double target = -0.1198;
  if (std::abs(m25.rel_bias - target) > 3.0 * m25.mc_std_error) pass = false;
  d << "mle sigma2@25 " << m25.rel_bias << " (target " << target << " +- "
    << 3.0 * m25.mc_std_error << ")";

  // (b) corrected variance bias at n=25 is near zero
  const SimCell& b25 = cell(25, "sigma2", "bce");
  if (std::abs(b25.rel_bias) > 0.03) pass = false;
  d << ", bce sigma2@25 " << b25.rel_bias;

  // (c) correction shrinks the bias for every non-degenerate parameter
  for (int n : {25, 50})
    for (const char* par : {"alpha", "beta", "sigma_x2", "sigma2"}) {
      const double m = std::abs(cell(n, par, "mle").rel_bias);
      const double b = std::abs(cell(n, par, "bce").rel_bias);
      if (!(b < m)) {
        pass = false;
        d << ", NOT |" << par << "@" << n << "|: " << b << " vs " << m;
      }
    }

  d << ", " << elapsed << "s";
  if (elapsed >= 300.0) pass = false;
  report(7, pass,
         "2000-replication study at n in {25,50} brackets the known "
         "small-sample bias and the correction shrinks it",
         d.str());
}

// ---- criterion 8: structural zero for the latent-mean bias ----

void criterion_8() {
  double worst = 0.0;
  for (uint64_t draw = 0; draw < 20; ++draw) {
    mvnbc::Rng rng = mvnbc::Rng::stream(46, draw, 0);
    const ModelSpec spec = simple_eiv(0.2 + 1.8 * rng.uniform());
    const Theta th = random_eiv_theta(rng);
    const int n = 3 + static_cast<int>(rng.uniform() * 20.0);
    const Dataset data = draw_dataset(spec, th, n, rng);
    const Eigen::VectorXd b = bias_vector(spec, th, data);
    worst = std::max(worst, std::abs(b[2]));
  }
  std::ostringstream d;
  d << "worst |bias(mu_x)| " << worst;
  report(8, worst < 1e-10,
         "latent-mean bias is exactly zero across 20 random points", d.str());
}

// ---- criterion 9: simulate output independent of parallelism ----

void criterion_9() {
  const std::string cfg_path = "acceptance_design.json";
  {
    std::ofstream cfg(cfg_path, std::ios::binary);
    cfg << R"({
      "model": "eiv",
      "constants": {"sigma_u2": 57.0},
      "theta": [67.0, 0.42, 70.0, 247.0, 43.0],
      "sample_sizes": [15],
      "replications": 200,
      "seed": 7,
      "workers": 1
    })";
  }

  const auto run = [&](int workers, const std::string& out) {
    std::ostringstream cmd;
    cmd << MVNBC_CLI_PATH << " simulate --config " << cfg_path << " --workers "
        << workers << " --out " << out << " 2>&1";
    FILE* pipe = popen(cmd.str().c_str(), "r");
    if (!pipe) return -1;
    char buf[4096];
    while (fread(buf, 1, sizeof buf, pipe) > 0) {
    }
    const int status = pclose(pipe);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  const int c1 = run(1, "acceptance_w1.csv");
  const int c4 = run(4, "acceptance_w4.csv");
  const int c8 = run(8, "acceptance_w8.csv");
  const std::string o1 = slurp("acceptance_w1.csv");
  const std::string o4 = slurp("acceptance_w4.csv");
  const std::string o8 = slurp("acceptance_w8.csv");

  std::remove(cfg_path.c_str());
  std::remove("acceptance_w1.csv");
  std::remove("acceptance_w4.csv");
  std::remove("acceptance_w8.csv");

  std::ostringstream d;
  d << "exit codes " << c1 << "/" << c4 << "/" << c8 << ", bytes "
    << o1.size() << "/" << o4.size() << "/" << o8.size();
  report(9,
         c1 == 0 && c4 == 0 && c8 == 0 && !o1.empty() && o1 == o4 &&
             o1 == o8,
         "command-line study output is byte-identical for 1, 4 and 8 workers",
         d.str());
}

}  // namespace

int main() {
  criterion_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (g_failed == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failed);
  return 1;
}
