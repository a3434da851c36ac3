#pragma once

#include <Eigen/Dense>

#include <string>

namespace gridmpc::qp {

// Dense convex quadratic program
//   min  1/2 z' H z + g' z
//   s.t. G z <= h
// H must be symmetric and positive definite (callers regularize).
struct Instance {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_rows() const { return static_cast<int>(h.size()); }
  void validate() const;  // throws std::invalid_argument on shape/symmetry issues
};

enum class Status { Optimal, MaxIterations, NumericalFailure };

const char* to_string(Status status);

// Scaled KKT residuals: each is normalized by 1 + the magnitudes entering it,
// so a tolerance applies uniformly across problem scales.
struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double max() const;
};

struct Result {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;  // multipliers for G z <= h, >= 0
  Status status = Status::NumericalFailure;
  Residuals residuals;
  int iterations = 0;
  double objective = 0.0;
};

struct Settings {
  double tolerance = 1e-6;   // residual level accepted as Optimal
  int max_iterations = 200;
  // The solver keeps polishing below `tolerance` until residuals reach this
  // target or progress stalls, so results are sharper than the accept gate.
  double target = 1e-10;
  int ruiz_iterations = 10;
  std::string dump_path;  // when non-empty, non-Optimal solves dump here
};

// Primal-dual interior-point solver (predictor-corrector with a merit-based
// step safeguard). Deterministic: identical inputs give bit-identical
// results. Holds per-solve scratch only, so use one instance per thread.
class Solver {
 public:
  Result solve(const Instance& instance, const Settings& settings = {});
  // Same contract as solve; a good (z0, lambda0) pair only saves iterations.
  // If the warm point already satisfies the KKT conditions at `tolerance`
  // it is returned unchanged with zero iterations.
  Result warm_start(const Instance& instance, const Eigen::VectorXd& z0,
                    const Eigen::VectorXd& lambda0, const Settings& settings = {});

 private:
  Result run(const Instance& instance, const Settings& settings, const Eigen::VectorXd* z0,
             const Eigen::VectorXd* lambda0);
};

Result solve(const Instance& instance, const Settings& settings = {});

// Residuals of (z, lambda) on the original problem data. Used for the accept
// gate and exposed so tests can re-verify results independently.
Residuals kkt_residuals(const Instance& instance, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& lambda);

// Plain-text replay file (dense matrix-market flavour) for failing instances.
void dump_instance(const Instance& instance, const std::string& path);
Instance load_instance(const std::string& path);

}  // namespace gridmpc::qp
