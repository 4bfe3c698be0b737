#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

#include "depthproj/common.hpp"
#include "depthproj/system.hpp"

namespace depthproj {

/// Connected component of the variable/row graph of a SparseSystem: no row
/// touches variables of two different chains.
struct EpipolarChain {
  int id = 0;
  std::vector<Eigen::Index> variables;  // global column indices, ascending
  std::vector<Eigen::Index> rows;       // global row indices, ascending
};

std::vector<EpipolarChain> extract_chains(const SparseSystem& system);

struct BoxLsqOptions {
  int max_iterations = 10000;
  /// Stop once the projected gradient norm drops below tolerance * scale,
  /// with scale = max(1, |2 A^T b|, |gradient at the start point|).
  double tolerance = 1e-12;
};

struct BoxLsqResult {
  Eigen::VectorXd x;
  double objective = 0.0;  // |A x - b|^2
  int iterations = 0;
  int cg_steps = 0;
  bool converged = false;
  double projected_gradient_norm = 0.0;
};

/// min |A x - b|^2 subject to lower <= x <= upper, starting from the projection
/// of 0. Alternates projected-gradient steps (exact step length for the
/// quadratic, Armijo backtracking after projection) with conjugate-gradient
/// minimisation over the free variables. `trace`, when given, receives the
/// objective after every outer iteration.
BoxLsqResult solve_box_lsq(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b, SolverBounds bounds,
                           const BoxLsqOptions& options = {}, std::vector<double>* trace = nullptr);

/// Rows and columns of one chain as a small column-major matrix.
struct ChainProblem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
};

ChainProblem chain_problem(const SparseSystem& system, const EpipolarChain& chain, const Eigen::VectorXd& rhs);

BoxLsqResult solve_chain(const SparseSystem& system, const EpipolarChain& chain, SolverBounds bounds,
                         const BoxLsqOptions& options = {});
BoxLsqResult solve_chain(const SparseSystem& system, const EpipolarChain& chain, const Eigen::VectorXd& rhs,
                         SolverBounds bounds, const BoxLsqOptions& options = {});

struct ChainReport {
  int chain = 0;
  int variables = 0;
  int rows = 0;
  int iterations = 0;
  bool converged = true;
  double objective = 0.0;
  double residual_rms = 0.0;
};

struct EoOptions {
  int threads = 0;
  BoxLsqOptions chain;
};

struct EoSolution {
  Eigen::VectorXd values;  // stacked p, unused pixels 0
  std::vector<PatternImage> patterns;
  std::vector<ChainReport> chains;
  std::vector<std::string> warnings;
  double objective = 0.0;
};

EoSolution solve_eo(const SparseSystem& system, SolverBounds bounds, const EoOptions& options = {});
EoSolution solve_eo(const SparseSystem& system, const std::vector<EpipolarChain>& chains, const Eigen::VectorXd& rhs,
                    SolverBounds bounds, const EoOptions& options = {});

struct LfOptions {
  int max_iterations = 5000;
  /// Relative normal-equation residual |A^T r| / |A^T b|.
  double tolerance = 1e-8;
};

struct LfSolution {
  Eigen::VectorXd unconstrained;  // least-squares p before normalisation
  Eigen::VectorXd values;         // scale * p + offset
  std::vector<PatternImage> patterns;
  double scale = 1.0;
  double offset = 0.0;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
  std::vector<std::string> warnings;
};

/// Global unconstrained least squares (CGLS from 0), then one affine map of the
/// whole stacked p onto [0, 255].
LfSolution solve_lf(const SparseSystem& system, const LfOptions& options = {});
LfSolution solve_lf(const SparseSystem& system, const Eigen::VectorXd& rhs, const LfOptions& options = {});

/// Columns referenced by at least one row.
std::vector<char> used_columns(const SparseSystem& system);

}  // namespace depthproj
