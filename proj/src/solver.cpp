#include "depthproj/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "depthproj/parallel.hpp"

namespace depthproj {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(Eigen::Index n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), Eigen::Index{0});
  }
  Eigen::Index find(Eigen::Index i) {
    while (parent_[static_cast<std::size_t>(i)] != i) {
      auto& p = parent_[static_cast<std::size_t>(i)];
      p = parent_[static_cast<std::size_t>(p)];
      i = p;
    }
    return i;
  }
  void unite(Eigen::Index a, Eigen::Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index becomes the root so roots are stable.
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
  }

 private:
  std::vector<Eigen::Index> parent_;
};

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

}  // namespace

std::vector<char> used_columns(const SparseSystem& system) {
  std::vector<char> used(static_cast<std::size_t>(system.cols()), 0);
  for (Eigen::Index r = 0; r < system.matrix.outerSize(); ++r) {
    for (RowMatrix::InnerIterator it(system.matrix, r); it; ++it) used[static_cast<std::size_t>(it.col())] = 1;
  }
  return used;
}

std::vector<EpipolarChain> extract_chains(const SparseSystem& system) {
  const Eigen::Index n = system.cols();
  DisjointSets sets(n);
  for (Eigen::Index r = 0; r < system.matrix.outerSize(); ++r) {
    RowMatrix::InnerIterator it(system.matrix, r);
    if (!it) continue;
    const Eigen::Index first = it.col();
    for (++it; it; ++it) sets.unite(first, it.col());
  }
  const auto used = used_columns(system);
  std::vector<int> chain_of_root(static_cast<std::size_t>(n), -1);
  std::vector<EpipolarChain> chains;
  for (Eigen::Index c = 0; c < n; ++c) {
    if (!used[static_cast<std::size_t>(c)]) continue;
    const auto root = static_cast<std::size_t>(sets.find(c));
    if (chain_of_root[root] < 0) {
      chain_of_root[root] = static_cast<int>(chains.size());
      chains.push_back({static_cast<int>(chains.size()), {}, {}});
    }
    chains[static_cast<std::size_t>(chain_of_root[root])].variables.push_back(c);
  }
  for (Eigen::Index r = 0; r < system.matrix.outerSize(); ++r) {
    RowMatrix::InnerIterator it(system.matrix, r);
    if (!it) continue;
    const auto root = static_cast<std::size_t>(sets.find(it.col()));
    chains[static_cast<std::size_t>(chain_of_root[root])].rows.push_back(r);
  }
  return chains;
}

BoxLsqResult solve_box_lsq(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b, SolverBounds bounds,
                           const BoxLsqOptions& options, std::vector<double>* trace) {
  bounds.validate();
  const Eigen::Index n = a.cols();
  const double lo = bounds.lower;
  const double hi = bounds.upper;
  auto project = [&](Eigen::VectorXd& v) { v = v.cwiseMax(lo).cwiseMin(hi); };

  BoxLsqResult res;
  res.x = Eigen::VectorXd::Zero(n);
  project(res.x);
  Eigen::VectorXd& x = res.x;
  Eigen::VectorXd r = a * x - b;
  Eigen::VectorXd g = 2.0 * (a.transpose() * r);
  double f = r.squaredNorm();

  const double scale = std::max({1.0, 2.0 * (a.transpose() * b).norm(), g.norm()});
  const double tol = options.tolerance * scale;

  auto projected_gradient = [&](const Eigen::VectorXd& grad) {
    Eigen::VectorXd pg = grad;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i) <= lo && grad(i) > 0.0) pg(i) = 0.0;
      if (x(i) >= hi && grad(i) < 0.0) pg(i) = 0.0;
    }
    return pg;
  };

  // Projected search from x along d with initial step alpha; Armijo on the
  // projected path. Returns false when no decrease could be found.
  auto projected_search = [&](const Eigen::VectorXd& d, double alpha) {
    constexpr double kArmijo = 1e-4;
    for (int halving = 0; halving < 60; ++halving) {
      Eigen::VectorXd trial = x + alpha * d;
      project(trial);
      const Eigen::VectorXd step = trial - x;
      if (step.squaredNorm() == 0.0) return false;
      const Eigen::VectorXd r_trial = a * trial - b;
      const double f_trial = r_trial.squaredNorm();
      if (f_trial <= f + kArmijo * g.dot(step)) {
        x = std::move(trial);
        r = r_trial;
        f = f_trial;
        g = 2.0 * (a.transpose() * r);
        return true;
      }
      alpha *= 0.5;
    }
    return false;
  };

  Eigen::VectorXd pg = projected_gradient(g);
  res.projected_gradient_norm = pg.norm();
  int it = 0;
  while (it < options.max_iterations) {
    if (res.projected_gradient_norm <= tol) {
      res.converged = true;
      break;
    }
    ++it;

    // Gradient projection: steepest descent on the non-binding variables with
    // the exact minimiser of the quadratic along that direction.
    {
      const Eigen::VectorXd d = -pg;
      const Eigen::VectorXd ad = a * d;
      const double curvature = ad.squaredNorm();
      if (curvature > 0.0) projected_search(d, d.squaredNorm() / (2.0 * curvature));
    }

    // Conjugate gradients on the face defined by the current binding set.
    std::vector<char> free(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool binding = (x(i) <= lo && g(i) >= 0.0) || (x(i) >= hi && g(i) <= 0.0);
      free[static_cast<std::size_t>(i)] = binding ? 0 : 1;
    }
    auto restrict_to_free = [&](Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!free[static_cast<std::size_t>(i)]) v(i) = 0.0;
      }
    };
    Eigen::VectorXd s = -0.5 * g;  // A_F^T (b - A x)
    restrict_to_free(s);
    double gamma = s.squaredNorm();
    Eigen::VectorXd p = s;
    const Eigen::Index free_count = std::count(free.begin(), free.end(), 1);
    const Eigen::Index cg_cap = std::max<Eigen::Index>(25, 2 * free_count);
    for (Eigen::Index k = 0; k < cg_cap && gamma > 0.0; ++k) {
      if (2.0 * std::sqrt(gamma) <= 0.5 * tol) break;
      const Eigen::VectorXd q = a * p;
      const double qq = q.squaredNorm();
      if (!(qq > 0.0)) break;
      const double alpha = gamma / qq;
      double alpha_max = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (p(i) > 0.0) alpha_max = std::min(alpha_max, (hi - x(i)) / p(i));
        if (p(i) < 0.0) alpha_max = std::min(alpha_max, (lo - x(i)) / p(i));
      }
      ++res.cg_steps;
      if (alpha > alpha_max) {
        projected_search(p, alpha);
        break;
      }
      x += alpha * p;
      r += alpha * q;
      f = r.squaredNorm();
      s = -(a.transpose() * r);
      restrict_to_free(s);
      const double gamma_next = s.squaredNorm();
      p = s + (gamma_next / gamma) * p;
      gamma = gamma_next;
    }
    project(x);  // guards rounding at the faces
    r = a * x - b;
    f = r.squaredNorm();
    g = 2.0 * (a.transpose() * r);
    pg = projected_gradient(g);
    res.projected_gradient_norm = pg.norm();
    if (trace) trace->push_back(f);
  }
  if (!res.converged && res.projected_gradient_norm <= tol) res.converged = true;
  res.iterations = it;
  res.objective = f;
  return res;
}

ChainProblem chain_problem(const SparseSystem& system, const EpipolarChain& chain, const Eigen::VectorXd& rhs) {
  ChainProblem prob;
  std::vector<Eigen::Triplet<double>> entries;
  prob.rhs.resize(static_cast<Eigen::Index>(chain.rows.size()));
  for (std::size_t local_row = 0; local_row < chain.rows.size(); ++local_row) {
    const Eigen::Index row = chain.rows[local_row];
    prob.rhs(static_cast<Eigen::Index>(local_row)) = rhs(row);
    for (RowMatrix::InnerIterator it(system.matrix, row); it; ++it) {
      const auto pos = std::lower_bound(chain.variables.begin(), chain.variables.end(), it.col());
      if (pos == chain.variables.end() || *pos != it.col()) {
        throw std::logic_error("row touches a variable outside its chain");
      }
      entries.emplace_back(static_cast<Eigen::Index>(local_row), pos - chain.variables.begin(), it.value());
    }
  }
  prob.matrix.resize(static_cast<Eigen::Index>(chain.rows.size()), static_cast<Eigen::Index>(chain.variables.size()));
  prob.matrix.setFromTriplets(entries.begin(), entries.end());
  return prob;
}

BoxLsqResult solve_chain(const SparseSystem& system, const EpipolarChain& chain, const Eigen::VectorXd& rhs,
                         SolverBounds bounds, const BoxLsqOptions& options) {
  const auto prob = chain_problem(system, chain, rhs);
  return solve_box_lsq(prob.matrix, prob.rhs, bounds, options);
}

BoxLsqResult solve_chain(const SparseSystem& system, const EpipolarChain& chain, SolverBounds bounds,
                         const BoxLsqOptions& options) {
  return solve_chain(system, chain, system.rhs, bounds, options);
}

EoSolution solve_eo(const SparseSystem& system, const std::vector<EpipolarChain>& chains, const Eigen::VectorXd& rhs,
                    SolverBounds bounds, const EoOptions& options) {
  bounds.validate();
  EoSolution sol;
  sol.values = Eigen::VectorXd::Zero(system.cols());
  std::vector<BoxLsqResult> results(chains.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(chains.size()), options.threads, [&](std::ptrdiff_t c) {
    results[static_cast<std::size_t>(c)] = solve_chain(system, chains[static_cast<std::size_t>(c)], rhs, bounds, options.chain);
  });
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& chain = chains[c];
    const auto& res = results[c];
    for (std::size_t v = 0; v < chain.variables.size(); ++v) {
      sol.values(chain.variables[v]) = res.x(static_cast<Eigen::Index>(v));
    }
    ChainReport rep;
    rep.chain = chain.id;
    rep.variables = static_cast<int>(chain.variables.size());
    rep.rows = static_cast<int>(chain.rows.size());
    rep.iterations = res.iterations;
    rep.converged = res.converged;
    rep.objective = res.objective;
    rep.residual_rms = chain.rows.empty() ? 0.0 : std::sqrt(res.objective / static_cast<double>(chain.rows.size()));
    sol.objective += res.objective;
    if (!res.converged) {
      sol.warnings.push_back("chain " + std::to_string(chain.id) + " hit the iteration cap (projected gradient " +
                             std::to_string(res.projected_gradient_norm) + "); keeping the best iterate");
    }
    sol.chains.push_back(rep);
  }
  sol.patterns = scatter_patterns(system, sol.values);
  return sol;
}

EoSolution solve_eo(const SparseSystem& system, SolverBounds bounds, const EoOptions& options) {
  return solve_eo(system, extract_chains(system), system.rhs, bounds, options);
}

LfSolution solve_lf(const SparseSystem& system, const Eigen::VectorXd& rhs, const LfOptions& options) {
  const auto& a = system.matrix;
  LfSolution sol;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(system.cols());
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd s = a.transpose() * r;
  const double norm0 = s.norm();
  Eigen::VectorXd p = s;
  double gamma = s.squaredNorm();
  int it = 0;
  double rel = norm0 > 0.0 ? 1.0 : 0.0;
  while (it < options.max_iterations && rel > options.tolerance) {
    ++it;
    const Eigen::VectorXd q = a * p;
    const double qq = q.squaredNorm();
    if (!(qq > 0.0)) break;
    const double alpha = gamma / qq;
    x += alpha * p;
    r -= alpha * q;
    s = a.transpose() * r;
    const double gamma_next = s.squaredNorm();
    if (!std::isfinite(gamma_next) || !x.allFinite()) throw Error("LF least-squares solve diverged");
    rel = std::sqrt(gamma_next) / norm0;
    p = s + (gamma_next / gamma) * p;
    gamma = gamma_next;
  }
  sol.iterations = it;
  sol.relative_residual = rel;
  sol.converged = rel <= options.tolerance;
  if (!sol.converged) {
    sol.warnings.push_back("LF solve stopped after " + std::to_string(it) + " iterations at relative residual " +
                           std::to_string(rel));
  }
  sol.unconstrained = x;

  const double lo = x.size() > 0 ? x.minCoeff() : 0.0;
  const double hi = x.size() > 0 ? x.maxCoeff() : 0.0;
  if (hi > lo) {
    sol.scale = 255.0 / (hi - lo);
    sol.offset = -lo * sol.scale;
  } else {
    sol.scale = 1.0;
    sol.offset = std::clamp(lo, 0.0, 255.0) - lo;
  }
  sol.values = (sol.scale * x.array() + sol.offset).cwiseMax(0.0).cwiseMin(255.0).matrix();
  sol.patterns = scatter_patterns(system, sol.values);
  return sol;
}

LfSolution solve_lf(const SparseSystem& system, const LfOptions& options) {
  return solve_lf(system, system.rhs, options);
}

}  // namespace depthproj
