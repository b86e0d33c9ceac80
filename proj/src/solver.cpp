#include "vfest/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "vfest/errors.hpp"

namespace vfest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct FullEvaluation {
  double objective = kNegInf;
  Eigen::VectorXd score;    // unnormalized gradient of the objective
  Eigen::MatrixXd hessian;  // of the objective
  double total_weight = 0.0;
  bool finite = false;
};

double weight_at(const VarianceRegressionData& data, std::size_t k) {
  return data.weight.empty() ? 1.0 : data.weight[k];
}

FullEvaluation evaluate_full(VarianceForm form, const VarianceRegressionData& data,
                             std::span<const double> theta, bool want_hessian) {
  const std::size_t p = theta.size();
  FullEvaluation out;
  out.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  out.hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  const VarianceModel model(form, std::vector<double>(theta.begin(), theta.end()));
  double objective = 0.0;
  try {
    for (std::size_t k = 0; k < data.x.size(); ++k) {
      const double w = weight_at(data, k);
      if (w == 0.0) continue;
      const VarianceDerivatives d = model.derivatives(data.x[k]);
      const double s2 = data.s2[k];
      const double h = d.h;
      const double ratio = s2 / h;
      out.total_weight += w;
      objective += w * (-0.5 * std::log(h) - 0.5 * ratio);
      // dL/dtheta_j = 1/2 h_j (s2 - h) / h^2
      const double a = 0.5 * w * (ratio - 1.0) / h;
      for (std::size_t j = 0; j < p; ++j) out.score[static_cast<Eigen::Index>(j)] += a * d.grad[j];
      if (want_hessian) {
        // 1/2 [h_jk (s2 - h)/h^2 + h_j h_k (h - 2 s2)/h^3]
        const double b = 0.5 * w * (1.0 - 2.0 * ratio) / (h * h);
        for (std::size_t j = 0; j < p; ++j) {
          for (std::size_t l = 0; l < p; ++l) {
            out.hessian(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) +=
                a * d.hess[j][l] + b * d.grad[j] * d.grad[l];
          }
        }
      }
    }
  } catch (const NumericalError&) {
    return out;
  } catch (const DomainError&) {
    return out;
  }
  if (!std::isfinite(objective) || !out.score.allFinite()) return out;
  out.objective = objective;
  out.finite = true;
  return out;
}

// Max-norm of the normalized estimating equations restricted to free params.
double residual_of(const FullEvaluation& e, const std::vector<bool>& free) {
  if (!e.finite || e.total_weight <= 0.0) return std::numeric_limits<double>::infinity();
  double r = 0.0;
  for (Eigen::Index j = 0; j < e.score.size(); ++j) {
    if (!free[static_cast<std::size_t>(j)]) continue;
    // Score is half the estimating equation; report the equation itself.
    r = std::max(r, std::abs(2.0 * e.score[j] / e.total_weight));
  }
  return r;
}

}  // namespace

ScoreEvaluation evaluate_score(VarianceForm form, const VarianceRegressionData& data,
                               std::span<const double> theta) {
  const FullEvaluation e = evaluate_full(form, data, theta, false);
  ScoreEvaluation out;
  out.objective = e.objective;
  out.score.resize(theta.size(), std::numeric_limits<double>::quiet_NaN());
  if (e.finite && e.total_weight > 0.0) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      out.score[j] = 2.0 * e.score[static_cast<Eigen::Index>(j)] / e.total_weight;
    }
  }
  out.residual_norm = residual_of(e, std::vector<bool>(theta.size(), true));
  return out;
}

SolverResult solve_variance_regression(VarianceForm form, const VarianceRegressionData& data,
                                       std::span<const double> init,
                                       const SolverOptions& options) {
  const std::size_t p = parameter_count(form);
  if (init.size() != p) throw ArgumentError("initial theta has the wrong length");
  if (data.x.size() != data.s2.size() ||
      (!data.weight.empty() && data.weight.size() != data.x.size())) {
    throw ArgumentError("variance regression inputs differ in length");
  }
  std::vector<bool> free = options.free.empty() ? std::vector<bool>(p, true) : options.free;
  if (free.size() != p) throw ArgumentError("free-parameter mask has the wrong length");
  std::vector<Eigen::Index> idx;
  for (std::size_t j = 0; j < p; ++j) {
    if (free[j]) idx.push_back(static_cast<Eigen::Index>(j));
  }
  const auto q = static_cast<Eigen::Index>(idx.size());

  SolverResult result;
  result.theta.assign(init.begin(), init.end());
  FullEvaluation cur = evaluate_full(form, data, result.theta, true);
  if (!cur.finite) throw NumericalError("variance regression: objective not finite at start");
  double residual = residual_of(cur, free);

  // Nelder-Mead on the squared normalized score, over free parameters.
  auto simplex_restart = [&]() {
    auto packed = [&](const std::vector<double>& z) {
      std::vector<double> t = result.theta;
      for (Eigen::Index j = 0; j < q; ++j) t[static_cast<std::size_t>(idx[j])] = z[j];
      return t;
    };
    std::vector<double> z0(static_cast<std::size_t>(q));
    for (Eigen::Index j = 0; j < q; ++j) z0[j] = result.theta[static_cast<std::size_t>(idx[j])];
    auto f = [&](const std::vector<double>& z) {
      const double r = residual_of(evaluate_full(form, data, packed(z), false), free);
      return std::isfinite(r) ? r * r : std::numeric_limits<double>::infinity();
    };
    const SimplexResult s = nelder_mead(f, z0, 0.1, 1e-30, 4000);
    result.used_simplex = true;
    return packed(s.x);
  };

  bool simplex_tried = false;
  for (int iter = 0; iter < options.max_iter; ++iter) {
    if (residual <= options.tol) {
      result.converged = true;
      break;
    }
    result.iterations = iter + 1;
    Eigen::VectorXd g(q);
    Eigen::MatrixXd negH(q, q);
    for (Eigen::Index a = 0; a < q; ++a) {
      g[a] = cur.score[idx[a]];
      for (Eigen::Index b = 0; b < q; ++b) negH(a, b) = -cur.hessian(idx[a], idx[b]);
    }
    // Newton direction when -H is positive definite; otherwise regularize.
    Eigen::VectorXd dir;
    Eigen::LLT<Eigen::MatrixXd> llt(negH);
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(g);
    } else {
      const double scale = std::max(1.0, negH.diagonal().cwiseAbs().maxCoeff());
      for (double lambda = 1e-8 * scale; lambda < 1e8 * scale; lambda *= 10.0) {
        Eigen::MatrixXd reg = negH + lambda * Eigen::MatrixXd::Identity(q, q);
        Eigen::LLT<Eigen::MatrixXd> r(reg);
        if (r.info() == Eigen::Success) {
          dir = r.solve(g);
          break;
        }
      }
    }

    bool accepted = false;
    if (dir.size() == q && dir.allFinite()) {
      double step = 1.0;
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        std::vector<double> trial = result.theta;
        for (Eigen::Index a = 0; a < q; ++a) {
          trial[static_cast<std::size_t>(idx[a])] += step * dir[a];
        }
        FullEvaluation next = evaluate_full(form, data, trial, true);
        if (!next.finite) continue;
        const double next_residual = residual_of(next, free);
        if (next.objective > cur.objective || next_residual < residual) {
          result.theta = std::move(trial);
          cur = std::move(next);
          residual = next_residual;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      if (simplex_tried) break;
      simplex_tried = true;
      std::vector<double> candidate = simplex_restart();
      FullEvaluation next = evaluate_full(form, data, candidate, true);
      const double next_residual = residual_of(next, free);
      if (!next.finite || next_residual >= residual) break;
      result.theta = std::move(candidate);
      cur = std::move(next);
      residual = next_residual;
    }
  }
  if (residual <= options.tol) result.converged = true;
  result.residual_norm = residual;
  result.objective = cur.objective;
  return result;
}

}  // namespace vfest
