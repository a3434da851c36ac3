#include "gridmpc/qp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace gridmpc::qp {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Largest alpha in (0, 1] keeping v + alpha * dv >= 0.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

struct Scaling {
  Eigen::VectorXd d_var;  // z = d_var .* z_scaled
  Eigen::VectorXd d_row;  // lambda = d_row .* lambda_scaled
};

// Ruiz-style row/column equilibration of the stacked KKT data [H G'; G 0]:
// repeatedly divides variable columns and constraint rows by the square root
// of their infinity norm. Operates in place on the scaled copies.
Scaling ruiz_equilibrate(Eigen::MatrixXd& H, Eigen::VectorXd& g, Eigen::MatrixXd& G,
                         Eigen::VectorXd& h, int iterations) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(h.size());
  Scaling s;
  s.d_var = Eigen::VectorXd::Ones(n);
  s.d_row = Eigen::VectorXd::Ones(m);
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd dv(n), dr(m);
    for (int j = 0; j < n; ++j) {
      double norm = H.col(j).cwiseAbs().maxCoeff();
      if (m > 0) norm = std::max(norm, G.col(j).cwiseAbs().maxCoeff());
      dv(j) = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    for (int i = 0; i < m; ++i) {
      const double norm = G.row(i).cwiseAbs().maxCoeff();
      dr(i) = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    H = dv.asDiagonal() * H * dv.asDiagonal();
    g = dv.cwiseProduct(g);
    if (m > 0) {
      G = dr.asDiagonal() * G * dv.asDiagonal();
      h = dr.cwiseProduct(h);
    }
    s.d_var = s.d_var.cwiseProduct(dv);
    s.d_row = s.d_row.cwiseProduct(dr);
  }
  return s;
}

Residuals scaled_residuals(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                           const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& slack) {
  Residuals r;
  const Eigen::VectorXd hz = H * z;
  Eigen::VectorXd dual = hz + g;
  double dual_scale = 1.0 + std::max(inf_norm(hz), inf_norm(g));
  if (lambda.size() > 0) {
    const Eigen::VectorXd gtl = G.transpose() * lambda;
    dual += gtl;
    dual_scale = std::max(dual_scale, 1.0 + inf_norm(gtl));
  }
  r.dual = inf_norm(dual) / dual_scale;
  if (lambda.size() > 0) {
    const Eigen::VectorXd gz = G * z;
    r.primal = inf_norm(gz + slack - h) / (1.0 + std::max(inf_norm(gz), inf_norm(h)));
    r.complementarity = inf_norm(lambda.cwiseProduct(slack)) /
                        (1.0 + std::max(inf_norm(lambda), inf_norm(slack)));
  }
  return r;
}

}  // namespace

void Instance::validate() const {
  const int n = num_vars();
  const int m = num_rows();
  if (H.rows() != n || H.cols() != n)
    throw std::invalid_argument("qp: H must be square and match g");
  if (G.rows() != m || (m > 0 && G.cols() != n))
    throw std::invalid_argument("qp: G/h dimensions inconsistent with the variables");
  if (n > 0) {
    const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if (asym > 1e-10 * scale) throw std::invalid_argument("qp: H must be symmetric");
  }
}

const char* to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::MaxIterations: return "max_iterations";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

double Residuals::max() const { return std::max({primal, dual, complementarity}); }

Residuals kkt_residuals(const Instance& instance, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& lambda) {
  Eigen::VectorXd slack(instance.num_rows());
  if (instance.num_rows() > 0) slack = instance.h - instance.G * z;
  Residuals r = scaled_residuals(instance.H, instance.g, instance.G, instance.h, z, lambda,
                                 slack.cwiseMax(0.0));
  if (instance.num_rows() > 0) {
    // primal violation of the original rows, not the shifted slack identity
    const Eigen::VectorXd gz = instance.G * z;
    r.primal = inf_norm((gz - instance.h).cwiseMax(0.0)) /
               (1.0 + std::max(inf_norm(gz), inf_norm(instance.h)));
    double comp = 0.0;
    for (int i = 0; i < instance.num_rows(); ++i)
      comp = std::max(comp, std::abs(lambda(i) * (gz(i) - instance.h(i))));
    r.complementarity =
        comp / (1.0 + std::max(inf_norm(lambda), inf_norm(gz - instance.h)));
  }
  return r;
}

Result Solver::solve(const Instance& instance, const Settings& settings) {
  return run(instance, settings, nullptr, nullptr);
}

Result Solver::warm_start(const Instance& instance, const Eigen::VectorXd& z0,
                          const Eigen::VectorXd& lambda0, const Settings& settings) {
  instance.validate();
  if (z0.size() == instance.num_vars() && lambda0.size() == instance.num_rows()) {
    const Eigen::VectorXd lam = lambda0.cwiseMax(0.0);
    const Residuals res = kkt_residuals(instance, z0, lam);
    if (res.max() <= settings.tolerance) {
      Result out;
      out.z = z0;
      out.lambda = lam;
      out.status = Status::Optimal;
      out.residuals = res;
      out.iterations = 0;
      out.objective = 0.5 * z0.dot(instance.H * z0) + instance.g.dot(z0);
      return out;
    }
  }
  return run(instance, settings, &z0, &lambda0);
}

Result Solver::run(const Instance& instance, const Settings& settings,
                   const Eigen::VectorXd* z0, const Eigen::VectorXd* lambda0) {
  instance.validate();
  const int n = instance.num_vars();
  const int m = instance.num_rows();

  auto finish = [&](Eigen::VectorXd z, Eigen::VectorXd lambda, int iterations,
                    bool numerical_ok) {
    Result out;
    out.z = std::move(z);
    out.lambda = std::move(lambda);
    out.iterations = iterations;
    out.residuals = kkt_residuals(instance, out.z, out.lambda);
    out.objective = 0.5 * out.z.dot(instance.H * out.z) + instance.g.dot(out.z);
    if (out.residuals.max() <= settings.tolerance)
      out.status = Status::Optimal;  // a late breakdown cannot undo convergence
    else
      out.status = numerical_ok ? Status::MaxIterations : Status::NumericalFailure;
    if (out.status != Status::Optimal && !settings.dump_path.empty())
      dump_instance(instance, settings.dump_path);
    return out;
  };

  // Unconstrained: z = -H^{-1} g.
  if (m == 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(instance.H);
    if (ldlt.info() != Eigen::Success)
      return finish(Eigen::VectorXd::Zero(n), Eigen::VectorXd(), 0, false);
    return finish(ldlt.solve(-instance.g), Eigen::VectorXd(), 0, true);
  }

  // Scaled copies.
  Eigen::MatrixXd H = instance.H;
  Eigen::VectorXd g = instance.g;
  Eigen::MatrixXd G = instance.G;
  Eigen::VectorXd h = instance.h;
  const Scaling scaling = ruiz_equilibrate(H, g, G, h, settings.ruiz_iterations);

  auto unscale_z = [&](const Eigen::VectorXd& zs) {
    return scaling.d_var.cwiseProduct(zs).eval();
  };
  auto unscale_lambda = [&](const Eigen::VectorXd& ls) {
    return scaling.d_row.cwiseProduct(ls).eval();
  };

  // Starting point.
  Eigen::VectorXd z, lambda, s;
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success)
      return finish(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m), 0, false);
    z = ldlt.solve(-g);
  }
  lambda = Eigen::VectorXd::Ones(m);
  bool warm = false;
  if (z0 != nullptr && z0->size() == n && lambda0 != nullptr && lambda0->size() == m) {
    z = scaling.d_var.cwiseInverse().cwiseProduct(*z0);
    lambda = scaling.d_row.cwiseInverse().cwiseProduct(lambda0->cwiseMax(0.0))
                 .cwiseMax(1e-4);
    warm = true;
  }
  {
    const Eigen::VectorXd raw = h - G * z;
    if (warm) {
      s = raw.cwiseMax(1e-4);
    } else {
      const double shift = std::max(0.0, -raw.minCoeff());
      s = (raw.array() + shift + 1.0).matrix();
    }
  }

  // Raw residual norms: a Newton step shrinks these linearly, so backtracking
  // on them cannot stall the way normalized residuals can (their denominators
  // move with the iterate).
  auto merit = [&](const Eigen::VectorXd& zz, const Eigen::VectorXd& ll,
                   const Eigen::VectorXd& ss) {
    const double rd = inf_norm(H * zz + g + G.transpose() * ll);
    const double rp = inf_norm(G * zz + ss - h);
    const double mu = ll.dot(ss) / static_cast<double>(m);
    return std::max({rp, rd, mu});
  };

  Eigen::VectorXd best_z = z, best_lambda = lambda;
  double best_merit = merit(z, lambda, s);

  int iter = 0;
  bool numerical_ok = true;
  for (; iter < settings.max_iterations; ++iter) {
    const Eigen::VectorXd r_dual = H * z + g + G.transpose() * lambda;
    const Eigen::VectorXd r_primal = G * z + s - h;
    const double mu = lambda.dot(s) / static_cast<double>(m);

    {
      const Residuals r = scaled_residuals(H, g, G, h, z, lambda, s);
      const double cur = std::max({r.primal, r.dual, mu});
      if (cur < best_merit) {
        best_merit = cur;
        best_z = z;
        best_lambda = lambda;
      }
      if (r.primal <= settings.target && r.dual <= settings.target && mu <= settings.target)
        break;
    }

    // Normal equations M = H + G' diag(lambda/s) G, reused for both stages.
    const Eigen::VectorXd d = lambda.cwiseQuotient(s);
    Eigen::MatrixXd M = H;
    M.selfadjointView<Eigen::Lower>().rankUpdate(
        (d.cwiseSqrt().asDiagonal() * G).transpose(), 1.0);
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      numerical_ok = false;
      break;
    }

    auto solve_step = [&](const Eigen::VectorXd& r_comp, Eigen::VectorXd& dz,
                          Eigen::VectorXd& dl, Eigen::VectorXd& ds) {
      const Eigen::VectorXd rhs =
          -r_dual - G.transpose() * ((lambda.cwiseProduct(r_primal) - r_comp).cwiseQuotient(s));
      dz = ldlt.solve(rhs);
      ds = -r_primal - G * dz;
      dl = (-r_comp - lambda.cwiseProduct(ds)).cwiseQuotient(s);
    };

    // Predictor (affine scaling direction).
    Eigen::VectorXd dz_aff, dl_aff, ds_aff;
    solve_step(lambda.cwiseProduct(s), dz_aff, dl_aff, ds_aff);
    const double alpha_p_aff = max_step(s, ds_aff);
    const double alpha_d_aff = max_step(lambda, dl_aff);
    const double mu_aff = (lambda + alpha_d_aff * dl_aff).dot(s + alpha_p_aff * ds_aff) /
                          static_cast<double>(m);
    double sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

    // Corrector.
    Eigen::VectorXd dz, dl, ds;
    const Eigen::VectorXd r_comp = lambda.cwiseProduct(s) + dl_aff.cwiseProduct(ds_aff) -
                                   Eigen::VectorXd::Constant(m, sigma * mu);
    solve_step(r_comp, dz, dl, ds);

    double alpha = 0.995 * std::min(max_step(s, ds), max_step(lambda, dl));
    alpha = std::min(alpha, 1.0);

    // Merit safeguard keeps the iteration monotone.
    const double merit_old = merit(z, lambda, s);
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd z_new = z + alpha * dz;
      const Eigen::VectorXd l_new = lambda + alpha * dl;
      const Eigen::VectorXd s_new = s + alpha * ds;
      if (l_new.minCoeff() > 0.0 && s_new.minCoeff() > 0.0 &&
          merit(z_new, l_new, s_new) <= merit_old) {
        z = z_new;
        lambda = l_new;
        s = s_new;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // stalled; best iterate is returned
#ifndef NDEBUG
    assert(merit(z, lambda, s) <= merit_old + 1e-12);
#endif
  }

  {
    const Residuals r = scaled_residuals(H, g, G, h, z, lambda, s);
    const double mu = lambda.dot(s) / static_cast<double>(m);
    const double cur = std::max({r.primal, r.dual, mu});
    if (cur < best_merit) {
      best_z = z;
      best_lambda = lambda;
    }
  }
  return finish(unscale_z(best_z), unscale_lambda(best_lambda), iter, numerical_ok);
}

Result solve(const Instance& instance, const Settings& settings) {
  Solver solver;
  return solver.solve(instance, settings);
}

void dump_instance(const Instance& instance, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("qp: cannot write replay file '" + path + "'");
  out.precision(17);
  out << "qp-instance v1\n";
  out << instance.num_vars() << " " << instance.num_rows() << "\n";
  auto write_matrix = [&out](const Eigen::MatrixXd& mat) {
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j) out << (j ? " " : "") << mat(i, j);
      out << "\n";
    }
  };
  write_matrix(instance.H);
  for (Eigen::Index i = 0; i < instance.g.size(); ++i)
    out << instance.g(i) << (i + 1 < instance.g.size() ? " " : "");
  out << "\n";
  write_matrix(instance.G);
  for (Eigen::Index i = 0; i < instance.h.size(); ++i)
    out << instance.h(i) << (i + 1 < instance.h.size() ? " " : "");
  out << "\n";
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("qp: cannot read replay file '" + path + "'");
  std::string tag, version;
  in >> tag >> version;
  if (tag != "qp-instance" || version != "v1")
    throw std::runtime_error("qp: '" + path + "' is not a qp-instance replay file");
  int n = 0, m = 0;
  in >> n >> m;
  if (!in || n < 0 || m < 0) throw std::runtime_error("qp: bad replay header in '" + path + "'");
  Instance inst;
  inst.H.resize(n, n);
  inst.g.resize(n);
  inst.G.resize(m, n);
  inst.h.resize(m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) in >> inst.H(i, j);
  for (int i = 0; i < n; ++i) in >> inst.g(i);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) in >> inst.G(i, j);
  for (int i = 0; i < m; ++i) in >> inst.h(i);
  if (!in) throw std::runtime_error("qp: truncated replay file '" + path + "'");
  inst.validate();
  return inst;
}

}  // namespace gridmpc::qp
