#include "fddcs/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "fddcs/numerics.hpp"

namespace fddcs {

Index GroupStructure::coefficient_count() const {
  Index n = 0;
  for (const auto& g : groups) n += static_cast<Index>(g.size());
  return n;
}

GroupStructure GroupStructure::singletons(Index n) {
  GroupStructure gs;
  gs.groups.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) gs.groups.push_back({i});
  return gs;
}

GroupStructure GroupStructure::paired(Index m) {
  GroupStructure gs;
  gs.groups.reserve(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) gs.groups.push_back({j, j + m});
  return gs;
}

void validate_groups(const GroupStructure& groups, Index n) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& g : groups.groups) {
    if (g.empty()) throw std::invalid_argument("groups: empty group");
    for (Index i : g) {
      if (i < 0 || i >= n) throw std::invalid_argument("groups: index out of range");
      if (seen[static_cast<std::size_t>(i)]++)
        throw std::invalid_argument("groups: index " + std::to_string(i) + " appears twice");
    }
  }
  for (Index i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw std::invalid_argument("groups: index " + std::to_string(i) + " not covered");
}

std::vector<Index> support_of(const CMatrix& beta, double threshold) {
  const RVector norms = beta.rowwise().norm();
  std::vector<Index> s;
  const double top = norms.size() ? norms.maxCoeff() : 0.0;
  if (!(top > 0.0)) return s;
  for (Index i = 0; i < norms.size(); ++i)
    if (norms(i) > threshold * top) s.push_back(i);
  return s;
}

std::vector<Index> group_support(const CMatrix& beta, const GroupStructure& groups,
                                 double threshold) {
  std::vector<double> norms;
  norms.reserve(groups.groups.size());
  double top = 0.0;
  for (const auto& g : groups.groups) {
    double s = 0.0;
    for (Index i : g) s += beta.row(i).squaredNorm();
    norms.push_back(std::sqrt(s));
    top = std::max(top, norms.back());
  }
  std::vector<Index> out;
  if (!(top > 0.0)) return out;
  for (std::size_t k = 0; k < groups.groups.size(); ++k)
    if (norms[k] > threshold * top)
      for (Index i : groups.groups[k]) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

double noise_epsilon(Index dim, double noise_variance) {
  const double d = static_cast<double>(dim);
  return std::sqrt(noise_variance) * std::sqrt(d + 2.0 * std::sqrt(d));
}

namespace {

struct GroupInfo {
  std::vector<Index> members;
  CMatrix hessian;  // Phi_g^H Phi_g
  RVector hdiag;
  bool diagonal = true;
  bool isotropic = true;
  double lmax = 0.0;
};

struct State {
  CMatrix x;   // n x R
  CMatrix gx;  // Gram * x
  std::vector<char> nz;
  // scratch for block updates
  CMatrix xg, b, xn, delta;
};

double rows_norm(const CMatrix& x, const std::vector<Index>& rows) {
  double s = 0.0;
  for (Index i : rows) s += x.row(i).squaredNorm();
  return std::sqrt(s);
}

// Real coordinates of an (n x R) complex block, (Re, Im) interleaved, row-major.
RVector to_real(const CMatrix& z) {
  RVector v(2 * z.size());
  Index k = 0;
  for (Index i = 0; i < z.rows(); ++i)
    for (Index r = 0; r < z.cols(); ++r) {
      v(k++) = z(i, r).real();
      v(k++) = z(i, r).imag();
    }
  return v;
}

CMatrix from_real(const RVector& v, Index rows, Index cols) {
  CMatrix z(rows, cols);
  Index k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index r = 0; r < cols; ++r, k += 2) z(i, r) = Complex(v(k), v(k + 1));
  return z;
}

// Real form of H kron I_R in the interleaved coordinates.
RMatrix real_form(const CMatrix& h, Index rc) {
  const Index na = h.rows();
  RMatrix out = RMatrix::Zero(2 * na * rc, 2 * na * rc);
  for (Index j = 0; j < na; ++j)
    for (Index l = 0; l < na; ++l) {
      const double re = h(j, l).real(), im = h(j, l).imag();
      for (Index r = 0; r < rc; ++r) {
        const Index pj = 2 * (j * rc + r), pl = 2 * (l * rc + r);
        out(pj, pl) = re;
        out(pj, pl + 1) = -im;
        out(pj + 1, pl) = im;
        out(pj + 1, pl + 1) = re;
      }
    }
  return out;
}

}  // namespace

struct SparseSolver::Impl {
  CMatrix phi;
  GroupStructure groups;
  std::vector<GroupInfo> info;
  mutable std::vector<CVector> gram_cols;
  mutable double lipschitz = -1.0;

  Impl(CMatrix p, GroupStructure g) : phi(std::move(p)), groups(std::move(g)) {
    if (phi.rows() < 1 || phi.cols() < 1) throw std::invalid_argument("solver: empty matrix");
    if (!phi.allFinite()) throw std::invalid_argument("solver: non-finite matrix");
    validate_groups(groups, phi.cols());
    gram_cols.resize(static_cast<std::size_t>(phi.cols()));
    info.reserve(groups.groups.size());
    for (const auto& members : groups.groups) {
      GroupInfo gi;
      gi.members = members;
      const auto p = static_cast<Index>(members.size());
      CMatrix cols(phi.rows(), p);
      for (Index a = 0; a < p; ++a) cols.col(a) = phi.col(members[static_cast<std::size_t>(a)]);
      gi.hessian = cols.adjoint() * cols;
      gi.hdiag = gi.hessian.diagonal().real();
      const double dmax = gi.hdiag.maxCoeff();
      double off = 0.0;
      for (Index r = 0; r < p; ++r)
        for (Index c = 0; c < p; ++c)
          if (r != c) off = std::max(off, std::abs(gi.hessian(r, c)));
      gi.diagonal = off <= 1e-13 * std::max(dmax, 1e-300);
      gi.isotropic = gi.diagonal && (dmax - gi.hdiag.minCoeff()) <= 1e-13 * dmax;
      if (gi.diagonal) {
        gi.lmax = dmax;
      } else {
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(gi.hessian, Eigen::EigenvaluesOnly);
        gi.lmax = eig.eigenvalues().maxCoeff();
      }
      info.push_back(std::move(gi));
    }
  }

  const CVector& gram_col(Index i) const {
    CVector& c = gram_cols[static_cast<std::size_t>(i)];
    if (c.size() == 0) c = phi.adjoint() * phi.col(i);
    return c;
  }

  double lipschitz_constant() const {
    if (lipschitz < 0.0) {
      // 20 power iterations on Phi^H Phi, then a 1% safety margin.
      CVector v = CVector::Ones(phi.cols()).normalized();
      double est = 0.0;
      for (int k = 0; k < 20; ++k) {
        const CVector w = phi.adjoint() * (phi * v);
        est = w.norm();
        if (!(est > 0.0)) break;
        v = w / est;
      }
      lipschitz = 1.01 * std::max(est, 1e-300);
    }
    return lipschitz;
  }

  CMatrix apply_phi(const CMatrix& x, const std::vector<char>& nz) const {
    CMatrix px = CMatrix::Zero(phi.rows(), x.cols());
    for (std::size_t g = 0; g < info.size(); ++g)
      if (nz[g])
        for (Index i : info[g].members) px.noalias() += phi.col(i) * x.row(i);
    return px;
  }

  CMatrix residual(const CMatrix& y, const State& s) const { return y - apply_phi(s.x, s.nz); }

  void refresh(State& s) const {
    for (std::size_t g = 0; g < info.size(); ++g) s.nz[g] = rows_norm(s.x, info[g].members) > 0.0;
    s.gx = phi.adjoint() * apply_phi(s.x, s.nz);
  }

  double penalty(const CMatrix& x) const {
    double p = 0.0;
    for (const GroupInfo& gi : info) p += rows_norm(x, gi.members);
    return p;
  }

  double max_group_correlation(const CMatrix& m) const {
    double top = 0.0;
    for (const GroupInfo& gi : info) top = std::max(top, rows_norm(m, gi.members));
    return top;
  }

  void prox(CMatrix& v, double t) const {
    for (const GroupInfo& gi : info) {
      const double n = rows_norm(v, gi.members);
      const double scale = n > t ? 1.0 - t / n : 0.0;
      for (Index i : gi.members) v.row(i) *= scale;
    }
  }

  // Exact minimizer of 1/2 x^H H x - Re<b, x> + lambda ||x|| over one group.
  void group_minimize(const GroupInfo& gi, double lambda, State& s) const {
    const double bn = s.b.norm();
    s.xn.resize(s.b.rows(), s.b.cols());
    if (bn <= lambda || !(gi.lmax > 0.0)) {
      s.xn.setZero();
      return;
    }
    if (gi.isotropic) {
      s.xn = ((1.0 - lambda / bn) / gi.hdiag(0)) * s.b;
      return;
    }
    if (gi.diagonal && gi.hdiag.minCoeff() > 0.0) {
      // x_i = b_i r / (h_i r + lambda) where r = ||x|| solves
      // sum_i ||b_i||^2 / (h_i r + lambda)^2 = 1. The left side is convex and
      // decreasing in r, so Newton from r = 0 increases monotonically.
      const RVector w = s.b.rowwise().squaredNorm();
      double r = 0.0;
      for (int it = 0; it < 100; ++it) {
        double psi = 0.0, dpsi = 0.0;
        for (Index i = 0; i < w.size(); ++i) {
          const double den = gi.hdiag(i) * r + lambda;
          psi += w(i) / (den * den);
          dpsi -= 2.0 * w(i) * gi.hdiag(i) / (den * den * den);
        }
        const double step = (psi - 1.0) / dpsi;
        r -= step;
        if (std::abs(step) <= 1e-15 * std::max(r, 1e-300)) break;
      }
      for (Index i = 0; i < w.size(); ++i)
        s.xn.row(i) = s.b.row(i) * (r / (gi.hdiag(i) * r + lambda));
      return;
    }
    // General block: proximal gradient iterations.
    CMatrix x = s.xg;
    const double step = 1.0 / gi.lmax;
    for (int it = 0; it < 500; ++it) {
      CMatrix v = x - step * (gi.hessian * x - s.b);
      const double vn = v.norm();
      if (vn > lambda * step)
        v *= 1.0 - lambda * step / vn;
      else
        v.setZero();
      const double d = (v - x).norm();
      x = std::move(v);
      if (d <= 1e-15 * std::max(x.norm(), 1e-300)) break;
    }
    s.xn = x;
  }

  // Minimizes over group g with the others fixed; returns the squared change.
  double update_group(std::size_t g, double lambda, const CMatrix& c, State& s) const {
    const GroupInfo& gi = info[g];
    const auto p = static_cast<Index>(gi.members.size());
    const Index rc = s.x.cols();
    s.xg.resize(p, rc);
    s.b.resize(p, rc);
    for (Index a = 0; a < p; ++a) {
      const Index i = gi.members[static_cast<std::size_t>(a)];
      s.xg.row(a) = s.x.row(i);
      s.b.row(a) = c.row(i) - s.gx.row(i);
    }
    s.b.noalias() += gi.hessian * s.xg;
    group_minimize(gi, lambda, s);
    s.delta = s.xn - s.xg;
    const double d2 = s.delta.squaredNorm();
    if (d2 == 0.0) return 0.0;
    for (Index a = 0; a < p; ++a) {
      const Index i = gi.members[static_cast<std::size_t>(a)];
      s.x.row(i) = s.xn.row(a);
      const CVector& col = gram_col(i);
      for (Index r = 0; r < rc; ++r) s.gx.col(r) += s.delta(a, r) * col;
    }
    s.nz[g] = s.xn.squaredNorm() > 0.0;
    return d2;
  }

  double max_group_norm2(const State& s, const std::vector<std::size_t>& which) const {
    double m = 0.0;
    for (std::size_t g : which) {
      double n2 = 0.0;
      for (Index i : info[g].members) n2 += s.x.row(i).squaredNorm();
      m = std::max(m, n2);
    }
    return m;
  }

  // Full passes alternate with passes over the nonzero groups until the
  // largest change is below tol relative to the largest group.
  int coordinate_descent(double lambda, const CMatrix& c, State& s, double tol,
                         int max_sweeps) const {
    const double tol2 = tol * tol;
    int sweeps = 0;
    std::vector<std::size_t> active;
    while (sweeps < max_sweeps) {
      bool status_changed = false;
      double maxd = 0.0;
      for (std::size_t g = 0; g < info.size(); ++g) {
        const char was = s.nz[g];
        maxd = std::max(maxd, update_group(g, lambda, c, s));
        status_changed = status_changed || (s.nz[g] != was);
      }
      ++sweeps;
      active.clear();
      for (std::size_t g = 0; g < info.size(); ++g)
        if (s.nz[g]) active.push_back(g);
      if (!status_changed && maxd <= tol2 * max_group_norm2(s, active)) break;
      while (sweeps < max_sweeps) {
        maxd = 0.0;
        for (std::size_t g : active) maxd = std::max(maxd, update_group(g, lambda, c, s));
        ++sweeps;
        if (maxd <= tol2 * max_group_norm2(s, active)) break;
      }
    }
    return sweeps;
  }

  int accelerated_gradient(double lambda, const CMatrix& c, State& s, double tol,
                           int max_iter) const {
    const double l = lipschitz_constant();
    CMatrix x = s.x;
    CMatrix z = x;
    double t = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
      CMatrix v = z - (phi.adjoint() * (phi * z) - c) / l;
      prox(v, lambda / l);
      const CMatrix step = v - x;
      // Momentum pointing uphill: restart.
      if ((z - v).cwiseProduct(step.conjugate()).sum().real() > 0.0) t = 1.0;
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = v + ((t - 1.0) / tn) * step;
      t = tn;
      x = std::move(v);
      if (it > 0 && step.norm() <= tol * std::max(x.norm(), 1e-300)) {
        ++it;
        break;
      }
    }
    s.x = x;
    refresh(s);
    return it;
  }

  // Fixed-point residual F = x - prox(x - (Gx - c) / L); fills `p` with the
  // prox point and `act` with the groups it keeps.
  double fixed_point_residual(const CMatrix& x, const CMatrix& gx, const CMatrix& c, double l,
                              double tau, CMatrix& p, std::vector<std::size_t>* act) const {
    p = x - (gx - c) / l;
    if (act) act->clear();
    for (std::size_t g = 0; g < info.size(); ++g) {
      const double n = rows_norm(p, info[g].members);
      if (n > tau) {
        for (Index i : info[g].members) p.row(i) *= 1.0 - tau / n;
        if (act) act->push_back(g);
      } else {
        for (Index i : info[g].members) p.row(i).setZero();
      }
    }
    return (x - p).norm();
  }

  // Semismooth Newton on F(x) = 0. The generalized Jacobian of the prox is
  // zero on groups it kills, so the Newton system lives on the kept groups
  // only. Rejected steps fall back to one coordinate-descent pass.
  int semismooth_newton(double lambda, const CMatrix& c, State& s, double tol,
                        int max_iter) const {
    const double l = lipschitz_constant();
    const double tau = lambda / l;
    const Index rc = s.x.cols();
    refresh(s);
    CMatrix p, pt;
    std::vector<std::size_t> act;
    std::vector<double> recent;
    bool last_cd = false;
    int it = 0;
    for (; it < max_iter; ++it) {
      const double fn = fixed_point_residual(s.x, s.gx, c, l, tau, p, &act);
      // Nonmonotone reference: the largest of the last few residuals.
      recent.push_back(fn);
      if (recent.size() > 5) recent.erase(recent.begin());
      const double ref = *std::max_element(recent.begin(), recent.end());
      const double scale = std::max(p.norm(), 1e-300);
      if (fn <= 1e-13 * scale) break;
      if (last_cd && fn <= tol * scale) break;

      std::vector<Index> mem;
      std::vector<Index> start;
      for (std::size_t g : act) {
        start.push_back(static_cast<Index>(mem.size()));
        for (Index i : info[g].members) mem.push_back(i);
      }
      start.push_back(static_cast<Index>(mem.size()));
      const auto na = static_cast<Index>(mem.size());
      // More kept coefficients than measurements: the restricted Hessian is
      // singular and Newton steps are unreliable, so sweep coordinates until
      // the kept set is small enough.
      if (na > phi.rows()) {
        it += coordinate_descent(lambda, c, s, tol, std::min(10, max_iter - it)) - 1;
        refresh(s);
        last_cd = true;
        recent.clear();
        continue;
      }
      last_cd = false;
      std::vector<char> in_act(info.size(), 0);
      for (std::size_t g : act) in_act[g] = 1;

      CMatrix h(na, na), za(na, rc), fa(na, rc), q = CMatrix::Zero(na, rc);
      for (Index j = 0; j < na; ++j) {
        const CVector& col = gram_col(mem[static_cast<std::size_t>(j)]);
        for (Index k = 0; k < na; ++k) h(k, j) = col(mem[static_cast<std::size_t>(k)]);
        const Index i = mem[static_cast<std::size_t>(j)];
        za.row(j) = s.x.row(i) - (s.gx.row(i) - c.row(i)) / l;
        fa.row(j) = s.x.row(i) - p.row(i);
      }
      // Coupling to the groups the step sets to zero.
      for (std::size_t g = 0; g < info.size(); ++g) {
        if (in_act[g] || !s.nz[g]) continue;
        for (Index i : info[g].members) {
          const CVector& col = gram_col(i);
          for (Index j = 0; j < na; ++j)
            q.row(j) += col(mem[static_cast<std::size_t>(j)]) * s.x.row(i);
        }
      }
      // M = I - P + P H / L with P = blockdiag((1 - tau/|z_g|) I + tau/|z_g| u u^T).
      RMatrix m = real_form(h, rc) / l;
      RVector rhs = -to_real(fa);
      RVector qr = to_real(q) / l;
      const RVector zr = to_real(za);
      for (std::size_t a = 0; a < act.size(); ++a) {
        const Index b0 = 2 * rc * start[a];
        const Index len = 2 * rc * (start[a + 1] - start[a]);
        const RVector u = zr.segment(b0, len).normalized();
        const double beta = tau / zr.segment(b0, len).norm();
        const double alpha = 1.0 - beta;
        const RMatrix rows = m.middleRows(b0, len);
        m.middleRows(b0, len) = alpha * rows + beta * u * (u.transpose() * rows);
        m.block(b0, b0, len, len) -= alpha * RMatrix::Identity(len, len) + beta * u * u.transpose();
        m.block(b0, b0, len, len) += RMatrix::Identity(len, len);
        rhs.segment(b0, len) += alpha * qr.segment(b0, len) + beta * u * u.dot(qr.segment(b0, len));
      }
      // Regularization proportional to the residual keeps the step bounded on
      // near-collinear atoms and vanishes at the solution.
      m.diagonal().array() += std::min(1.0, fn / scale);
      const RVector d = m.partialPivLu().solve(rhs);

      bool accepted = false;
      if (d.allFinite()) {
        const CMatrix da = from_real(d, na, rc);
        State t;
        t.nz.assign(info.size(), 0);
        for (double step = 1.0; step >= 0x1p-12 && !accepted; step *= 0.5) {
          t.x = CMatrix::Zero(s.x.rows(), rc);
          for (Index j = 0; j < na; ++j) {
            const Index i = mem[static_cast<std::size_t>(j)];
            t.x.row(i) = s.x.row(i) + step * da.row(j);
          }
          if (step < 1.0)
            for (std::size_t g = 0; g < info.size(); ++g)
              if (!in_act[g])
                for (Index i : info[g].members) t.x.row(i) = (1.0 - step) * s.x.row(i);
          refresh(t);
          const double ft = fixed_point_residual(t.x, t.gx, c, l, tau, pt, nullptr);
          if (ft <= (1.0 - 0.1 * step) * ref) {
            s.x = std::move(t.x);
            s.gx = std::move(t.gx);
            s.nz = std::move(t.nz);
            accepted = true;
          }
        }
      }
      if (!accepted) {
        coordinate_descent(lambda, c, s, 0.0, 1);
        refresh(s);
        last_cd = true;
        if (fn <= tol * scale) break;
      }
    }
    return it;
  }

  // d||r||^2 / d lambda at an optimal point: 2 lambda u^T J^{-1} u on the
  // support, with J the Hessian of the smooth restricted objective and u the
  // stacked unit group directions.
  double residual_slope(double lambda, const State& s) const {
    std::vector<Index> mem;
    std::vector<Index> start;
    for (std::size_t g = 0; g < info.size(); ++g) {
      if (!s.nz[g]) continue;
      start.push_back(static_cast<Index>(mem.size()));
      for (Index i : info[g].members) mem.push_back(i);
    }
    if (mem.empty()) return 0.0;
    start.push_back(static_cast<Index>(mem.size()));
    const auto na = static_cast<Index>(mem.size());
    const Index rc = s.x.cols();
    CMatrix h(na, na), xa(na, rc);
    for (Index j = 0; j < na; ++j) {
      const CVector& col = gram_col(mem[static_cast<std::size_t>(j)]);
      for (Index k = 0; k < na; ++k) h(k, j) = col(mem[static_cast<std::size_t>(k)]);
      xa.row(j) = s.x.row(mem[static_cast<std::size_t>(j)]);
    }
    RMatrix jac = real_form(h, rc);
    const RVector xr = to_real(xa);
    RVector dir(xr.size());
    for (std::size_t a = 0; a + 1 < start.size(); ++a) {
      const Index b0 = 2 * rc * start[a];
      const Index len = 2 * rc * (start[a + 1] - start[a]);
      const double nrm = xr.segment(b0, len).norm();
      const RVector u = xr.segment(b0, len) / nrm;
      dir.segment(b0, len) = u;
      jac.block(b0, b0, len, len) +=
          (lambda / nrm) * (RMatrix::Identity(len, len) - u * u.transpose());
    }
    const RVector sol = jac.ldlt().solve(dir);
    const double v = 2.0 * lambda * dir.dot(sol);
    return std::isfinite(v) && v > 0.0 ? v : -1.0;
  }

  int inner_solve(double lambda, const CMatrix& c, State& s, double tol,
                  const SolverOptions& opts) const {
    switch (opts.inner) {
      case InnerSolver::coordinate_descent:
        return coordinate_descent(lambda, c, s, tol, opts.max_iterations);
      case InnerSolver::accelerated_gradient:
        return accelerated_gradient(lambda, c, s, tol, opts.max_iterations);
      case InnerSolver::semismooth_newton:
        break;
    }
    return semismooth_newton(lambda, c, s, tol, opts.max_iterations);
  }

  SparseCode solve(const CMatrix& y, const SolverOptions& opts, const SparseCode* warm) const;
};

SparseCode SparseSolver::Impl::solve(const CMatrix& y, const SolverOptions& opts,
                                     const SparseCode* warm) const {
  if (y.rows() != phi.rows())
    throw std::invalid_argument("solver: measurement rows do not match Phi");
  if (opts.epsilon < 0.0) throw std::invalid_argument("solver: epsilon must be >= 0");
  if (!y.allFinite()) throw std::invalid_argument("solver: non-finite measurements");

  const Index n = phi.cols();
  const Index rcols = y.cols();
  const double ynorm = y.norm();
  // epsilon = 0 is read as "as close to interpolation as double precision allows".
  const double eps = opts.epsilon > 0.0 ? opts.epsilon : 1e-12 * ynorm;

  SparseCode out;
  out.beta = CMatrix::Zero(n, rcols);
  out.residual_norm = ynorm;

  const CMatrix c = phi.adjoint() * y;
  const double lambda_max = max_group_correlation(c);
  out.lambda = lambda_max;
  if (ynorm <= eps) {
    out.converged = true;
    return out;
  }
  if (!(lambda_max > 0.0)) return out;  // y orthogonal to range(Phi): infeasible

  State s;
  s.x = CMatrix::Zero(n, rcols);
  s.gx = CMatrix::Zero(n, rcols);
  s.nz.assign(info.size(), 0);
  // Cold starts follow the path down from lambda_max so each inner solve
  // begins near its solution.
  double lambda = 0.5 * lambda_max;
  if (warm && warm->beta.rows() == n && warm->beta.cols() == rcols && warm->lambda > 0.0 &&
      warm->lambda < lambda_max && warm->beta.allFinite()) {
    s.x = warm->beta;
    refresh(s);
    lambda = warm->lambda;
  }

  const double delta = std::clamp(opts.residual_tolerance, 1e-12, 0.5);
  // The residual must be resolved to a fraction of the acceptance window.
  const double inner_tol =
      std::max(1e-14, std::min(opts.objective_tolerance, 0.1 * delta * eps / ynorm));
  const double log_eps = std::log(eps);
  // Steps aim at the middle of the acceptance window, in log units.
  const double aim = 0.5 * std::log1p(-delta);

  struct Point {
    double log_lambda;
    double f;  // log ||r|| - log eps
  };
  std::optional<Point> lo;  // feasible side
  Point hi{std::log(lambda_max), std::log(ynorm) - log_eps};
  CMatrix lo_x;
  std::vector<char> lo_nz;
  double lo_res = 0.0;
  std::optional<Point> prev;

  int total = 0;
  int outer = 0;
  bool hit = false;
  for (; outer < opts.max_outer_iterations; ++outer) {
    total += inner_solve(lambda, c, s, inner_tol, opts);
    const double res = residual(y, s).norm();
    const Point cur{std::log(lambda), std::log(std::max(res, 1e-300)) - log_eps};
    if (res <= eps) {
      if (!lo || cur.log_lambda > lo->log_lambda) {
        lo = cur;
        lo_x = s.x;
        lo_nz = s.nz;
        lo_res = res;
      }
      if (res >= eps * (1.0 - delta)) {
        hit = true;
        ++outer;
        break;
      }
    } else if (cur.log_lambda < hi.log_lambda) {
      hi = cur;
    }

    // Newton in log lambda using the exact slope of the residual path,
    // safeguarded by the bracket; secant or bisection otherwise.
    const double slope = residual_slope(lambda, s);
    const double dlog = slope > 0.0 ? lambda * slope / (2.0 * res * res) : 0.0;
    double next = dlog > 0.0 ? cur.log_lambda - (cur.f - aim) / dlog
                             : std::numeric_limits<double>::quiet_NaN();
    if (lo) {
      const double width = hi.log_lambda - lo->log_lambda;
      if (width <= 1e-13) break;
      const double guard = 1e-3 * width;
      auto inside = [&](double v) {
        return v > lo->log_lambda + guard && v < hi.log_lambda - guard;
      };
      if (!inside(next)) next = lo->log_lambda - (lo->f - aim) * width / (hi.f - lo->f);
      if (!inside(next)) next = lo->log_lambda + 0.5 * width;
    } else if (std::isnan(next)) {
      // Still infeasible without a slope: extrapolate a local power law.
      double k = 1.0;
      if (prev && std::abs(cur.log_lambda - prev->log_lambda) > 1e-12)
        k = std::clamp((cur.f - prev->f) / (cur.log_lambda - prev->log_lambda), 0.2, 5.0);
      next = cur.log_lambda - (cur.f - aim) / k;
    }
    if (!lo) next = std::clamp(next, cur.log_lambda - std::log(2.0), cur.log_lambda - 1e-6);
    prev = cur;
    lambda = std::exp(next);
  }

  out.iterations = total;
  out.outer_iterations = outer;
  if (!lo) {
    out.beta = s.x;
    out.residual_norm = residual(y, s).norm();
    out.lambda = lambda;
    out.converged = false;
    out.support = group_support(out.beta, groups, opts.support_threshold);
    return out;
  }
  State fin;
  fin.x = std::move(lo_x);
  fin.nz = std::move(lo_nz);
  const CMatrix r = residual(y, fin);
  out.beta = fin.x;
  out.residual_norm = lo_res;
  out.lambda = std::exp(lo->log_lambda);
  out.converged = hit || (hi.log_lambda - lo->log_lambda) <= 1e-13;

  // Duality gap of the penalized problem at the returned lambda.
  const CMatrix corr = phi.adjoint() * r;
  const double primal = out.lambda * penalty(out.beta) + 0.5 * r.squaredNorm();
  const double dn = max_group_correlation(corr);
  const double scale = dn > out.lambda ? out.lambda / dn : 1.0;
  const double dual = scale * r.cwiseProduct(y.conjugate()).sum().real() -
                      0.5 * scale * scale * r.squaredNorm();
  out.duality_gap = std::max(0.0, primal - dual);
  out.support = group_support(out.beta, groups, opts.support_threshold);
  return out;
}

SparseSolver::SparseSolver(CMatrix phi)
    : SparseSolver(std::move(phi), GroupStructure{}) {}

SparseSolver::SparseSolver(CMatrix phi, GroupStructure groups) {
  if (groups.groups.empty()) groups = GroupStructure::singletons(phi.cols());
  impl_ = std::make_unique<Impl>(std::move(phi), std::move(groups));
}

SparseSolver::~SparseSolver() = default;
SparseSolver::SparseSolver(SparseSolver&&) noexcept = default;
SparseSolver& SparseSolver::operator=(SparseSolver&&) noexcept = default;

SparseCode SparseSolver::solve(const CMatrix& y, const SolverOptions& opts,
                               const SparseCode* warm) const {
  return impl_->solve(y, opts, warm);
}

const CMatrix& SparseSolver::matrix() const { return impl_->phi; }
const GroupStructure& SparseSolver::groups() const { return impl_->groups; }

SparseCode bpdn(const CMatrix& phi, const CVector& y, const SolverOptions& opts) {
  return SparseSolver(phi).solve(y, opts);
}

SparseCode mmv_bpdn(const CMatrix& phi, const CMatrix& y, const SolverOptions& opts) {
  return SparseSolver(phi).solve(y, opts);
}

SparseCode group_bpdn(const CMatrix& g, const CVector& y, const GroupStructure& groups,
                      const SolverOptions& opts) {
  if (groups.groups.empty()) throw std::invalid_argument("group_bpdn: empty group map");
  return SparseSolver(g, groups).solve(y, opts);
}

DebiasResult debias_on_support(const CMatrix& phi, const CVector& y,
                               const std::vector<Index>& support) {
  if (support.empty()) throw std::invalid_argument("debias_on_support: empty support");
  if (static_cast<Index>(support.size()) > phi.rows())
    throw std::invalid_argument("debias_on_support: support larger than row count");
  if (y.size() != phi.rows()) throw std::invalid_argument("debias_on_support: dimension mismatch");
  CMatrix sub(phi.rows(), static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k] < 0 || support[k] >= phi.cols())
      throw std::invalid_argument("debias_on_support: support index out of range");
    sub.col(static_cast<Index>(k)) = phi.col(support[k]);
  }
  DebiasResult out;
  out.rank_deficient = numerical_rank(sub) < sub.cols();
  const CVector coef = least_squares(sub, y);
  out.beta = CVector::Zero(phi.cols());
  for (std::size_t k = 0; k < support.size(); ++k) out.beta(support[k]) = coef(static_cast<Index>(k));
  return out;
}

}  // namespace fddcs
