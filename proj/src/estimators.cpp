#include "fddcs/estimators.hpp"

#include <algorithm>
#include <stdexcept>

#include "fddcs/numerics.hpp"

namespace fddcs {

namespace {

SolverOptions with_epsilon(SolverOptions opts, Index dim, double noise_variance) {
  if (opts.epsilon == 0.0 && noise_variance > 0.0) opts.epsilon = noise_epsilon(dim, noise_variance);
  return opts;
}

std::vector<Index> atoms_in(const std::vector<Index>& support, Index offset, Index m) {
  std::vector<Index> out;
  for (Index i : support)
    if (i >= offset && i < offset + m) out.push_back(i - offset);
  return out;
}

}  // namespace

UplinkObservation simulate_uplink(const CMatrix& channels, const PilotMatrix& pilots, Rng& rng,
                                  bool noiseless) {
  validate_pilots(pilots);
  if (channels.cols() != pilots.users())
    throw std::invalid_argument("simulate_uplink: channel count does not match pilot rows");
  UplinkObservation obs;
  obs.pilots = pilots;
  obs.y = channels * pilots.C() * pilots.S;
  obs.noise_variance = noiseless ? 0.0 : 1.0;
  if (!noiseless) obs.y += complex_gaussian_matrix(obs.y.rows(), obs.y.cols(), rng);
  return obs;
}

DownlinkObservation simulate_downlink(const CMatrix& h, const DownlinkPilots& pilots, Rng& rng,
                                      bool noiseless) {
  if (pilots.A.cols() != h.rows())
    throw std::invalid_argument("simulate_downlink: pilot columns do not match antennas");
  DownlinkObservation obs;
  obs.pilots = pilots;
  obs.y = pilots.A * h;
  obs.noise_variance = noiseless ? 0.0 : 1.0;
  if (!noiseless) obs.y += complex_gaussian_matrix(obs.y.rows(), obs.y.cols(), rng);
  return obs;
}

EstimateReport uplink_ls(const UplinkObservation& obs) {
  EstimateReport r;
  const CMatrix x = obs.pilots.C() * obs.pilots.S;
  r.estimate = least_squares(x.transpose(), obs.y.transpose()).transpose();
  r.underdetermined = obs.pilots.symbols() < obs.pilots.users();
  return r;
}

EstimateReport uplink_sr(const UplinkObservation& obs, const Dictionary& d,
                         const SolverOptions& opts) {
  const Index n = obs.y.rows();
  const Index t = obs.y.cols();
  const Index k = obs.pilots.users();
  const Index m = d.atoms();
  if (d.rows() != n) throw std::invalid_argument("uplink_sr: dictionary rows do not match antennas");
  if (obs.pilots.symbols() != t) throw std::invalid_argument("uplink_sr: pilot length mismatch");
  const CMatrix e = kron_sensing_matrix(obs.pilots, d);
  const CVector y = vec(obs.y);
  EstimateReport r;
  r.code = bpdn(e, y, with_epsilon(opts, n * t, obs.noise_variance));
  r.converged = r.code.converged;
  r.estimate.resize(n, k);
  for (Index u = 0; u < k; ++u) {
    const CVector beta = r.code.vector().segment(u * m, m) / std::sqrt(obs.pilots.power(u));
    r.estimate.col(u) = d.matrix * beta;
    r.supports.push_back(atoms_in(r.code.support, u * m, m));
  }
  return r;
}

EstimateReport uplink_sr_on_supports(const UplinkObservation& obs, const Dictionary& d,
                                     const std::vector<std::vector<Index>>& supports,
                                     const SolverOptions& opts) {
  const Index n = obs.y.rows();
  const Index t = obs.y.cols();
  const Index k = obs.pilots.users();
  const Index m = d.atoms();
  if (d.rows() != n) throw std::invalid_argument("uplink_sr_on_supports: dictionary rows do not match antennas");
  if (static_cast<Index>(supports.size()) != k)
    throw std::invalid_argument("uplink_sr_on_supports: need one candidate support per user");
  std::vector<Index> cols;
  for (Index u = 0; u < k; ++u)
    for (Index j : supports[static_cast<std::size_t>(u)]) {
      if (j < 0 || j >= m) throw std::invalid_argument("uplink_sr_on_supports: atom index out of range");
      cols.push_back(u * m + j);
    }
  if (cols.empty()) throw std::invalid_argument("uplink_sr_on_supports: empty candidate supports");
  const CMatrix e = kron_sensing_matrix(obs.pilots, d);
  CMatrix sub(e.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = e.col(cols[c]);
  EstimateReport r;
  const SparseCode code = bpdn(sub, vec(obs.y), with_epsilon(opts, n * t, obs.noise_variance));
  r.converged = code.converged;
  CVector full = CVector::Zero(m * k);
  for (std::size_t c = 0; c < cols.size(); ++c) full(cols[c]) = code.beta(static_cast<Index>(c), 0);
  r.code = code;
  r.code.beta = full;
  r.code.support.clear();
  for (Index i : code.support) r.code.support.push_back(cols[static_cast<std::size_t>(i)]);
  std::sort(r.code.support.begin(), r.code.support.end());
  r.estimate.resize(n, k);
  for (Index u = 0; u < k; ++u) {
    r.estimate.col(u) = d.matrix * (full.segment(u * m, m) / std::sqrt(obs.pilots.power(u)));
    r.supports.push_back(atoms_in(r.code.support, u * m, m));
  }
  return r;
}

EstimateReport downlink_cs(const DownlinkObservation& obs, const Dictionary& d,
                           const SolverOptions& opts, RecoveryMode mode) {
  const CMatrix& a = obs.pilots.A;
  if (d.rows() != a.cols()) throw std::invalid_argument("downlink_cs: dictionary rows do not match antennas");
  if (obs.y.rows() != a.rows()) throw std::invalid_argument("downlink_cs: observation length mismatch");
  const Index cols = obs.y.cols();
  if (mode == RecoveryMode::mmv && cols < 2)
    throw std::invalid_argument("downlink_cs: mmv needs a multi-antenna UE");
  const CMatrix phi = a * d.matrix;
  EstimateReport r;
  r.estimate.resize(d.rows(), cols);
  if (mode == RecoveryMode::mmv) {
    r.code = mmv_bpdn(phi, obs.y, with_epsilon(opts, a.rows() * cols, obs.noise_variance));
    r.converged = r.code.converged;
    r.estimate = d.matrix * r.code.beta;
    r.supports.assign(static_cast<std::size_t>(cols), r.code.support);
    return r;
  }
  SparseSolver solver(phi);
  const SolverOptions o = with_epsilon(opts, a.rows(), obs.noise_variance);
  for (Index c = 0; c < cols; ++c) {
    r.code = solver.solve(obs.y.col(c), o);
    r.converged = r.converged && r.code.converged;
    r.estimate.col(c) = d.matrix * r.code.vector();
    r.supports.push_back(r.code.support);
  }
  return r;
}

EstimateReport downlink_ls(const DownlinkObservation& obs) {
  EstimateReport r;
  r.estimate = least_squares(obs.pilots.A, obs.y);
  r.underdetermined = obs.pilots.A.rows() < obs.pilots.A.cols();
  return r;
}

double balancing_weight(const CMatrix& a, const Dictionary& d_u, const Dictionary& d_d) {
  const CMatrix ad = a * d_d.matrix;
  const double num = ad.colwise().norm().mean();
  const double den = d_u.matrix.colwise().norm().mean();
  if (!(den > 0.0)) throw std::invalid_argument("balancing_weight: zero uplink dictionary");
  return num / den;
}

JointReport joint_estimate(const UplinkObservation& ul, const DownlinkObservation& dl,
                           const Dictionary& d_u, const Dictionary& d_d,
                           const SolverOptions& opts, std::optional<double> tau) {
  if (ul.pilots.users() != 1) throw std::invalid_argument("joint_estimate: single-user uplink only");
  if (d_u.atoms() != d_d.atoms()) throw std::invalid_argument("joint_estimate: unpaired dictionaries");
  if (dl.y.cols() != 1) throw std::invalid_argument("joint_estimate: single-antenna UE only");
  const CMatrix& a = dl.pilots.A;
  if (d_d.rows() != a.cols() || d_u.rows() != ul.y.rows())
    throw std::invalid_argument("joint_estimate: dictionary dimensions do not match the links");
  const Index m = d_u.atoms();
  const Index nu = d_u.rows();
  const Index td = a.rows();

  // Despreading: y_u = Y_u x^+ with x = sqrt(rho T) s, leaving noise of
  // variance 1 / (rho T) per entry.
  const CMatrix x = ul.pilots.C() * ul.pilots.S;
  const double xx = x.squaredNorm();
  const CVector yu = ul.y * x.adjoint() / xx;
  const double var_u = ul.noise_variance / xx;

  JointReport r;
  r.tau = tau ? *tau : balancing_weight(a, d_u, d_d);
  if (!(r.tau >= 0.0)) throw std::invalid_argument("joint_estimate: tau must be >= 0");
  CMatrix g = CMatrix::Zero(td + nu, 2 * m);
  g.topLeftCorner(td, m) = a * d_d.matrix;
  g.bottomRightCorner(nu, m) = r.tau * d_u.matrix;
  CVector y(td + nu);
  y << dl.y.col(0), r.tau * yu;

  SolverOptions o = opts;
  if (o.epsilon == 0.0) {
    const double ed = dl.noise_variance > 0.0 ? noise_epsilon(td, dl.noise_variance) : 0.0;
    const double eu = var_u > 0.0 ? noise_epsilon(nu, var_u) : 0.0;
    o.epsilon = std::hypot(ed, r.tau * eu);
  }
  r.epsilon = o.epsilon;
  r.code = group_bpdn(g, y, GroupStructure::paired(m), o);
  r.converged = r.code.converged;
  const CVector beta = r.code.vector();
  r.downlink = d_d.matrix * beta.head(m);
  r.uplink = d_u.matrix * beta.tail(m);
  r.support_d = atoms_in(r.code.support, 0, m);
  r.support_u = atoms_in(r.code.support, m, m);
  return r;
}

double nmse(const CMatrix& truth, const CMatrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw std::invalid_argument("nmse: shape mismatch");
  const double t = truth.squaredNorm();
  if (!(t > 0.0)) throw std::invalid_argument("nmse: zero truth");
  return (truth - estimate).squaredNorm() / t;
}

}  // namespace fddcs
