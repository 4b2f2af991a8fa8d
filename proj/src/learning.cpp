#include "fddcs/learning.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fddcs {

namespace {

CMatrix stack_columns(const std::vector<CVector>& v) {
  CMatrix m(v.front().size(), static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m.col(static_cast<Index>(i)) = v[i];
  return m;
}

std::vector<CVector> normalized(std::vector<CVector> v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty training set");
  const Index n = v.front().size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].size() != n || n == 0)
      throw std::invalid_argument(std::string(what) + ": sample " + std::to_string(i) +
                                  " has a different dimension");
    const double c = v[i].norm();
    if (!(c > 0.0) || !std::isfinite(c))
      throw std::invalid_argument(std::string(what) + ": sample " + std::to_string(i) +
                                  " is zero or not finite");
    v[i] /= c;
  }
  return v;
}

CMatrix initial_dictionary(const LearnConfig& c, Index n) {
  switch (c.init) {
    case DictionaryInit::odft:
      return dft_overcomplete(n, c.atom_count).matrix;
    case DictionaryInit::random: {
      Rng rng = substream(c.seed, 0, 0x1d1c7);
      CMatrix d = complex_gaussian_matrix(n, c.atom_count, rng);
      d.colwise().normalize();
      return d;
    }
    case DictionaryInit::provided:
      break;
  }
  if (!c.initial) throw std::invalid_argument("learn: provided init without a matrix");
  if (c.initial->rows() != n || c.initial->cols() != c.atom_count)
    throw std::invalid_argument("learn: provided dictionary has the wrong shape");
  CMatrix d = *c.initial;
  project_to_unit_ball(d);
  return d;
}

// Atom sweep without replacement. `r` holds H - D codes on entry and exit.
std::vector<char> atom_sweep(CMatrix& d, CMatrix& r, CMatrix& codes, const std::vector<char>* skip,
                             std::vector<double>* trace) {
  const Index m = d.cols();
  const Index l = r.cols();
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  double err = r.squaredNorm();
  if (trace) trace->push_back(err);
  std::vector<Index> omega;
  for (Index k = 0; k < m; ++k) {
    omega.clear();
    for (Index i = 0; i < l; ++i)
      if (codes(k, i) != 0.0 && !(skip && (*skip)[static_cast<std::size_t>(i)])) omega.push_back(i);
    if (!omega.empty()) {
      used[static_cast<std::size_t>(k)] = 1;
      const auto w = static_cast<Index>(omega.size());
      CMatrix e(d.rows(), w);
      double before = 0.0;
      for (Index a = 0; a < w; ++a) {
        const Index i = omega[static_cast<std::size_t>(a)];
        before += r.col(i).squaredNorm();
        e.col(a) = r.col(i) + d.col(k) * codes(k, i);
      }
      // Best rank-one fit u x^T of E: u is the top eigenvector of E E^H.
      const CMatrix g = e * e.adjoint();
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(g);
      const CVector u = eig.eigenvectors().col(g.rows() - 1);
      const Eigen::RowVectorXcd x = u.adjoint() * e;
      double after = 0.0;
      for (Index a = 0; a < w; ++a) {
        const Index i = omega[static_cast<std::size_t>(a)];
        r.col(i) = e.col(a) - u * x(a);
        codes(k, i) = x(a);
        after += r.col(i).squaredNorm();
      }
      d.col(k) = u;
      err += after - before;
    }
    if (trace) trace->push_back(err);
  }
  return used;
}

// Atoms to replace: unused ones, then the later atom of every pair with
// |<d_i, d_j>| > 0.99.
std::vector<char> replacement_mask(const CMatrix& d, const std::vector<char>& used) {
  const Index m = d.cols();
  std::vector<char> mask(static_cast<std::size_t>(m), 0);
  for (Index k = 0; k < m; ++k) mask[static_cast<std::size_t>(k)] = !used[static_cast<std::size_t>(k)];
  CMatrix n = d;
  for (Index k = 0; k < m; ++k) {
    const double c = n.col(k).norm();
    if (c > 0.0) n.col(k) /= c;
  }
  const CMatrix g = n.adjoint() * n;
  for (Index j = 0; j < m; ++j) {
    if (mask[static_cast<std::size_t>(j)]) continue;
    for (Index i = 0; i < j; ++i)
      if (!mask[static_cast<std::size_t>(i)] && std::abs(g(i, j)) > 0.99) {
        mask[static_cast<std::size_t>(j)] = 1;
        break;
      }
  }
  return mask;
}

// Removes a masked atom's contribution from the residual and zeroes its codes.
void drop_atoms(const CMatrix& d, CMatrix& r, CMatrix& codes, const std::vector<char>& mask) {
  for (Index k = 0; k < d.cols(); ++k) {
    if (!mask[static_cast<std::size_t>(k)]) continue;
    r.noalias() += d.col(k) * codes.row(k);
    codes.row(k).setZero();
  }
}

// Non-skipped sample indices ordered by decreasing residual energy.
std::vector<Index> worst_samples(const RVector& energy, const std::vector<char>* skip) {
  std::vector<Index> idx;
  for (Index i = 0; i < energy.size(); ++i)
    if (!(skip && (*skip)[static_cast<std::size_t>(i)])) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return energy(a) > energy(b); });
  return idx;
}

struct CodingStats {
  double mean_l0 = 0.0;
  double mean_residual = 0.0;
  Index skipped = 0;
  double feasible_fraction = 0.0;
};

CodingStats coding_stats(const std::vector<SparseCode>& codes, double eps, Index group_size) {
  CodingStats s;
  Index ok = 0;
  Index feasible = 0;
  for (const SparseCode& c : codes) {
    if (!c.converged) {
      ++s.skipped;
      continue;
    }
    ++ok;
    s.mean_l0 += static_cast<double>(c.l0()) / static_cast<double>(group_size);
    s.mean_residual += c.residual_norm;
    if (c.residual_norm <= eps * (1.0 + 1e-6)) ++feasible;
  }
  if (ok > 0) {
    s.mean_l0 /= static_cast<double>(ok);
    s.mean_residual /= static_cast<double>(ok);
  }
  s.feasible_fraction = static_cast<double>(feasible) / static_cast<double>(codes.size());
  return s;
}

std::vector<char> skip_mask(const std::vector<SparseCode>& codes) {
  std::vector<char> skip(codes.size(), 0);
  for (std::size_t i = 0; i < codes.size(); ++i) skip[i] = !codes[i].converged;
  return skip;
}

// Tracks the best iterate and the early-stop rule shared by both learners.
class IterateTracker {
 public:
  explicit IterateTracker(const LearnConfig& c) : config_(c) {}

  // Returns true when this iterate became the best one.
  bool offer(int iteration, const CodingStats& s) {
    history_.push_back(s.mean_l0);
    const bool ok = s.feasible_fraction >= config_.feasible_fraction;
    bool better = false;
    if (best_ == 0) {
      better = true;
    } else if (ok != best_feasible_) {
      better = ok;
    } else if (ok) {
      better = s.mean_l0 < best_l0_;
    } else {
      better = s.feasible_fraction > best_fraction_ ||
               (s.feasible_fraction == best_fraction_ && s.mean_l0 < best_l0_);
    }
    if (better) {
      best_ = iteration;
      best_l0_ = s.mean_l0;
      best_feasible_ = ok;
      best_fraction_ = s.feasible_fraction;
    }
    return better;
  }

  bool should_stop() const {
    const auto w = static_cast<std::size_t>(config_.early_stop_window);
    if (w == 0 || history_.size() <= w) return false;
    const double then = history_[history_.size() - 1 - w];
    const double now = history_.back();
    return then - now < config_.early_stop_improvement * then;
  }

  int best() const { return best_; }
  bool feasible() const { return best_feasible_; }

 private:
  const LearnConfig& config_;
  std::vector<double> history_;
  int best_ = 0;
  double best_l0_ = 0.0;
  bool best_feasible_ = false;
  double best_fraction_ = 0.0;
};

Dictionary make_learned(CMatrix m, DictionaryOrigin origin, const std::string& link) {
  Dictionary d;
  project_to_unit_ball(m);
  d.matrix = std::move(m);
  d.origin = origin;
  d.label = to_string(origin);
  d.link = link;
  return d;
}

// Warm starts for the next coding pass: the K-SVD coefficients with the
// previous lambda.
std::vector<SparseCode> warm_from(const std::vector<SparseCode>& prev, const CMatrix& codes) {
  std::vector<SparseCode> warm(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    warm[i].lambda = prev[i].lambda;
    warm[i].beta = codes.col(static_cast<Index>(i));
  }
  return warm;
}

}  // namespace

TrainingSet make_training_set(std::vector<CVector> samples) {
  TrainingSet t;
  t.samples = normalized(std::move(samples), "training set");
  return t;
}

TrainingSet make_paired_training_set(std::vector<CVector> uplink, std::vector<CVector> downlink) {
  if (uplink.size() != downlink.size())
    throw std::invalid_argument("training set: uplink and downlink counts differ (unpaired samples)");
  TrainingSet t;
  t.samples = normalized(std::move(uplink), "training set uplink");
  t.downlink = normalized(std::move(downlink), "training set downlink");
  return t;
}

CVector add_measurement_noise(const CVector& h, double snr_db, Rng& rng) {
  if (std::isnan(snr_db)) throw std::invalid_argument("learning SNR is NaN");
  if (std::isinf(snr_db) && snr_db > 0.0) return h;
  if (std::isinf(snr_db)) throw std::invalid_argument("learning SNR of -inf");
  const double var = h.squaredNorm() / (static_cast<double>(h.size()) * db_to_linear(snr_db));
  return h + complex_gaussian_matrix(h.size(), 1, rng, var);
}

TrainingSet corrupt_training_set(const TrainingSet& set, double snr_db, Rng& rng) {
  std::vector<CVector> u, d;
  u.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    u.push_back(add_measurement_noise(set.samples[i], snr_db, rng));
    if (set.paired()) d.push_back(add_measurement_noise(set.downlink[i], snr_db, rng));
  }
  TrainingSet out = set.paired() ? make_paired_training_set(std::move(u), std::move(d))
                                 : make_training_set(std::move(u));
  out.learning_snr_db = snr_db;
  return out;
}

void validate_learn_config(const LearnConfig& c, Index dimension) {
  if (!(c.mismatch_tolerance > 0.0)) throw std::invalid_argument("learn: eta must be > 0");
  if (c.atom_count < dimension) throw std::invalid_argument("learn: atom count must be >= N");
  if (c.outer_iterations < 1) throw std::invalid_argument("learn: outer_iterations must be >= 1");
  if (c.feasible_fraction < 0.0 || c.feasible_fraction > 1.0)
    throw std::invalid_argument("learn: feasible_fraction must lie in [0, 1]");
}

std::vector<SparseCode> sparse_code_dataset(const CMatrix& d, const std::vector<CVector>& samples,
                                            double eta, const SolverOptions& opts,
                                            const std::vector<SparseCode>* warm) {
  if (warm && warm->size() != samples.size())
    throw std::invalid_argument("sparse_code_dataset: warm starts not aligned with samples");
  SparseSolver solver(d);
  SolverOptions o = opts;
  o.epsilon = eta;
  std::vector<SparseCode> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != d.rows())
      throw std::invalid_argument("sparse_code_dataset: sample " + std::to_string(i) +
                                  " dimension does not match the dictionary");
    out.push_back(solver.solve(samples[i], o, warm ? &(*warm)[i] : nullptr));
  }
  return out;
}

std::vector<SparseCode> sparse_code_joint(const CMatrix& d_u, const CMatrix& d_d,
                                          const std::vector<CVector>& uplink,
                                          const std::vector<CVector>& downlink, double eps,
                                          const SolverOptions& opts,
                                          const std::vector<SparseCode>* warm) {
  if (uplink.size() != downlink.size()) throw std::invalid_argument("joint coding: unpaired samples");
  if (d_u.cols() != d_d.cols()) throw std::invalid_argument("joint coding: atom counts differ");
  if (warm && warm->size() != uplink.size())
    throw std::invalid_argument("joint coding: warm starts not aligned with samples");
  const Index m = d_u.cols();
  const Index nd = d_d.rows();
  const Index nu = d_u.rows();
  CMatrix g = CMatrix::Zero(nd + nu, 2 * m);
  g.topLeftCorner(nd, m) = d_d;
  g.bottomRightCorner(nu, m) = d_u;
  SparseSolver solver(std::move(g), GroupStructure::paired(m));
  SolverOptions o = opts;
  o.epsilon = eps;
  std::vector<SparseCode> out;
  out.reserve(uplink.size());
  CVector y(nd + nu);
  for (std::size_t i = 0; i < uplink.size(); ++i) {
    if (uplink[i].size() != nu || downlink[i].size() != nd)
      throw std::invalid_argument("joint coding: pair " + std::to_string(i) + " has wrong dimensions");
    y << downlink[i], uplink[i];
    out.push_back(solver.solve(y, o, warm ? &(*warm)[i] : nullptr));
  }
  return out;
}

KsvdResult ksvd_update(const CMatrix& d, const std::vector<CVector>& samples, CMatrix& codes,
                       const std::vector<char>* skip) {
  if (samples.empty()) throw std::invalid_argument("ksvd_update: no samples");
  if (codes.rows() != d.cols() || codes.cols() != static_cast<Index>(samples.size()))
    throw std::invalid_argument("ksvd_update: codes not aligned with dictionary and samples");
  if (skip && skip->size() != samples.size())
    throw std::invalid_argument("ksvd_update: skip mask not aligned with samples");
  const CMatrix h = stack_columns(samples);
  if (h.rows() != d.rows()) throw std::invalid_argument("ksvd_update: sample dimension mismatch");
  if (skip)
    for (std::size_t i = 0; i < skip->size(); ++i)
      if ((*skip)[i]) codes.col(static_cast<Index>(i)).setZero();

  KsvdResult out;
  out.dictionary = d;
  CMatrix r = h - d * codes;
  const std::vector<char> used = atom_sweep(out.dictionary, r, codes, skip, &out.error_trace);
  const std::vector<char> mask = replacement_mask(out.dictionary, used);
  drop_atoms(out.dictionary, r, codes, mask);
  const std::vector<Index> worst = worst_samples(r.colwise().squaredNorm().transpose(), skip);
  std::size_t next = 0;
  for (Index k = 0; k < out.dictionary.cols(); ++k) {
    if (!mask[static_cast<std::size_t>(k)] || worst.empty()) continue;
    const Index s = worst[next++ % worst.size()];
    out.dictionary.col(k) = h.col(s).normalized();
    ++out.atoms_replaced;
  }
  return out;
}

LearnedModel learn_dictionary(const TrainingSet& set, const LearnConfig& config) {
  if (set.size() == 0) throw std::invalid_argument("learn_dictionary: empty training set");
  const Index n = set.dimension();
  validate_learn_config(config, n);
  CMatrix d = initial_dictionary(config, n);
  const double eta = config.mismatch_tolerance;

  LearnedModel model;
  IterateTracker tracker(config);
  CMatrix best = d;
  std::vector<SparseCode> codes;
  std::vector<SparseCode> warm;
  for (int it = 1; it <= config.outer_iterations; ++it) {
    codes = sparse_code_dataset(d, set.samples, eta, config.solver, warm.empty() ? nullptr : &warm);
    const CodingStats s = coding_stats(codes, eta, 1);
    IterationDiagnostics diag;
    diag.iteration = it;
    diag.mean_l0 = s.mean_l0;
    diag.mean_residual = s.mean_residual;
    diag.skipped = s.skipped;
    diag.feasible_fraction = s.feasible_fraction;
    if (tracker.offer(it, s)) best = d;
    const bool stop = it == config.outer_iterations || tracker.should_stop();
    if (!stop) {
      CMatrix c(d.cols(), static_cast<Index>(codes.size()));
      for (std::size_t i = 0; i < codes.size(); ++i) c.col(static_cast<Index>(i)) = codes[i].vector();
      const std::vector<char> skip = skip_mask(codes);
      KsvdResult k = ksvd_update(d, set.samples, c, &skip);
      diag.atoms_replaced = k.atoms_replaced;
      d = std::move(k.dictionary);
      warm = warm_from(codes, c);
    }
    model.diagnostics.push_back(diag);
    if (stop) break;
  }
  model.best_iteration = tracker.best();
  model.feasible = tracker.feasible();
  model.dictionary = make_learned(std::move(best), DictionaryOrigin::learned, "");
  return model;
}

LearnedModel learn_joint(const TrainingSet& set, const LearnConfig& config_u,
                         const LearnConfig& config_d) {
  if (set.size() == 0) throw std::invalid_argument("learn_joint: empty training set");
  if (!set.paired()) throw std::invalid_argument("learn_joint: training set is not paired");
  if (config_u.atom_count != config_d.atom_count)
    throw std::invalid_argument("learn_joint: uplink and downlink atom counts differ");
  const Index n_u = set.dimension();
  const Index n_d = set.downlink.front().size();
  validate_learn_config(config_u, n_u);
  validate_learn_config(config_d, n_d);
  const Index m = config_u.atom_count;
  CMatrix du = initial_dictionary(config_u, n_u);
  CMatrix dd = initial_dictionary(config_d, n_d);
  const double eps = std::hypot(config_u.mismatch_tolerance, config_d.mismatch_tolerance);
  const CMatrix hu = stack_columns(set.samples);
  const CMatrix hd = stack_columns(set.downlink);

  LearnedModel model;
  IterateTracker tracker(config_u);
  CMatrix best_u = du, best_d = dd;
  std::vector<SparseCode> codes;
  std::vector<SparseCode> warm;
  for (int it = 1; it <= config_u.outer_iterations; ++it) {
    codes = sparse_code_joint(du, dd, set.samples, set.downlink, eps, config_u.solver,
                              warm.empty() ? nullptr : &warm);
    const CodingStats s = coding_stats(codes, eps, 2);
    IterationDiagnostics diag;
    diag.iteration = it;
    diag.mean_l0 = s.mean_l0;
    diag.mean_residual = s.mean_residual;
    diag.skipped = s.skipped;
    diag.feasible_fraction = s.feasible_fraction;
    if (tracker.offer(it, s)) {
      best_u = du;
      best_d = dd;
    }
    const bool stop = it == config_u.outer_iterations || tracker.should_stop();
    if (!stop) {
      const auto l = static_cast<Index>(codes.size());
      CMatrix cd(m, l), cu(m, l);
      for (Index i = 0; i < l; ++i) {
        const CVector& b = codes[static_cast<std::size_t>(i)].beta.col(0);
        cd.col(i) = b.head(m);
        cu.col(i) = b.tail(m);
      }
      const std::vector<char> skip = skip_mask(codes);
      for (Index i = 0; i < l; ++i)
        if (skip[static_cast<std::size_t>(i)]) {
          cd.col(i).setZero();
          cu.col(i).setZero();
        }
      // The two dictionaries decouple given the shared codes.
      CMatrix ru = hu - du * cu;
      CMatrix rd = hd - dd * cd;
      const std::vector<char> used_u = atom_sweep(du, ru, cu, &skip, nullptr);
      const std::vector<char> used_d = atom_sweep(dd, rd, cd, &skip, nullptr);
      // Atoms are replaced in pairs so group j keeps meaning one direction.
      std::vector<char> used(static_cast<std::size_t>(m));
      for (Index k = 0; k < m; ++k)
        used[static_cast<std::size_t>(k)] = used_u[static_cast<std::size_t>(k)] || used_d[static_cast<std::size_t>(k)];
      std::vector<char> mask = replacement_mask(du, used);
      const std::vector<char> mask_d = replacement_mask(dd, used);
      for (Index k = 0; k < m; ++k) mask[static_cast<std::size_t>(k)] |= mask_d[static_cast<std::size_t>(k)];
      drop_atoms(du, ru, cu, mask);
      drop_atoms(dd, rd, cd, mask);
      const RVector energy =
          (ru.colwise().squaredNorm() + rd.colwise().squaredNorm()).transpose();
      const std::vector<Index> worst = worst_samples(energy, &skip);
      std::size_t next = 0;
      for (Index k = 0; k < m; ++k) {
        if (!mask[static_cast<std::size_t>(k)] || worst.empty()) continue;
        const Index s_idx = worst[next++ % worst.size()];
        du.col(k) = hu.col(s_idx).normalized();
        dd.col(k) = hd.col(s_idx).normalized();
        ++diag.atoms_replaced;
      }
      CMatrix stacked(2 * m, l);
      stacked.topRows(m) = cd;
      stacked.bottomRows(m) = cu;
      warm = warm_from(codes, stacked);
    }
    model.diagnostics.push_back(diag);
    if (stop) break;
  }
  model.best_iteration = tracker.best();
  model.feasible = tracker.feasible();
  model.dictionary = make_learned(std::move(best_u), DictionaryOrigin::joint_learned, "ul");
  model.downlink = make_learned(std::move(best_d), DictionaryOrigin::joint_learned, "dl");
  return model;
}

}  // namespace fddcs
