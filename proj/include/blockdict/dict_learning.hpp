#pragma once

// Dictionary training. ksvd_train is the classic rank-1 per-atom baseline
// and doubles as the initializer for the block methods. bksvd_block_update
// replaces each block's atoms with the top left singular vectors of the
// error matrix computed without that block, restricted to the signals that
// use it, which keeps blocks orthonormal by construction. bksvd_train and
// supervised_train alternate structure estimation, block coding and block
// updates around one shared loop.

#include "blockdict/block_structuring.hpp"
#include "blockdict/core.hpp"
#include "blockdict/rng.hpp"
#include "blockdict/sparse_coding.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace blockdict {

struct TrainReport {
  std::vector<double> rel_errors;   // one entry per completed iteration
  std::vector<int> block_counts;    // blocks in force at each iteration
  bool converged = false;           // improvement fell below 1e-4
  int iterations_run = 0;

  // One line per iteration: {"iter":k,"rel_error":e,"n_blocks":n}.
  std::string to_jsonl() const {
    std::string out;
    for (std::size_t i = 0; i < rel_errors.size(); ++i) {
      nlohmann::ordered_json j;
      j["iter"] = i + 1;
      j["rel_error"] = rel_errors[i];
      j["n_blocks"] = i < block_counts.size() ? block_counts[i] : 0;
      out += j.dump();
      out += '\n';
    }
    return out;
  }
};

struct BlockUpdateStats {
  int svd_count = 0;        // blocks updated through the SVD path
  int reseeded_blocks = 0;  // blocks with no users, reinitialized instead
  double residual_fnorm = -1.0;
};

// Signals using each block: omega[k] lists (ascending) the columns with a
// nonzero coefficient on any atom of block k+1.
using BlockUsage = std::vector<std::vector<Index>>;

inline BlockUsage block_usage(const SparseCodes& codes,
                              const BlockStructure& b) {
  if (codes.atom_count() != b.atom_count())
    throw DataError("codes do not match block structure");
  std::vector<std::vector<Index>> omega(static_cast<std::size_t>(b.block_count()));
  std::vector<char> hit(static_cast<std::size_t>(b.block_count()));
  for (Index s = 0; s < codes.signal_count(); ++s) {
    std::fill(hit.begin(), hit.end(), 0);
    for (Index j = 0; j < codes.atom_count(); ++j) {
      if (codes.coefficients()(j, s) == 0.0) continue;
      const int id = b.id_of(j);
      if (id > 0) hit[static_cast<std::size_t>(id - 1)] = 1;
    }
    for (std::size_t k = 0; k < hit.size(); ++k)
      if (hit[k]) omega[k].push_back(s);
  }
  return omega;
}

namespace detail {

// Flip sign so the entry of largest magnitude is positive; first maximum
// wins ties. Returns true if flipped.
inline bool fix_sign(Eigen::Ref<Vector> v) {
  Index imax = 0;
  double vmax = std::abs(v[0]);
  for (Index i = 1; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > vmax) {
      vmax = a;
      imax = i;
    }
  }
  if (v[imax] < 0.0) {
    v = -v;
    return true;
  }
  return false;
}

// Top-s left singular vectors of E via the eigendecomposition of E E^T,
// which is cheap because the signal dimension is small. Columns come back
// sign-fixed and orthonormal.
inline Matrix top_left_singular(const Matrix& E, Index s) {
  Matrix M = E * E.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  if (eig.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed in block update");
  Matrix Q(E.rows(), s);
  for (Index i = 0; i < s; ++i) {
    Q.col(i) = eig.eigenvectors().col(E.rows() - 1 - i);  // descending order
    fix_sign(Q.col(i));
  }
  return Q;
}

// Distinct nonzero-norm columns of Y, drawn from `candidates`.
inline std::vector<Index> select_distinct_nonzero(const Matrix& Y,
                                                  const std::vector<Index>& candidates,
                                                  Index count, Rng& rng) {
  std::vector<Index> picked;
  std::vector<char> used(candidates.size());
  const int limit = 1000 * static_cast<int>(candidates.size());
  int attempts = 0;
  while (static_cast<Index>(picked.size()) < count) {
    if (++attempts > limit)
      throw DataError("not enough nonzero signals to initialize a dictionary");
    const int i = rng.uniform_int(static_cast<int>(candidates.size()));
    if (used[static_cast<std::size_t>(i)]) continue;
    const Index col = candidates[static_cast<std::size_t>(i)];
    if (Y.col(col).norm() == 0.0) {
      used[static_cast<std::size_t>(i)] = 1;  // never usable, skip for good
      continue;
    }
    used[static_cast<std::size_t>(i)] = 1;
    picked.push_back(col);
  }
  return picked;
}

// In-place KSVD sweeps over all atoms of D. Returns the codes of the last
// iteration; rel_errors/block_counts are appended per iteration with
// n_blocks = n_atoms (every atom its own block at this stage).
inline SparseCodes ksvd_refine(const TrainingSet& ys, Matrix& D, int sparsity,
                               int iterations, TrainReport& report) {
  const Index m = D.rows();
  const Index n = D.cols();
  const Matrix& Y = ys.signals();
  const double y_norm = Y.norm();
  if (y_norm == 0.0) throw DataError("zero-energy training set");

  ExperimentConfig code_cfg;
  code_cfg.atom_sparsity = sparsity;

  Matrix U = Matrix::Zero(n, ys.size());
  for (int it = 0; it < iterations; ++it) {
    U = batch_code(Dictionary(D), ys, code_cfg).coefficients();
    Matrix R = Y - D * U;

    std::vector<char> replacement_used(static_cast<std::size_t>(ys.size()), 0);
    std::vector<Index> omega;
    for (Index j = 0; j < n; ++j) {
      omega.clear();
      for (Index s = 0; s < ys.size(); ++s)
        if (U(j, s) != 0.0) omega.push_back(s);

      if (omega.empty()) {
        // Dead atom: take the worst-represented signal still unclaimed.
        Index pick = -1;
        double worst = -1.0;
        for (Index s = 0; s < ys.size(); ++s) {
          if (replacement_used[static_cast<std::size_t>(s)]) continue;
          const double rn = R.col(s).norm();
          if (rn > worst) {
            worst = rn;
            pick = s;
          }
        }
        if (pick >= 0 && Y.col(pick).norm() > 0.0) {
          replacement_used[static_cast<std::size_t>(pick)] = 1;
          D.col(j) = Y.col(pick) / Y.col(pick).norm();
        }
        continue;
      }

      Matrix E(m, static_cast<Index>(omega.size()));
      for (std::size_t t = 0; t < omega.size(); ++t)
        E.col(static_cast<Index>(t)) = R.col(omega[t]) + D.col(j) * U(j, omega[t]);
      Matrix u = top_left_singular(E, 1);
      const Vector w = E.transpose() * u.col(0);
      D.col(j) = u.col(0);
      for (std::size_t t = 0; t < omega.size(); ++t) {
        U(j, omega[t]) = w[static_cast<Index>(t)];
        R.col(omega[t]) = E.col(static_cast<Index>(t)) - u.col(0) * w[static_cast<Index>(t)];
      }
    }

    const double err = R.norm() / y_norm;
    if (!report.rel_errors.empty() &&
        report.rel_errors.back() - err < 1e-4)
      report.converged = true;
    report.rel_errors.push_back(err);
    report.block_counts.push_back(static_cast<int>(n));
    ++report.iterations_run;
  }
  return SparseCodes(std::move(U));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Block update sweep.
// ---------------------------------------------------------------------------

// One pass over all blocks in id order. Every used block is replaced by the
// top left singular vectors of its exclusion error over its users, and the
// matching code rows are refit; unused blocks are reseeded from the worst
// represented signals and their (zero) codes left alone. With labels given,
// blocks must be class-pure.
inline std::pair<Dictionary, SparseCodes> bksvd_block_update(
    const Dictionary& d, const BlockStructure& b, const TrainingSet& ys,
    const SparseCodes& codes, const ClassLabels* labels = nullptr,
    BlockUpdateStats* stats = nullptr) {
  const Index m = d.dim();
  const Index n = d.atom_count();
  if (b.atom_count() != n) throw DataError("block structure does not match dictionary");
  if (!b.fully_formed()) throw DataError("block structure has unassigned atoms");
  if (codes.atom_count() != n || codes.signal_count() != ys.size())
    throw DataError("codes do not match dictionary and training set");
  if (ys.dim() != m) throw DataError("training set dimension does not match dictionary");
  if (labels && labels->atom_count() != n)
    throw DataError("class labels do not match dictionary");

  const auto blocks = b.blocks();
  if (labels) {
    for (const auto& blk : blocks) {
      for (Index a : blk)
        if (labels->label_of(a) != labels->label_of(blk[0]))
          throw DataError("block crosses a class boundary");
    }
  }
  for (const auto& blk : blocks) {
    if (static_cast<Index>(blk.size()) > m)
      throw DataError("block larger than the signal dimension");
  }

  const Matrix& Y = ys.signals();
  Matrix D = d.atoms();
  Matrix U = codes.coefficients();
  Matrix R = Y - D * U;
  const auto omega = block_usage(codes, b);

  BlockUpdateStats local;
  BlockUpdateStats& st = stats ? *stats : local;
  st.svd_count = 0;
  st.reseeded_blocks = 0;

  std::vector<char> reseed_used(static_cast<std::size_t>(ys.size()), 0);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& atoms = blocks[k];
    const Index s = static_cast<Index>(atoms.size());
    const auto& users = omega[k];

    if (users.empty()) {
      // Reseed from the signals the current dictionary serves worst.
      std::vector<std::pair<double, Index>> ranked;
      ranked.reserve(static_cast<std::size_t>(ys.size()));
      for (Index c = 0; c < ys.size(); ++c) {
        if (reseed_used[static_cast<std::size_t>(c)]) continue;
        ranked.emplace_back(R.col(c).norm(), c);
      }
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) {
                  return a.first > b.first || (a.first == b.first && a.second < b.second);
                });
      if (static_cast<Index>(ranked.size()) < s)
        throw DataError("not enough signals to reseed an unused block");
      Matrix seeds(m, s);
      for (Index i = 0; i < s; ++i) {
        seeds.col(i) = Y.col(ranked[static_cast<std::size_t>(i)].second);
        reseed_used[static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)].second)] = 1;
      }
      Eigen::HouseholderQR<Matrix> qr(seeds);
      Matrix Q = qr.householderQ() * Matrix::Identity(m, s);
      for (Index i = 0; i < s; ++i) detail::fix_sign(Q.col(i));
      for (Index i = 0; i < s; ++i) D.col(atoms[static_cast<std::size_t>(i)]) = Q.col(i);
      ++st.reseeded_blocks;
      continue;
    }

    // Exclusion error restricted to the users: current residual plus this
    // block's own contribution.
    Matrix E(m, static_cast<Index>(users.size()));
    for (std::size_t t = 0; t < users.size(); ++t) {
      E.col(static_cast<Index>(t)) = R.col(users[t]);
      for (Index i = 0; i < s; ++i) {
        const Index a = atoms[static_cast<std::size_t>(i)];
        E.col(static_cast<Index>(t)) += D.col(a) * U(a, users[t]);
      }
    }

    const Matrix Q = detail::top_left_singular(E, s);
    const Matrix newU = Q.transpose() * E;  // rows are sigma_i v_i^T
    ++st.svd_count;

    for (Index i = 0; i < s; ++i) D.col(atoms[static_cast<std::size_t>(i)]) = Q.col(i);
    for (std::size_t t = 0; t < users.size(); ++t) {
      for (Index i = 0; i < s; ++i)
        U(atoms[static_cast<std::size_t>(i)], users[t]) = newU(i, static_cast<Index>(t));
      R.col(users[t]) = E.col(static_cast<Index>(t)) - Q * newU.col(static_cast<Index>(t));
    }
  }

  st.residual_fnorm = R.norm();
  return {Dictionary(std::move(D)), SparseCodes(std::move(U))};
}

// ---------------------------------------------------------------------------
// KSVD baseline.
// ---------------------------------------------------------------------------

inline std::tuple<Dictionary, SparseCodes, TrainReport> ksvd_train(
    const TrainingSet& ys, int n_atoms, int sparsity, int iterations,
    std::uint64_t seed) {
  if (n_atoms < 1) throw DataError("n_atoms must be positive");
  if (n_atoms > ys.size())
    throw DataError("n_atoms exceeds the number of training signals");
  if (sparsity < 1 || sparsity > std::min<Index>(ys.dim(), n_atoms))
    throw DataError("sparsity must lie in [1, min(m, n_atoms)]");
  if (iterations < 0) throw DataError("iterations must be non-negative");

  Rng rng(seed);
  std::vector<Index> all(static_cast<std::size_t>(ys.size()));
  for (Index i = 0; i < ys.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  const auto picked =
      detail::select_distinct_nonzero(ys.signals(), all, n_atoms, rng);
  Matrix D(ys.dim(), n_atoms);
  for (Index j = 0; j < n_atoms; ++j) {
    const Vector col = ys.signals().col(picked[static_cast<std::size_t>(j)]);
    D.col(j) = col / col.norm();
  }

  TrainReport report;
  if (iterations == 0)
    return {Dictionary(std::move(D)), SparseCodes(Matrix::Zero(n_atoms, ys.size())),
            std::move(report)};
  SparseCodes codes = detail::ksvd_refine(ys, D, sparsity, iterations, report);
  return {Dictionary(std::move(D)), std::move(codes), std::move(report)};
}

// ---------------------------------------------------------------------------
// Shared block training loop.
// ---------------------------------------------------------------------------

namespace detail {

// Called after every dictionary update with the 1-based iteration index and
// the state in force; lets experiment drivers snapshot per-iteration metrics.
using IterationHook =
    std::function<void(int, const Dictionary&, const BlockStructure&)>;

// estimate(d) produces the structure in force; re-estimation happens at
// iteration 0 and then every structure_update_period iterations (the
// kInfinitePeriod sentinel keeps the first estimate for good).
inline std::pair<BlockStructure, TrainReport> block_train_loop(
    const TrainingSet& ys, Matrix& D, const ExperimentConfig& cfg,
    const std::function<BlockStructure(const Dictionary&)>& estimate,
    const ClassLabels* labels, const IterationHook& on_iteration = {}) {
  const double y_norm = ys.signals().norm();
  if (y_norm == 0.0) throw DataError("zero-energy training set");

  TrainReport report;
  BlockStructure b = estimate(Dictionary(D));
  for (int it = 0; it < cfg.outer_iterations; ++it) {
    if (it > 0 && cfg.structure_update_period != kInfinitePeriod &&
        it % cfg.structure_update_period == 0)
      b = estimate(Dictionary(D));

    Dictionary cur(D);
    const SparseCodes codes = batch_code(cur, b, ys, cfg);
    BlockUpdateStats stats;
    auto [d_new, u_new] = bksvd_block_update(cur, b, ys, codes, labels, &stats);
    D = d_new.atoms();
    (void)u_new;

    const double err = stats.residual_fnorm / y_norm;
    if (!report.rel_errors.empty() && report.rel_errors.back() - err < 1e-4)
      report.converged = true;
    report.rel_errors.push_back(err);
    report.block_counts.push_back(b.block_count());
    ++report.iterations_run;
    if (on_iteration) on_iteration(it + 1, Dictionary(D), b);
  }
  return {std::move(b), std::move(report)};
}

}  // namespace detail

// Unsupervised block training from a given starting dictionary. Mode sac
// estimates the structure from fresh omp codes of the current dictionary;
// mode cgc estimates it from atom correlations alone.
inline std::tuple<Dictionary, BlockStructure, TrainReport> bksvd_train(
    const TrainingSet& ys, const Dictionary& d0, const ExperimentConfig& cfg,
    const detail::IterationHook& on_iteration = {}) {
  cfg.validate();
  if (cfg.structure_mode != StructureMode::sac && cfg.structure_mode != StructureMode::cgc)
    throw ConfigError("bksvd_train expects structure_mode sac or cgc");
  if (ys.dim() != d0.dim()) throw DataError("training set dimension does not match d0");
  if (cfg.block_sparsity > d0.atom_count())
    throw DataError("block_sparsity exceeds the atom count");

  Matrix D = d0.atoms();
  auto estimate = [&](const Dictionary& d) {
    if (cfg.structure_mode == StructureMode::sac) {
      const SparseCodes codes = batch_code(d, ys, cfg);
      return sac_estimate(d, codes, cfg.max_block_size);
    }
    return cgc_estimate(d, cfg.max_block_size, cfg.shrink_fraction);
  };
  auto [b, report] =
      detail::block_train_loop(ys, D, cfg, estimate, nullptr, on_iteration);
  return {Dictionary(std::move(D)), std::move(b), std::move(report)};
}

// ---------------------------------------------------------------------------
// Supervised training: class-partitioned atoms, class-pure blocks.
// ---------------------------------------------------------------------------

struct SupervisedResult {
  Dictionary dict;
  BlockStructure structure;
  ClassLabels labels;
  TrainReport report;
};

inline SupervisedResult supervised_train(const TrainingSet& ys, int atoms_per_class,
                                         const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.structure_mode != StructureMode::supervised_cgc &&
      cfg.structure_mode != StructureMode::fixed_supervised)
    throw ConfigError("supervised_train expects structure_mode supervised_cgc or fixed_supervised");
  if (!ys.has_classes()) throw DataError("supervised training needs class labels");
  if (atoms_per_class < 1) throw DataError("atoms_per_class must be positive");

  const int C = ys.class_count();
  Rng rng(cfg.rng_seed);
  Matrix D(ys.dim(), static_cast<Index>(atoms_per_class) * C);
  std::vector<int> atom_labels;
  atom_labels.reserve(static_cast<std::size_t>(D.cols()));
  for (int c = 1; c <= C; ++c) {
    const auto members = ys.signals_of_class(c);
    if (static_cast<Index>(members.size()) < atoms_per_class)
      throw DataError("class " + std::to_string(c) + " has too few signals");
    const auto picked = detail::select_distinct_nonzero(ys.signals(), members,
                                                        atoms_per_class, rng);
    Matrix Dc(ys.dim(), atoms_per_class);
    for (Index j = 0; j < atoms_per_class; ++j) {
      const Vector col = ys.signals().col(picked[static_cast<std::size_t>(j)]);
      Dc.col(j) = col / col.norm();
    }
    if (cfg.supervised_init_ksvd_iterations > 0) {
      Matrix Yc(ys.dim(), static_cast<Index>(members.size()));
      for (std::size_t i = 0; i < members.size(); ++i)
        Yc.col(static_cast<Index>(i)) = ys.signals().col(members[i]);
      TrainReport scratch;
      detail::ksvd_refine(TrainingSet(Yc), Dc,
                          std::min(cfg.atom_sparsity, atoms_per_class),
                          cfg.supervised_init_ksvd_iterations, scratch);
    }
    D.middleCols(static_cast<Index>(c - 1) * atoms_per_class, atoms_per_class) = Dc;
    for (int j = 0; j < atoms_per_class; ++j) atom_labels.push_back(c);
  }
  ClassLabels labels(std::move(atom_labels));

  // fixed_supervised blocks: consecutive runs of max_block_size inside each
  // class range, the remainder forming a smaller final block.
  auto fixed_structure = [&]() {
    std::vector<int> assignment(static_cast<std::size_t>(D.cols()), 0);
    int id = 0;
    for (int c = 1; c <= C; ++c) {
      auto [first, last] = labels.class_range(c);
      for (Index j = first; j < last; ++j) {
        if ((j - first) % cfg.max_block_size == 0) ++id;
        assignment[static_cast<std::size_t>(j)] = id;
      }
    }
    return BlockStructure(std::move(assignment));
  };

  auto estimate = [&](const Dictionary& d) {
    if (cfg.structure_mode == StructureMode::fixed_supervised) return fixed_structure();
    return supervised_cgc_estimate(d, labels, cfg.max_block_size, cfg.shrink_fraction);
  };
  auto [b, report] = detail::block_train_loop(ys, D, cfg, estimate, &labels);
  return {Dictionary(std::move(D)), std::move(b), std::move(labels), std::move(report)};
}

}  // namespace blockdict
