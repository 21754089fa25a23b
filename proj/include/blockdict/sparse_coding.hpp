#pragma once

// Greedy pursuit coders. omp picks one atom per step by absolute inner
// product with the residual; bomp picks one block per step by the 2-norm of
// the block's correlation vector. Both refit all selected columns by least
// squares after every selection and stop early once the residual norm falls
// to the tolerance. Ties (score difference <= 1e-12) resolve to the lowest
// index, which keeps runs reproducible across platforms.

#include "blockdict/core.hpp"

#include <string>
#include <vector>

namespace blockdict {

struct CodingResult {
  Vector code;                // length n_a, zeros off the selected support
  double residual_norm = 0.0;
  // Chosen atom ids (omp) or block ids (bomp), both 1-based, in selection
  // order.
  std::vector<int> selected;
};

namespace detail {

// Least squares over the active columns. Rank-deficient sets are handled by
// dropping dependent columns (their coefficients stay exactly zero), chosen
// by column-pivoted QR.
inline Vector solve_dropping_dependent(const Eigen::Ref<const Matrix>& A,
                                       const Vector& y) {
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  const Index rank = qr.rank();
  if (rank == A.cols()) return qr.solve(y);
  Vector x = Vector::Zero(A.cols());
  if (rank == 0) return x;
  const auto& perm = qr.colsPermutation().indices();
  std::vector<Index> keep(static_cast<std::size_t>(rank));
  for (Index i = 0; i < rank; ++i) keep[static_cast<std::size_t>(i)] = perm[i];
  Matrix sub(A.rows(), rank);
  for (Index i = 0; i < rank; ++i) sub.col(i) = A.col(keep[static_cast<std::size_t>(i)]);
  const Vector coeff = Eigen::HouseholderQR<Matrix>(sub).solve(y);
  for (Index i = 0; i < rank; ++i) x[keep[static_cast<std::size_t>(i)]] = coeff[i];
  return x;
}

// Scratch buffers shared across calls so batch coding does not allocate per
// signal.
struct PursuitWorkspace {
  Vector alpha;        // atom correlations with the residual
  Vector residual;
  Matrix active;       // selected columns, grown left to right
  std::vector<Index> active_atoms;
  std::vector<char> used;
};

inline void omp_run(const Dictionary& d, const Vector& y, int sparsity,
                    double tol, PursuitWorkspace& w, CodingResult& out) {
  const Index m = d.dim();
  const Index n = d.atom_count();
  if (y.size() != m) throw DataError("signal length does not match dictionary");
  if (sparsity < 1 || sparsity > std::min(m, n))
    throw DataError("atom sparsity must lie in [1, min(m, n_atoms)]");

  out.code = Vector::Zero(n);
  out.selected.clear();
  w.residual = y;
  w.used.assign(static_cast<std::size_t>(n), 0);
  w.active.resize(m, sparsity);
  w.active_atoms.clear();

  Vector coeff;
  for (int step = 0; step < sparsity; ++step) {
    if (w.residual.norm() <= tol) break;
    w.alpha.noalias() = d.atoms().transpose() * w.residual;
    Index best = -1;
    double best_score = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (w.used[static_cast<std::size_t>(j)]) continue;
      const double score = std::abs(w.alpha[j]);
      if (best < 0 || score > best_score + kTieTolerance) {
        best = j;
        best_score = score;
      }
    }
    if (best < 0 || best_score == 0.0) break;
    w.used[static_cast<std::size_t>(best)] = 1;
    w.active.col(static_cast<Index>(w.active_atoms.size())) = d.atoms().col(best);
    w.active_atoms.push_back(best);
    out.selected.push_back(static_cast<int>(best) + 1);

    const Index k = static_cast<Index>(w.active_atoms.size());
    coeff = solve_dropping_dependent(w.active.leftCols(k), y);
    w.residual.noalias() = y - w.active.leftCols(k) * coeff;
  }

  for (std::size_t i = 0; i < w.active_atoms.size(); ++i)
    out.code[w.active_atoms[i]] = coeff.size() > 0 ? coeff[static_cast<Index>(i)] : 0.0;
  out.residual_norm = w.residual.norm();
}

inline void bomp_run(const Dictionary& d, const BlockStructure& b,
                     const std::vector<std::vector<Index>>& blocks,
                     const Vector& y, int block_sparsity, double tol,
                     PursuitWorkspace& w, CodingResult& out) {
  const Index m = d.dim();
  const Index n = d.atom_count();
  const int n_b = b.block_count();
  if (y.size() != m) throw DataError("signal length does not match dictionary");
  if (!b.fully_formed()) throw DataError("block structure has unassigned atoms");
  if (b.atom_count() != n) throw DataError("block structure does not match dictionary");
  if (block_sparsity < 1 || block_sparsity > n_b)
    throw DataError("block sparsity must lie in [1, n_blocks]");

  out.code = Vector::Zero(n);
  out.selected.clear();
  w.residual = y;
  w.used.assign(static_cast<std::size_t>(n_b) + 1, 0);
  w.active.resize(m, std::min(n, m));
  w.active_atoms.clear();

  Vector coeff;
  for (int step = 0; step < block_sparsity; ++step) {
    if (w.residual.norm() <= tol) break;
    w.alpha.noalias() = d.atoms().transpose() * w.residual;
    int best = 0;
    double best_score = 0.0;
    for (int id = 1; id <= n_b; ++id) {
      if (w.used[static_cast<std::size_t>(id)]) continue;
      // Selecting past m atoms cannot improve the refit; keep it solvable.
      if (w.active_atoms.size() + blocks[static_cast<std::size_t>(id - 1)].size() >
          static_cast<std::size_t>(m))
        continue;
      double s2 = 0.0;
      for (Index a : blocks[static_cast<std::size_t>(id - 1)]) s2 += w.alpha[a] * w.alpha[a];
      const double score = std::sqrt(s2);
      if (best == 0 || score > best_score + kTieTolerance) {
        best = id;
        best_score = score;
      }
    }
    if (best == 0 || best_score == 0.0) break;
    w.used[static_cast<std::size_t>(best)] = 1;
    for (Index a : blocks[static_cast<std::size_t>(best - 1)]) {
      w.active.col(static_cast<Index>(w.active_atoms.size())) = d.atoms().col(a);
      w.active_atoms.push_back(a);
    }
    out.selected.push_back(best);

    const Index k = static_cast<Index>(w.active_atoms.size());
    coeff = solve_dropping_dependent(w.active.leftCols(k), y);
    w.residual.noalias() = y - w.active.leftCols(k) * coeff;
  }

  for (std::size_t i = 0; i < w.active_atoms.size(); ++i)
    out.code[w.active_atoms[i]] = coeff.size() > 0 ? coeff[static_cast<Index>(i)] : 0.0;
  out.residual_norm = w.residual.norm();
}

}  // namespace detail

inline CodingResult omp(const Dictionary& d, const Vector& y, int sparsity,
                        double residual_tolerance = 1e-9) {
  detail::PursuitWorkspace w;
  CodingResult out;
  detail::omp_run(d, y, sparsity, residual_tolerance, w, out);
  return out;
}

inline CodingResult bomp(const Dictionary& d, const BlockStructure& b, const Vector& y,
                         int block_sparsity, double residual_tolerance = 1e-9) {
  detail::PursuitWorkspace w;
  CodingResult out;
  detail::bomp_run(d, b, b.blocks(), y, block_sparsity, residual_tolerance, w, out);
  return out;
}

// Codes every column of `ys`. With a structure, bomp with cfg.block_sparsity;
// without, omp with cfg.atom_sparsity. Columns are processed independently in
// index order, so the result matches per-signal calls exactly.
inline SparseCodes batch_code(const Dictionary& d, const BlockStructure* b,
                              const TrainingSet& ys, const ExperimentConfig& cfg) {
  if (ys.dim() != d.dim()) throw DataError("training set dimension does not match dictionary");
  Matrix coeffs = Matrix::Zero(d.atom_count(), ys.size());
  detail::PursuitWorkspace w;
  CodingResult r;
  std::vector<std::vector<Index>> blocks;
  if (b) blocks = b->blocks();
  for (Index i = 0; i < ys.size(); ++i) {
    try {
      if (b)
        detail::bomp_run(d, *b, blocks, ys.signals().col(i), cfg.block_sparsity,
                         cfg.residual_tolerance, w, r);
      else
        detail::omp_run(d, ys.signals().col(i), cfg.atom_sparsity,
                        cfg.residual_tolerance, w, r);
    } catch (const DataError& e) {
      throw DataError("signal " + std::to_string(i + 1) + ": " + e.what());
    }
    coeffs.col(i) = r.code;
  }
  return SparseCodes(std::move(coeffs));
}

inline SparseCodes batch_code(const Dictionary& d, const TrainingSet& ys,
                              const ExperimentConfig& cfg) {
  return batch_code(d, nullptr, ys, cfg);
}

inline SparseCodes batch_code(const Dictionary& d, const BlockStructure& b,
                              const TrainingSet& ys, const ExperimentConfig& cfg) {
  return batch_code(d, &b, ys, cfg);
}

}  // namespace blockdict
