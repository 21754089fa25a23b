#pragma once

// Coherence and recovery metrics used by the experiment drivers and by the
// reporting CLI.

#include "blockdict/core.hpp"
#include "blockdict/sparse_coding.hpp"

#include <algorithm>
#include <set>
#include <vector>

namespace blockdict {

// Absolute pairwise atom correlations, sorted descending. Length n(n-1)/2.
inline Vector coherence_profile(const Dictionary& d) {
  const Index n = d.atom_count();
  const Matrix gram = (d.atoms().transpose() * d.atoms()).cwiseAbs().cwiseMin(1.0);
  Vector out(n * (n - 1) / 2);
  Index t = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) out[t++] = gram(i, j);
  std::sort(out.data(), out.data() + out.size(), std::greater<double>());
  return out;
}

inline int count_above(const Vector& profile, double threshold) {
  int n = 0;
  for (Index i = 0; i < profile.size(); ++i)
    if (profile[i] > threshold) ++n;
  return n;
}

struct BlockCoherenceStats {
  double avg_intra = 0.0;  // mean |corr| over same-block pairs
  double avg_inter = 0.0;  // mean |corr| over cross-block pairs
  double max_inter = 0.0;
  double top20_inter = 0.0;  // mean of the 20 largest cross-block |corr|
  bool intra_defined = false;  // false when every block is a singleton
};

inline BlockCoherenceStats block_coherence_stats(const Dictionary& d,
                                                 const BlockStructure& b) {
  if (b.atom_count() != d.atom_count())
    throw DataError("block structure does not match dictionary");
  if (!b.fully_formed()) throw DataError("block structure has unassigned atoms");
  const Index n = d.atom_count();
  const Matrix gram = (d.atoms().transpose() * d.atoms()).cwiseAbs().cwiseMin(1.0);
  BlockCoherenceStats st;
  double intra_sum = 0.0, inter_sum = 0.0;
  long intra_n = 0, inter_n = 0;
  std::vector<double> inter;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double c = gram(i, j);
      if (b.id_of(i) == b.id_of(j)) {
        intra_sum += c;
        ++intra_n;
      } else {
        inter_sum += c;
        ++inter_n;
        inter.push_back(c);
      }
    }
  }
  if (intra_n > 0) {
    st.avg_intra = intra_sum / static_cast<double>(intra_n);
    st.intra_defined = true;
  }
  if (inter_n > 0) {
    st.avg_inter = inter_sum / static_cast<double>(inter_n);
    std::sort(inter.begin(), inter.end(), std::greater<double>());
    st.max_inter = inter.front();
    const std::size_t top = std::min<std::size_t>(20, inter.size());
    double s = 0.0;
    for (std::size_t t = 0; t < top; ++t) s += inter[t];
    st.top20_inter = s / static_cast<double>(top);
  }
  return st;
}

// Fraction of oracle blocks present verbatim (same atom set) in the
// estimate. Ids do not matter, only the partition.
inline double block_recovery_rate(const BlockStructure& estimated,
                                  const BlockStructure& oracle) {
  if (estimated.atom_count() != oracle.atom_count())
    throw DataError("structures cover different atom counts");
  if (!estimated.fully_formed() || !oracle.fully_formed())
    throw DataError("recovery needs fully formed structures");
  std::set<std::vector<Index>> est;
  for (auto& blk : estimated.blocks()) est.insert(blk);
  int found = 0;
  const auto oracle_blocks = oracle.blocks();
  for (const auto& blk : oracle_blocks)
    if (est.count(blk)) ++found;
  return static_cast<double>(found) / static_cast<double>(oracle_blocks.size());
}

// Relative Frobenius reconstruction error of bomp codes at the given block
// sparsity.
inline double reconstruction_error(const TrainingSet& ys, const Dictionary& d,
                                   const BlockStructure& b, int block_sparsity,
                                   double residual_tolerance = 1e-9) {
  const double y_norm = ys.signals().norm();
  if (y_norm == 0.0) throw DataError("zero-energy set has no relative error");
  ExperimentConfig cfg;
  cfg.block_sparsity = block_sparsity;
  cfg.residual_tolerance = residual_tolerance;
  const SparseCodes codes = batch_code(d, b, ys, cfg);
  const double r = (ys.signals() - d.atoms() * codes.coefficients()).norm();
  return r / y_norm;
}

}  // namespace blockdict
