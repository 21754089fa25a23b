#pragma once

// Synthetic ground truth. An oracle dictionary is built from one random
// gaussian base atom per block plus clones of it, each clone being the base
// plus a scaled fixed noise direction; the scale is bisected until the mean
// absolute pairwise correlation inside blocks lands within 0.02 of the
// requested target. Signals are random weighted sums of whole blocks, and
// noise is added at an exact SNR relative to the clean matrix.

#include "blockdict/core.hpp"
#include "blockdict/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace blockdict {

struct OracleSpec {
  int m = 30;
  int n_atoms = 60;
  int block_size = 3;
  double target_intra_corr = 0.68;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (m < 1) fail("m must be positive");
    if (n_atoms < 1) fail("n_atoms must be positive");
    if (block_size < 2) fail("oracle block_size must be at least 2");
    if (n_atoms % block_size != 0) fail("block_size must divide n_atoms");
    if (!(target_intra_corr >= 0.5 && target_intra_corr <= 1.0))
      fail("target_intra_corr must lie in [0.5, 1]");
  }
};

// Tolerance around the intra-block correlation target.
inline constexpr double kIntraCorrWindow = 0.02;

namespace detail {

// Mean absolute pairwise correlation inside consecutive blocks of `bs`.
inline double mean_intra_corr(const Matrix& atoms, int bs) {
  double sum = 0.0;
  long pairs = 0;
  for (Index b0 = 0; b0 < atoms.cols(); b0 += bs) {
    for (Index i = 0; i < bs; ++i) {
      for (Index j = i + 1; j < bs; ++j) {
        sum += std::abs(atoms.col(b0 + i).dot(atoms.col(b0 + j)));
        ++pairs;
      }
    }
  }
  return sum / static_cast<double>(pairs);
}

inline Matrix build_oracle_atoms(const Matrix& bases, const Matrix& noise,
                                 int bs, double sigma) {
  const Index m = bases.rows();
  const Index nb = bases.cols();
  Matrix atoms(m, nb * bs);
  for (Index k = 0; k < nb; ++k) {
    atoms.col(k * bs) = bases.col(k) / bases.col(k).norm();
    for (Index i = 1; i < bs; ++i) {
      Vector clone = bases.col(k) + sigma * noise.col(k * (bs - 1) + (i - 1));
      const double norm = clone.norm();
      if (norm == 0.0) throw NumericalError("degenerate clone atom");
      atoms.col(k * bs + i) = clone / norm;
    }
  }
  return atoms;
}

}  // namespace detail

// Oracle dictionary plus its generating structure (consecutive blocks).
inline std::pair<Dictionary, BlockStructure> gen_oracle_dict(const OracleSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int bs = spec.block_size;
  const Index nb = spec.n_atoms / bs;
  const Matrix bases = rng.gaussian_matrix(spec.m, nb);
  for (Index k = 0; k < nb; ++k) {
    if (bases.col(k).norm() == 0.0) throw NumericalError("degenerate base atom");
  }
  const Matrix noise = rng.gaussian_matrix(spec.m, nb * (bs - 1));

  auto realized = [&](double sigma) {
    return detail::mean_intra_corr(detail::build_oracle_atoms(bases, noise, bs, sigma), bs);
  };

  // corr(sigma) starts at 1 and decays; bracket the target, then bisect into
  // the +-0.02 window.
  double sigma = 0.0;
  if (realized(0.0) > spec.target_intra_corr + kIntraCorrWindow) {
    double lo = 0.0, hi = 1.0;
    int doublings = 0;
    while (realized(hi) > spec.target_intra_corr && ++doublings <= 60) hi *= 2.0;
    double achieved = realized(hi);
    if (achieved > spec.target_intra_corr + kIntraCorrWindow)
      throw NumericalError("intra-correlation calibration failed; achieved " +
                           std::to_string(achieved));
    bool ok = std::abs(achieved - spec.target_intra_corr) <= kIntraCorrWindow;
    sigma = hi;
    for (int step = 0; step < 100 && !ok; ++step) {
      const double mid = 0.5 * (lo + hi);
      achieved = realized(mid);
      if (std::abs(achieved - spec.target_intra_corr) <= kIntraCorrWindow) {
        sigma = mid;
        ok = true;
        break;
      }
      if (achieved > spec.target_intra_corr)
        lo = mid;
      else
        hi = mid;
    }
    if (!ok)
      throw NumericalError("intra-correlation calibration failed; achieved " +
                           std::to_string(achieved));
  }

  Dictionary d(detail::build_oracle_atoms(bases, noise, bs, sigma));
  std::vector<int> assignment(static_cast<std::size_t>(spec.n_atoms));
  for (int j = 0; j < spec.n_atoms; ++j) assignment[static_cast<std::size_t>(j)] = j / bs + 1;
  return {std::move(d), BlockStructure(std::move(assignment))};
}

struct GeneratedData {
  TrainingSet signals;
  // Generating block ids (1-based, ascending) per signal.
  std::vector<std::vector<int>> generating_blocks;
};

// Signals as gaussian-weighted sums of `blocks_per_signal` distinct blocks.
inline GeneratedData gen_block_sparse_data_with_supports(const Dictionary& d,
                                                         const BlockStructure& b,
                                                         Index n_signals,
                                                         int blocks_per_signal,
                                                         std::uint64_t seed) {
  if (!b.fully_formed()) throw DataError("block structure has unassigned atoms");
  if (b.atom_count() != d.atom_count())
    throw DataError("block structure does not match dictionary");
  if (n_signals < 1) throw DataError("n_signals must be positive");
  if (blocks_per_signal < 1 || blocks_per_signal > b.block_count())
    throw DataError("blocks_per_signal must lie in [1, n_blocks]");

  Rng rng(seed);
  const auto blocks = b.blocks();
  Matrix Y = Matrix::Zero(d.dim(), n_signals);
  std::vector<std::vector<int>> generating(static_cast<std::size_t>(n_signals));
  for (Index i = 0; i < n_signals; ++i) {
    auto chosen = rng.sample_without_replacement(b.block_count(), blocks_per_signal);
    std::sort(chosen.begin(), chosen.end());
    auto& ids = generating[static_cast<std::size_t>(i)];
    for (Index k : chosen) {
      ids.push_back(static_cast<int>(k) + 1);
      for (Index a : blocks[static_cast<std::size_t>(k)])
        Y.col(i) += rng.gaussian() * d.atoms().col(a);
    }
  }
  return GeneratedData{TrainingSet(std::move(Y)), std::move(generating)};
}

inline TrainingSet gen_block_sparse_data(const Dictionary& d, const BlockStructure& b,
                                         Index n_signals, int blocks_per_signal,
                                         std::uint64_t seed) {
  return gen_block_sparse_data_with_supports(d, b, n_signals, blocks_per_signal, seed)
      .signals;
}

// Additive gaussian noise scaled so that 10*log10(|Y|^2/|N|^2) is exactly
// snr_db. Infinite SNR returns the input untouched.
inline TrainingSet add_noise_snr(const TrainingSet& ys, double snr_db,
                                 std::uint64_t seed) {
  if (std::isnan(snr_db)) throw DataError("snr_db must not be NaN");
  if (std::isinf(snr_db)) {
    if (snr_db < 0.0) throw DataError("snr_db must not be -inf");
    return ys;
  }
  const double y_norm = ys.signals().norm();
  if (y_norm == 0.0) throw DataError("cannot set an SNR on a zero-energy set");
  Rng rng(seed);
  Matrix G = rng.gaussian_matrix(ys.dim(), ys.size());
  const double g_norm = G.norm();
  if (g_norm == 0.0) throw NumericalError("degenerate noise draw");
  const double scale = y_norm / (g_norm * std::pow(10.0, snr_db / 20.0));
  Matrix noisy = ys.signals() + scale * G;
  if (ys.has_classes()) return TrainingSet(std::move(noisy), ys.class_of_signal());
  return TrainingSet(std::move(noisy));
}

}  // namespace blockdict
