#pragma once

// Core domain types shared by every other header: dictionaries, block
// structures, training data, sparse codes, class labels and the experiment
// configuration. All types are immutable after construction and validate
// their invariants up front, so downstream code can assume them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blockdict {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error taxonomy mirrored by the CLI exit codes.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Atom norms may drift by this much and still count as unit.
inline constexpr double kUnitNormTolerance = 1e-9;
// Drift up to here is silently renormalized; beyond it the data is rejected.
inline constexpr double kUnitNormRepairLimit = 1e-6;
// Score differences at or below this are ties; ties resolve to lower index.
inline constexpr double kTieTolerance = 1e-12;

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw DataError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dictionary: column-stacked unit-norm atoms.
// ---------------------------------------------------------------------------

class Dictionary {
public:
  explicit Dictionary(Matrix atoms) : atoms_(std::move(atoms)) {
    detail::require(atoms_.rows() >= 1 && atoms_.cols() >= 1,
                    "dictionary must have at least one row and one atom");
    detail::require(atoms_.allFinite(), "non-finite atom");
    for (Index j = 0; j < atoms_.cols(); ++j) {
      const double norm = atoms_.col(j).norm();
      const double drift = std::abs(norm - 1.0);
      if (drift <= kUnitNormTolerance) continue;
      if (drift <= kUnitNormRepairLimit) {
        atoms_.col(j) /= norm;
      } else {
        throw DataError("non-unit atom " + std::to_string(j + 1) +
                        " (norm " + std::to_string(norm) + ")");
      }
    }
  }

  Index dim() const { return atoms_.rows(); }
  Index atom_count() const { return atoms_.cols(); }
  const Matrix& atoms() const { return atoms_; }

private:
  Matrix atoms_;
};

// ---------------------------------------------------------------------------
// BlockStructure: per-atom block ids. Id 0 means "not assigned yet"; the
// positive ids of a valid structure form the contiguous range 1..n_b. Index
// sets are derived on demand so the assignment vector is the single source
// of truth.
// ---------------------------------------------------------------------------

class BlockStructure {
public:
  explicit BlockStructure(std::vector<int> assignment)
      : assignment_(std::move(assignment)) {
    detail::require(!assignment_.empty(), "empty block assignment");
    int max_id = 0;
    for (int id : assignment_) {
      detail::require(id >= 0, "negative block id");
      max_id = std::max(max_id, id);
    }
    std::vector<Index> sizes(static_cast<std::size_t>(max_id) + 1, 0);
    for (int id : assignment_) ++sizes[static_cast<std::size_t>(id)];
    for (int id = 1; id <= max_id; ++id) {
      if (sizes[static_cast<std::size_t>(id)] == 0)
        throw DataError("non-contiguous block ids");
    }
    block_count_ = max_id;
  }

  static BlockStructure unassigned(Index n_atoms) {
    return BlockStructure(std::vector<int>(static_cast<std::size_t>(n_atoms), 0));
  }

  static BlockStructure singletons(Index n_atoms) {
    std::vector<int> a(static_cast<std::size_t>(n_atoms));
    for (Index j = 0; j < n_atoms; ++j) a[static_cast<std::size_t>(j)] = static_cast<int>(j) + 1;
    return BlockStructure(std::move(a));
  }

  Index atom_count() const { return static_cast<Index>(assignment_.size()); }
  int block_count() const { return block_count_; }
  const std::vector<int>& assignment() const { return assignment_; }
  int id_of(Index atom) const { return assignment_[static_cast<std::size_t>(atom)]; }

  bool fully_formed() const {
    return std::none_of(assignment_.begin(), assignment_.end(),
                        [](int id) { return id == 0; });
  }

  // Sorted atom indices of block `id` (1-based id, 0-based atoms).
  std::vector<Index> block(int id) const {
    std::vector<Index> idx;
    for (Index j = 0; j < atom_count(); ++j)
      if (assignment_[static_cast<std::size_t>(j)] == id) idx.push_back(j);
    return idx;
  }

  // All blocks; element k holds block k+1.
  std::vector<std::vector<Index>> blocks() const {
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(block_count_));
    for (Index j = 0; j < atom_count(); ++j) {
      const int id = assignment_[static_cast<std::size_t>(j)];
      if (id > 0) out[static_cast<std::size_t>(id - 1)].push_back(j);
    }
    return out;
  }

private:
  std::vector<int> assignment_;
  int block_count_ = 0;
};

// ---------------------------------------------------------------------------
// TrainingSet: signal columns, optionally tagged with class ids 1..C.
// ---------------------------------------------------------------------------

class TrainingSet {
public:
  explicit TrainingSet(Matrix signals) : signals_(std::move(signals)) {
    detail::require(signals_.rows() >= 1 && signals_.cols() >= 1,
                    "training set must be non-empty");
    detail::require(signals_.allFinite(), "non-finite training signal");
  }

  TrainingSet(Matrix signals, std::vector<int> class_of_signal)
      : TrainingSet(std::move(signals)) {
    detail::require(static_cast<Index>(class_of_signal.size()) == signals_.cols(),
                    "class labels must match signal count");
    int max_class = 0;
    for (int c : class_of_signal) {
      detail::require(c >= 1, "class ids start at 1");
      max_class = std::max(max_class, c);
    }
    std::vector<Index> counts(static_cast<std::size_t>(max_class), 0);
    for (int c : class_of_signal) ++counts[static_cast<std::size_t>(c - 1)];
    for (int c = 1; c <= max_class; ++c)
      detail::require(counts[static_cast<std::size_t>(c - 1)] > 0,
                      "class ids must form a contiguous range 1..C");
    class_of_signal_ = std::move(class_of_signal);
    class_count_ = max_class;
  }

  const Matrix& signals() const { return signals_; }
  Index dim() const { return signals_.rows(); }
  Index size() const { return signals_.cols(); }
  bool has_classes() const { return !class_of_signal_.empty(); }
  const std::vector<int>& class_of_signal() const { return class_of_signal_; }
  int class_count() const { return class_count_; }

  std::vector<Index> signals_of_class(int c) const {
    std::vector<Index> idx;
    for (Index i = 0; i < size(); ++i)
      if (class_of_signal_[static_cast<std::size_t>(i)] == c) idx.push_back(i);
    return idx;
  }

private:
  Matrix signals_;
  std::vector<int> class_of_signal_;
  int class_count_ = 0;
};

// ---------------------------------------------------------------------------
// SparseCodes: a dense coefficient matrix aligned column-wise with the
// training set. Densities here are desk scale, so no sparse storage.
// ---------------------------------------------------------------------------

class SparseCodes {
public:
  explicit SparseCodes(Matrix coefficients) : coefficients_(std::move(coefficients)) {
    detail::require(coefficients_.allFinite(), "non-finite sparse coefficient");
  }

  const Matrix& coefficients() const { return coefficients_; }
  Index atom_count() const { return coefficients_.rows(); }
  Index signal_count() const { return coefficients_.cols(); }

  // Nonzero row indices of one column.
  std::vector<Index> support(Index signal) const {
    std::vector<Index> idx;
    for (Index j = 0; j < coefficients_.rows(); ++j)
      if (coefficients_(j, signal) != 0.0) idx.push_back(j);
    return idx;
  }

  // Number of blocks with at least one nonzero coefficient in `code`.
  static int block_support_size(const Vector& code, const BlockStructure& b) {
    std::vector<char> hit(static_cast<std::size_t>(b.block_count()) + 1, 0);
    int n = 0;
    for (Index j = 0; j < code.size(); ++j) {
      if (code[j] == 0.0) continue;
      const int id = b.id_of(j);
      if (id > 0 && !hit[static_cast<std::size_t>(id)]) {
        hit[static_cast<std::size_t>(id)] = 1;
        ++n;
      }
    }
    return n;
  }

private:
  Matrix coefficients_;
};

// ---------------------------------------------------------------------------
// ClassLabels: per-atom class ids 1..C; atoms of one class occupy one
// contiguous index range, matching the layout produced by supervised
// initialization.
// ---------------------------------------------------------------------------

class ClassLabels {
public:
  explicit ClassLabels(std::vector<int> label_of_atom)
      : label_of_atom_(std::move(label_of_atom)) {
    detail::require(!label_of_atom_.empty(), "empty class label vector");
    int prev = 0;
    for (int c : label_of_atom_) {
      detail::require(c >= 1, "class ids start at 1");
      detail::require(c == prev || c == prev + 1,
                      "class labels must be contiguous ascending runs 1..C");
      prev = c;
    }
    class_count_ = prev;
  }

  Index atom_count() const { return static_cast<Index>(label_of_atom_.size()); }
  int class_count() const { return class_count_; }
  const std::vector<int>& labels() const { return label_of_atom_; }
  int label_of(Index atom) const { return label_of_atom_[static_cast<std::size_t>(atom)]; }

  // [first, last) atom range of class c.
  std::pair<Index, Index> class_range(int c) const {
    Index first = 0;
    while (first < atom_count() && label_of(first) != c) ++first;
    Index last = first;
    while (last < atom_count() && label_of(last) == c) ++last;
    return {first, last};
  }

  Index class_size(int c) const {
    auto [a, b] = class_range(c);
    return b - a;
  }

private:
  std::vector<int> label_of_atom_;
  int class_count_ = 0;
};

// ---------------------------------------------------------------------------
// ExperimentConfig: every tunable of the coders, structure estimators,
// trainers and experiment drivers.
// ---------------------------------------------------------------------------

enum class StructureMode { sac, cgc, supervised_cgc, fixed_supervised };

inline std::string to_string(StructureMode m) {
  switch (m) {
    case StructureMode::sac: return "sac";
    case StructureMode::cgc: return "cgc";
    case StructureMode::supervised_cgc: return "supervised_cgc";
    case StructureMode::fixed_supervised: return "fixed_supervised";
  }
  return "?";
}

inline StructureMode structure_mode_from_string(const std::string& s) {
  if (s == "sac") return StructureMode::sac;
  if (s == "cgc") return StructureMode::cgc;
  if (s == "supervised_cgc") return StructureMode::supervised_cgc;
  if (s == "fixed_supervised") return StructureMode::fixed_supervised;
  throw ConfigError("unknown structure_mode '" + s + "'");
}

// structure_update_period value meaning "estimate once, then keep fixed".
inline constexpr int kInfinitePeriod = std::numeric_limits<int>::max();

struct ExperimentConfig {
  int max_block_size = 3;
  int block_sparsity = 3;
  int atom_sparsity = 6;
  int outer_iterations = 15;
  int structure_update_period = 1;
  double shrink_fraction = 0.2;
  double snr_db = std::numeric_limits<double>::infinity();
  int trials = 50;
  std::uint64_t rng_seed = 0;
  StructureMode structure_mode = StructureMode::cgc;
  double residual_tolerance = 1e-9;
  // Iterations of the plain KSVD pass that builds initial dictionaries.
  int init_iterations = 100;  // enough for the initializer to settle
  // Per-class KSVD passes at supervised initialization; 0 = plain selection.
  int supervised_init_ksvd_iterations = 0;
  // Correlation level for the "pairs above threshold" diagnostic.
  double coherence_threshold = 0.6;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (max_block_size < 1) fail("max_block_size must be positive");
    if (block_sparsity < 1) fail("block_sparsity must be positive");
    if (atom_sparsity < 1) fail("atom_sparsity must be positive");
    if (outer_iterations < 0) fail("outer_iterations must be non-negative");
    if (structure_update_period < 1) fail("structure_update_period must be positive");
    if (!(shrink_fraction > 0.0 && shrink_fraction < 1.0))
      fail("shrink_fraction must lie in (0,1)");
    if (std::isnan(snr_db)) fail("snr_db must be a number or infinite");
    if (trials < 1) fail("trials must be positive");
    if (residual_tolerance < 0.0) fail("residual_tolerance must be >= 0");
    if (init_iterations < 0) fail("init_iterations must be non-negative");
    if (supervised_init_ksvd_iterations < 0)
      fail("supervised_init_ksvd_iterations must be non-negative");
    if (!(coherence_threshold > 0.0 && coherence_threshold < 1.0))
      fail("coherence_threshold must lie in (0,1)");
  }
};

// ---------------------------------------------------------------------------
// CgcWorkspace: correlation bookkeeping for the greedy clustering pass.
// ---------------------------------------------------------------------------

struct CgcWorkspace {
  Matrix corr;                                 // |d_i^T d_j|, zero diagonal
  std::vector<Index> alive;                    // not-yet-grouped atoms, ascending
  Vector scores;                               // h, one slot per atom
  std::vector<std::vector<Index>> candidate_groups;  // per-seed partner lists

  static CgcWorkspace from_dictionary(const Dictionary& d) {
    CgcWorkspace w;
    const Index n = d.atom_count();
    w.corr = (d.atoms().transpose() * d.atoms()).cwiseAbs().cwiseMin(1.0);
    w.corr.diagonal().setZero();
    w.alive.resize(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) w.alive[static_cast<std::size_t>(j)] = j;
    w.scores = Vector::Zero(n);
    w.candidate_groups.assign(static_cast<std::size_t>(n), {});
    return w;
  }
};

}  // namespace blockdict
