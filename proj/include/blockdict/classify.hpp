#pragma once

// Classification on top of a class-labeled block dictionary. A signal is
// block-coded once; the class is then picked either by smallest per-class
// reconstruction residual or by largest per-class coefficient energy. A
// signal whose code is empty is rejected (class 0). A cosine score between
// sparse codes is also provided, together with per-class mean-code
// templates, for nearest-template classification.

#include "blockdict/core.hpp"
#include "blockdict/sparse_coding.hpp"

#include <cmath>
#include <vector>

namespace blockdict {

inline constexpr int kReject = 0;

// Cosine similarity between two code vectors.
inline double cds_score(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("code lengths differ");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cds is undefined for a zero code");
  return a.dot(b) / (na * nb);
}

enum class ClassifyRule { residual, energy };

inline int classify_signal(const Dictionary& d, const BlockStructure& b,
                           const ClassLabels& labels, const Vector& y,
                           int block_sparsity, ClassifyRule rule,
                           double residual_tolerance = 1e-9) {
  if (labels.atom_count() != d.atom_count())
    throw DataError("class labels do not match dictionary");
  for (Index i = 0; i < b.atom_count(); ++i) {
    for (Index j = i + 1; j < b.atom_count(); ++j) {
      if (b.id_of(i) != 0 && b.id_of(i) == b.id_of(j) &&
          labels.label_of(i) != labels.label_of(j))
        throw DataError("block structure is not class-pure");
    }
  }
  const CodingResult r = bomp(d, b, y, block_sparsity, residual_tolerance);
  if (r.selected.empty()) return kReject;

  const int C = labels.class_count();
  int best = kReject;
  double best_score = 0.0;
  for (int c = 1; c <= C; ++c) {
    double score;
    if (rule == ClassifyRule::residual) {
      // Reconstruct with this class's coefficients only.
      Vector approx = Vector::Zero(d.dim());
      for (Index j = 0; j < d.atom_count(); ++j) {
        if (labels.label_of(j) == c && r.code[j] != 0.0)
          approx += r.code[j] * d.atoms().col(j);
      }
      score = -(y - approx).norm();  // larger is better
    } else {
      double e = 0.0;
      for (Index j = 0; j < d.atom_count(); ++j)
        if (labels.label_of(j) == c) e += r.code[j] * r.code[j];
      score = e;
    }
    if (best == kReject || score > best_score + kTieTolerance) {
      best = c;
      best_score = score;
    }
  }
  return best;
}

// Mean bomp code of each class over a labeled training set; column c-1 is
// the template of class c.
inline Matrix class_code_templates(const Dictionary& d, const BlockStructure& b,
                                   const TrainingSet& ys, int block_sparsity,
                                   double residual_tolerance = 1e-9) {
  if (!ys.has_classes()) throw DataError("templates need class-labeled signals");
  ExperimentConfig cfg;
  cfg.block_sparsity = block_sparsity;
  cfg.residual_tolerance = residual_tolerance;
  const SparseCodes codes = batch_code(d, b, ys, cfg);
  Matrix templates = Matrix::Zero(d.atom_count(), ys.class_count());
  std::vector<long> counts(static_cast<std::size_t>(ys.class_count()), 0);
  for (Index i = 0; i < ys.size(); ++i) {
    const int c = ys.class_of_signal()[static_cast<std::size_t>(i)];
    templates.col(c - 1) += codes.coefficients().col(i);
    ++counts[static_cast<std::size_t>(c - 1)];
  }
  for (int c = 0; c < ys.class_count(); ++c)
    templates.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return templates;
}

// Nearest template by cosine score; empty codes are rejected.
inline int classify_signal_cds(const Dictionary& d, const BlockStructure& b,
                               const Matrix& templates, const Vector& y,
                               int block_sparsity, double residual_tolerance = 1e-9) {
  if (templates.rows() != d.atom_count())
    throw DataError("templates do not match dictionary");
  const CodingResult r = bomp(d, b, y, block_sparsity, residual_tolerance);
  if (r.selected.empty() || r.code.norm() == 0.0) return kReject;
  int best = kReject;
  double best_score = 0.0;
  for (Index c = 0; c < templates.cols(); ++c) {
    if (templates.col(c).norm() == 0.0) continue;
    const double s = cds_score(r.code, templates.col(c));
    if (best == kReject || s > best_score + kTieTolerance) {
      best = static_cast<int>(c) + 1;
      best_score = s;
    }
  }
  return best;
}

}  // namespace blockdict
