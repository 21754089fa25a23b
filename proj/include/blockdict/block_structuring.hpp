#pragma once

// Block structure estimators.
//
// sac_estimate agglomerates singleton blocks bottom-up: the pair of blocks
// whose signal supports intersect the most is merged, subject to the size
// cap, until no pair shares a signal.
//
// cgc_estimate clusters top-down on atom correlations: every not-yet-grouped
// atom scores the cumulative correlation to its best partners, the winner
// seeds the next block, and the admissible block size shrinks in steps of
// one over the tail of the assignment (shrink_schedule) so leftover atoms
// land in smaller blocks instead of arbitrary ones.
//
// supervised_cgc_estimate runs the same clustering inside each class's atom
// range, so no block ever crosses a class boundary.

#include "blockdict/core.hpp"

#include <bit>
#include <cstdint>
#include <vector>

namespace blockdict {

// Admissible block size while n_alive atoms remain unassigned. Full size
// until the alive count drops to ceil(shrink_fraction * n_total); that tail
// is split into base_size-1 equal bands, one size step per band.
inline int shrink_schedule(int n_alive, int n_total, int base_size,
                           double shrink_fraction) {
  if (n_total < 1) throw DataError("n_total must be positive");
  if (n_alive < 1 || n_alive > n_total)
    throw DataError("n_alive must lie in [1, n_total]");
  if (base_size < 1) throw DataError("base_size must be positive");
  if (!(shrink_fraction > 0.0 && shrink_fraction < 1.0))
    throw ConfigError("shrink_fraction must lie in (0,1)");
  if (base_size == 1) return 1;
  // Guarded ceil: products like 0.2*60 must not creep past their integer.
  const int threshold =
      static_cast<int>(std::ceil(shrink_fraction * static_cast<double>(n_total) - 1e-9));
  if (n_alive > threshold) return base_size;
  const int bands = base_size - 1;
  // Smallest k with n_alive <= threshold * k / bands.
  const int k = static_cast<int>(
      (static_cast<std::int64_t>(n_alive) * bands + threshold - 1) / threshold);
  return std::max(1, std::min(k, bands));
}

namespace detail {

// One clustering pass over the atoms listed in workspace.alive. Appends
// blocks to `assignment` with ids next_id, next_id+1, ... in formation
// order and returns the next free id. winning_h, when given, records the
// winning seed score of each formed block.
inline int cgc_cluster(CgcWorkspace& w, int max_block_size, double shrink_fraction,
                       std::vector<int>& assignment, int next_id,
                       std::vector<double>* winning_h = nullptr) {
  const int n_total = static_cast<int>(w.alive.size());
  while (!w.alive.empty()) {
    const int n_alive = static_cast<int>(w.alive.size());
    const int cap = shrink_schedule(n_alive, n_total, max_block_size, shrink_fraction);
    const int group_size = std::min(cap, n_alive);
    const int partners_needed = group_size - 1;

    // Score every alive atom: sum of its partners_needed largest
    // correlations to other alive atoms. Partner ties go to lower indices.
    Index best_seed = -1;
    double best_h = 0.0;
    std::vector<Index> best_partners;
    std::vector<char> taken(w.alive.size());
    std::vector<Index> partners;
    for (std::size_t si = 0; si < w.alive.size(); ++si) {
      const Index seed = w.alive[si];
      partners.clear();
      std::fill(taken.begin(), taken.end(), 0);
      double h = 0.0;
      for (int pick = 0; pick < partners_needed; ++pick) {
        std::size_t best_pi = w.alive.size();
        double best_c = 0.0;
        for (std::size_t pi = 0; pi < w.alive.size(); ++pi) {
          if (pi == si || taken[pi]) continue;
          const double c = w.corr(seed, w.alive[pi]);
          if (best_pi == w.alive.size() || c > best_c + kTieTolerance) {
            best_pi = pi;
            best_c = c;
          }
        }
        taken[best_pi] = 1;
        partners.push_back(w.alive[best_pi]);
        h += best_c;
      }
      w.scores[seed] = h;
      w.candidate_groups[static_cast<std::size_t>(seed)] = partners;
      if (best_seed < 0 || h > best_h + kTieTolerance) {
        best_seed = seed;
        best_h = h;
        best_partners = partners;
      }
    }

    // Form the block and retire its atoms.
    if (winning_h) winning_h->push_back(best_h);
    std::vector<Index> group = {best_seed};
    group.insert(group.end(), best_partners.begin(), best_partners.end());
    for (Index a : group) {
      assignment[static_cast<std::size_t>(a)] = next_id;
      w.corr.row(a).setZero();
      w.corr.col(a).setZero();
    }
    ++next_id;
    std::vector<Index> still_alive;
    still_alive.reserve(w.alive.size() - group.size());
    for (Index a : w.alive) {
      if (assignment[static_cast<std::size_t>(a)] == 0) still_alive.push_back(a);
    }
    w.alive = std::move(still_alive);
  }
  return next_id;
}

}  // namespace detail

inline BlockStructure cgc_estimate(const Dictionary& d, int max_block_size,
                                   double shrink_fraction = 0.2) {
  if (max_block_size < 1) throw DataError("max_block_size must be positive");
  CgcWorkspace w = CgcWorkspace::from_dictionary(d);
  std::vector<int> assignment(static_cast<std::size_t>(d.atom_count()), 0);
  detail::cgc_cluster(w, max_block_size, shrink_fraction, assignment, 1);
  return BlockStructure(std::move(assignment));
}

inline BlockStructure supervised_cgc_estimate(const Dictionary& d,
                                              const ClassLabels& labels,
                                              int max_block_size,
                                              double shrink_fraction = 0.2) {
  if (labels.atom_count() != d.atom_count())
    throw DataError("class labels do not match dictionary");
  if (max_block_size < 1) throw DataError("max_block_size must be positive");
  CgcWorkspace full = CgcWorkspace::from_dictionary(d);
  std::vector<int> assignment(static_cast<std::size_t>(d.atom_count()), 0);
  int next_id = 1;
  for (int c = 1; c <= labels.class_count(); ++c) {
    auto [first, last] = labels.class_range(c);
    CgcWorkspace w;
    w.corr = full.corr;
    // Blind the pass to every atom outside the class.
    for (Index j = 0; j < d.atom_count(); ++j) {
      if (j < first || j >= last) {
        w.corr.row(j).setZero();
        w.corr.col(j).setZero();
      }
    }
    w.alive.clear();
    for (Index j = first; j < last; ++j) w.alive.push_back(j);
    w.scores = Vector::Zero(d.atom_count());
    w.candidate_groups.assign(static_cast<std::size_t>(d.atom_count()), {});
    next_id = detail::cgc_cluster(w, max_block_size, shrink_fraction, assignment, next_id);
  }
  return BlockStructure(std::move(assignment));
}

// Bottom-up agglomeration on shared sparse-code supports. Supports are kept
// as bitmasks over signals; the merge score is the popcount of the AND.
inline BlockStructure sac_estimate(const Dictionary& d, const SparseCodes& codes,
                                   int max_block_size) {
  const Index n = d.atom_count();
  if (codes.atom_count() != n) throw DataError("codes do not match dictionary");
  if (codes.signal_count() < 1) throw DataError("sac needs at least one coded signal");
  if (max_block_size < 1) throw DataError("max_block_size must be positive");

  const Index n_s = codes.signal_count();
  const std::size_t words = static_cast<std::size_t>((n_s + 63) / 64);

  struct Block {
    std::vector<Index> atoms;
    std::vector<std::uint64_t> mask;
    bool alive = true;
  };
  std::vector<Block> blocks(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    auto& blk = blocks[static_cast<std::size_t>(j)];
    blk.atoms = {j};
    blk.mask.assign(words, 0);
    for (Index s = 0; s < n_s; ++s) {
      if (codes.coefficients()(j, s) != 0.0)
        blk.mask[static_cast<std::size_t>(s) >> 6] |= 1ull << (s & 63);
    }
  }

  auto intersection = [&](const Block& a, const Block& b) {
    long count = 0;
    for (std::size_t w = 0; w < words; ++w)
      count += std::popcount(a.mask[w] & b.mask[w]);
    return count;
  };

  while (true) {
    long best = 0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (!blocks[i].alive) continue;
      for (std::size_t j = i + 1; j < blocks.size(); ++j) {
        if (!blocks[j].alive) continue;
        if (blocks[i].atoms.size() + blocks[j].atoms.size() >
            static_cast<std::size_t>(max_block_size))
          continue;
        const long inter = intersection(blocks[i], blocks[j]);
        if (inter > best) {  // integer scores: first maximum wins ties
          best = inter;
          bi = i;
          bj = j;
        }
      }
    }
    if (best == 0) break;
    auto& keep = blocks[bi];
    auto& gone = blocks[bj];
    keep.atoms.insert(keep.atoms.end(), gone.atoms.begin(), gone.atoms.end());
    std::sort(keep.atoms.begin(), keep.atoms.end());
    for (std::size_t w = 0; w < words; ++w) keep.mask[w] |= gone.mask[w];
    gone.alive = false;
  }

  // Contiguous ids in order of each block's smallest atom.
  std::vector<const Block*> final_blocks;
  for (const auto& blk : blocks)
    if (blk.alive) final_blocks.push_back(&blk);
  std::sort(final_blocks.begin(), final_blocks.end(),
            [](const Block* a, const Block* b) { return a->atoms[0] < b->atoms[0]; });
  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  int id = 1;
  for (const Block* blk : final_blocks) {
    for (Index a : blk->atoms) assignment[static_cast<std::size_t>(a)] = id;
    ++id;
  }
  return BlockStructure(std::move(assignment));
}

}  // namespace blockdict
