#pragma once

// Seeded Monte Carlo studies on synthetic block-sparse data, shared by the
// CLI and the acceptance checks. Every study derives one seed per (trial,
// condition, draw site) from the master seed, so trial order never matters
// and re-runs are byte-identical. Results carry per-trial values and means
// and render to fixed-column CSV.
//
// Conventions pinned here:
//   - sac-mode training re-estimates the structure every iteration;
//     cgc-mode estimates it once and keeps it fixed.
//   - recovery studies pass a tiny shrink fraction (0.01) so the size
//     schedule never splits the tail of a uniform oracle partition.
//   - the noise study trains on noisy signals but measures reconstruction
//     of the clean ones, so the metric tracks dictionary quality rather
//     than the unrepresentable noise floor.

#include "blockdict/analysis.hpp"
#include "blockdict/classify.hpp"
#include "blockdict/core.hpp"
#include "blockdict/dict_learning.hpp"
#include "blockdict/rng.hpp"
#include "blockdict/synthetic.hpp"

#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace blockdict {

// ---------------------------------------------------------------------------
// CSV plumbing.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ',';
      out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += row[i];
      }
      out += '\n';
    }
    return out;
  }
};

inline std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt_int(long v) { return std::to_string(v); }

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------
// Study setup: defaults reproduce the reference synthetic corpus
// (30x60 oracle, block size 3, intra-correlation 0.68, 5000 two-block
// signals, block sparsity 3).
// ---------------------------------------------------------------------------

struct StudySetup {
  ExperimentConfig cfg;
  int oracle_m = 30;
  int oracle_n_atoms = 60;
  int oracle_block_size = 3;
  double target_intra_corr = 0.68;
  Index n_signals = 5000;
  int blocks_per_signal = 2;

  std::vector<double> corr_grid = {0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<int> bs_grid = {2, 3, 4, 5, 6};
  std::vector<double> snr_grid = {30.0, 20.0, 10.0};
  std::vector<int> pstar_grid = {1, 2, 3, 4, 5};

  // Recovery studies effectively disable block-size shrinking; a uniform
  // oracle partition is unrecoverable otherwise.
  double recovery_shrink_fraction = 0.01;

  // Classification benchmark.
  int n_classes = 5;
  int blocks_per_class = 2;
  int class_pstar = 1;
  Index train_per_class = 120;
  Index test_per_class = 40;
  double classify_snr_db = 20.0;

  OracleSpec oracle_spec(int block_size, double corr, std::uint64_t seed) const {
    OracleSpec s;
    s.m = oracle_m;
    s.n_atoms = oracle_n_atoms;
    s.block_size = block_size;
    s.target_intra_corr = corr;
    s.seed = seed;
    return s;
  }
};

namespace detail {

inline ExperimentConfig mode_config(const ExperimentConfig& base, StructureMode mode) {
  ExperimentConfig c = base;
  c.structure_mode = mode;
  // sac refines the structure as the atoms move; cgc trusts its first
  // correlation clustering.
  c.structure_update_period = mode == StructureMode::sac ? 1 : kInfinitePeriod;
  return c;
}

// KSVD initializer shared by both modes of one trial.
inline Dictionary ksvd_init(const TrainingSet& ys, const StudySetup& setup,
                            std::uint64_t seed) {
  auto [d, codes, report] =
      ksvd_train(ys, setup.oracle_n_atoms, setup.cfg.atom_sparsity,
                 setup.cfg.init_iterations, seed);
  (void)codes;
  (void)report;
  return std::move(d);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Recovery study (structure estimators against the oracle partition).
// ---------------------------------------------------------------------------

struct RecoveryStudyResult {
  struct Cell {
    double target_corr;
    int block_size;
    std::string method;  // "cgc" | "sac"
    std::vector<double> recoveries;
    double mean = 0.0;
  };
  std::vector<Cell> cells;

  CsvTable table() const {
    CsvTable t;
    t.columns = {"experiment", "trial", "target_corr", "block_size", "method",
                 "recovery"};
    for (const auto& c : cells) {
      for (std::size_t i = 0; i < c.recoveries.size(); ++i)
        t.rows.push_back({"fig5", fmt_int(static_cast<long>(i) + 1),
                          fmt_num(c.target_corr), fmt_int(c.block_size), c.method,
                          fmt_num(c.recoveries[i])});
      t.rows.push_back({"fig5", "mean", fmt_num(c.target_corr),
                        fmt_int(c.block_size), c.method, fmt_num(c.mean)});
    }
    return t;
  }

  const Cell& cell(double corr, int bs, const std::string& method) const {
    for (const auto& c : cells)
      if (c.target_corr == corr && c.block_size == bs && c.method == method) return c;
    throw DataError("no such recovery cell");
  }
};

// cgc recovery reads the structure straight off the oracle dictionary; sac
// recovery codes a generated corpus with omp (sparsity matched to the
// generating support size) and clusters the supports.
inline RecoveryStudyResult run_recovery_study(const StudySetup& setup) {
  setup.cfg.validate();
  RecoveryStudyResult out;
  for (std::size_t ci = 0; ci < setup.corr_grid.size(); ++ci) {
    for (std::size_t bi = 0; bi < setup.bs_grid.size(); ++bi) {
      const double corr = setup.corr_grid[ci];
      const int bs = setup.bs_grid[bi];
      RecoveryStudyResult::Cell cgc_cell{corr, bs, "cgc", {}, 0.0};
      RecoveryStudyResult::Cell sac_cell{corr, bs, "sac", {}, 0.0};
      for (int trial = 0; trial < setup.cfg.trials; ++trial) {
        const std::uint64_t base = chain_seed(
            setup.cfg.rng_seed, {1, ci, bi, static_cast<std::uint64_t>(trial)});
        auto [d, oracle_b] = gen_oracle_dict(
            setup.oracle_spec(bs, corr, chain_seed(base, {1})));

        const BlockStructure cgc_b =
            cgc_estimate(d, bs, setup.recovery_shrink_fraction);
        cgc_cell.recoveries.push_back(block_recovery_rate(cgc_b, oracle_b));

        const TrainingSet data = gen_block_sparse_data(
            d, oracle_b, setup.n_signals, setup.blocks_per_signal,
            chain_seed(base, {2}));
        ExperimentConfig code_cfg = setup.cfg;
        code_cfg.atom_sparsity = setup.blocks_per_signal * bs;
        const SparseCodes codes = batch_code(d, data, code_cfg);
        const BlockStructure sac_b = sac_estimate(d, codes, bs);
        sac_cell.recoveries.push_back(block_recovery_rate(sac_b, oracle_b));
      }
      cgc_cell.mean = mean_of(cgc_cell.recoveries);
      sac_cell.mean = mean_of(sac_cell.recoveries);
      out.cells.push_back(std::move(cgc_cell));
      out.cells.push_back(std::move(sac_cell));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence study (error per iteration, both training modes, shared
// initializer per trial).
// ---------------------------------------------------------------------------

struct ConvergenceStudyResult {
  std::vector<std::vector<double>> sac_curves;  // [trial][iteration]
  std::vector<std::vector<double>> cgc_curves;
  std::vector<double> sac_mean;  // [iteration]
  std::vector<double> cgc_mean;

  CsvTable table() const {
    CsvTable t;
    t.columns = {"experiment", "trial", "method", "iteration", "rel_error"};
    auto emit = [&](const std::string& method,
                    const std::vector<std::vector<double>>& curves,
                    const std::vector<double>& mean) {
      for (std::size_t tr = 0; tr < curves.size(); ++tr)
        for (std::size_t it = 0; it < curves[tr].size(); ++it)
          t.rows.push_back({"fig6a", fmt_int(static_cast<long>(tr) + 1), method,
                            fmt_int(static_cast<long>(it) + 1),
                            fmt_num(curves[tr][it])});
      for (std::size_t it = 0; it < mean.size(); ++it)
        t.rows.push_back({"fig6a", "mean", method,
                          fmt_int(static_cast<long>(it) + 1), fmt_num(mean[it])});
    };
    emit("cgc", cgc_curves, cgc_mean);
    emit("sac", sac_curves, sac_mean);
    return t;
  }
};

inline ConvergenceStudyResult run_convergence_study(const StudySetup& setup) {
  setup.cfg.validate();
  ConvergenceStudyResult out;
  for (int trial = 0; trial < setup.cfg.trials; ++trial) {
    const std::uint64_t base =
        chain_seed(setup.cfg.rng_seed, {2, static_cast<std::uint64_t>(trial)});
    auto [d, oracle_b] = gen_oracle_dict(setup.oracle_spec(
        setup.oracle_block_size, setup.target_intra_corr, chain_seed(base, {1})));
    const TrainingSet data =
        gen_block_sparse_data(d, oracle_b, setup.n_signals,
                              setup.blocks_per_signal, chain_seed(base, {2}));
    const Dictionary d0 = detail::ksvd_init(data, setup, chain_seed(base, {3}));

    for (StructureMode mode : {StructureMode::cgc, StructureMode::sac}) {
      // Curve entries are evaluation errors: the dictionary after k updates,
      // freshly block-sparse coded against the training data.
      std::vector<double> curve;
      const ExperimentConfig c = detail::mode_config(setup.cfg, mode);
      auto snapshot = [&](int, const Dictionary& dk, const BlockStructure& bk) {
        curve.push_back(reconstruction_error(data, dk, bk, c.block_sparsity,
                                             c.residual_tolerance));
      };
      auto [dt, bt, report] = bksvd_train(data, d0, c, snapshot);
      (void)dt;
      (void)bt;
      (void)report;
      if (mode == StructureMode::cgc)
        out.cgc_curves.push_back(std::move(curve));
      else
        out.sac_curves.push_back(std::move(curve));
    }
  }
  const std::size_t iters = out.cgc_curves.front().size();
  out.cgc_mean.assign(iters, 0.0);
  out.sac_mean.assign(iters, 0.0);
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<double> c, s;
    for (const auto& curve : out.cgc_curves) c.push_back(curve[it]);
    for (const auto& curve : out.sac_curves) s.push_back(curve[it]);
    out.cgc_mean[it] = mean_of(c);
    out.sac_mean[it] = mean_of(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Condition sweeps (noise / learned block size / generating sparsity) share
// one result shape: final error per (condition, method, trial).
// ---------------------------------------------------------------------------

struct ConditionStudyResult {
  std::string experiment_id;
  std::string param_name;
  std::vector<std::string> param_values;        // formatted, one per condition
  std::vector<std::vector<double>> sac_errors;  // [condition][trial]
  std::vector<std::vector<double>> cgc_errors;

  double sac_mean(std::size_t i) const { return mean_of(sac_errors[i]); }
  double cgc_mean(std::size_t i) const { return mean_of(cgc_errors[i]); }

  CsvTable table() const {
    CsvTable t;
    t.columns = {"experiment", "trial", "method", param_name, "rel_error"};
    for (std::size_t i = 0; i < param_values.size(); ++i) {
      for (const char* method : {"cgc", "sac"}) {
        const auto& errs =
            std::string(method) == "cgc" ? cgc_errors[i] : sac_errors[i];
        for (std::size_t tr = 0; tr < errs.size(); ++tr)
          t.rows.push_back({experiment_id, fmt_int(static_cast<long>(tr) + 1),
                            method, param_values[i], fmt_num(errs[tr])});
        t.rows.push_back({experiment_id, "mean", method, param_values[i],
                          fmt_num(mean_of(errs))});
      }
    }
    return t;
  }
};

// Noise study: train on noisy data at each SNR (noiseless first), then
// measure how well the learned dictionary reconstructs the clean signals.
inline ConditionStudyResult run_noise_study(const StudySetup& setup) {
  setup.cfg.validate();
  ConditionStudyResult out;
  out.experiment_id = "fig6b";
  out.param_name = "snr_db";
  std::vector<double> conditions = {std::numeric_limits<double>::infinity()};
  conditions.insert(conditions.end(), setup.snr_grid.begin(), setup.snr_grid.end());
  for (double snr : conditions) out.param_values.push_back(fmt_num(snr));
  out.sac_errors.assign(conditions.size(), {});
  out.cgc_errors.assign(conditions.size(), {});

  for (int trial = 0; trial < setup.cfg.trials; ++trial) {
    const std::uint64_t base =
        chain_seed(setup.cfg.rng_seed, {3, static_cast<std::uint64_t>(trial)});
    auto [d, oracle_b] = gen_oracle_dict(setup.oracle_spec(
        setup.oracle_block_size, setup.target_intra_corr, chain_seed(base, {1})));
    const TrainingSet clean =
        gen_block_sparse_data(d, oracle_b, setup.n_signals,
                              setup.blocks_per_signal, chain_seed(base, {2}));

    for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
      const TrainingSet train_set =
          add_noise_snr(clean, conditions[ci], chain_seed(base, {4, ci}));
      const Dictionary d0 =
          detail::ksvd_init(train_set, setup, chain_seed(base, {3, ci}));
      for (StructureMode mode : {StructureMode::cgc, StructureMode::sac}) {
        auto [dt, bt, report] =
            bksvd_train(train_set, d0, detail::mode_config(setup.cfg, mode));
        (void)report;
        const double err = reconstruction_error(clean, dt, bt,
                                                setup.cfg.block_sparsity,
                                                setup.cfg.residual_tolerance);
        (mode == StructureMode::cgc ? out.cgc_errors : out.sac_errors)[ci]
            .push_back(err);
      }
    }
  }
  return out;
}

// Learned-block-size study: same data and initializer per trial, trained at
// each max block size.
inline ConditionStudyResult run_block_size_study(const StudySetup& setup) {
  setup.cfg.validate();
  ConditionStudyResult out;
  out.experiment_id = "fig6c";
  out.param_name = "block_size";
  for (int bs : setup.bs_grid) out.param_values.push_back(fmt_int(bs));
  out.sac_errors.assign(setup.bs_grid.size(), {});
  out.cgc_errors.assign(setup.bs_grid.size(), {});

  for (int trial = 0; trial < setup.cfg.trials; ++trial) {
    const std::uint64_t base =
        chain_seed(setup.cfg.rng_seed, {4, static_cast<std::uint64_t>(trial)});
    auto [d, oracle_b] = gen_oracle_dict(setup.oracle_spec(
        setup.oracle_block_size, setup.target_intra_corr, chain_seed(base, {1})));
    const TrainingSet data =
        gen_block_sparse_data(d, oracle_b, setup.n_signals,
                              setup.blocks_per_signal, chain_seed(base, {2}));
    const Dictionary d0 = detail::ksvd_init(data, setup, chain_seed(base, {3}));

    for (std::size_t bi = 0; bi < setup.bs_grid.size(); ++bi) {
      for (StructureMode mode : {StructureMode::cgc, StructureMode::sac}) {
        ExperimentConfig c = detail::mode_config(setup.cfg, mode);
        c.max_block_size = setup.bs_grid[bi];
        auto [dt, bt, report] = bksvd_train(data, d0, c);
        (void)report;
        (mode == StructureMode::cgc ? out.cgc_errors : out.sac_errors)[bi]
            .push_back(reconstruction_error(data, dt, bt, c.block_sparsity,
                                            c.residual_tolerance));
      }
    }
  }
  return out;
}

// Generating-sparsity study: data drawn with p* blocks per signal, coded
// with block sparsity p*.
inline ConditionStudyResult run_sparsity_study(const StudySetup& setup) {
  setup.cfg.validate();
  ConditionStudyResult out;
  out.experiment_id = "fig6d";
  out.param_name = "blocks_per_signal";
  for (int p : setup.pstar_grid) out.param_values.push_back(fmt_int(p));
  out.sac_errors.assign(setup.pstar_grid.size(), {});
  out.cgc_errors.assign(setup.pstar_grid.size(), {});

  for (int trial = 0; trial < setup.cfg.trials; ++trial) {
    const std::uint64_t base =
        chain_seed(setup.cfg.rng_seed, {5, static_cast<std::uint64_t>(trial)});
    auto [d, oracle_b] = gen_oracle_dict(setup.oracle_spec(
        setup.oracle_block_size, setup.target_intra_corr, chain_seed(base, {1})));

    for (std::size_t pi = 0; pi < setup.pstar_grid.size(); ++pi) {
      const int pstar = setup.pstar_grid[pi];
      const TrainingSet data = gen_block_sparse_data(
          d, oracle_b, setup.n_signals, pstar, chain_seed(base, {2, pi}));
      const Dictionary d0 =
          detail::ksvd_init(data, setup, chain_seed(base, {3, pi}));
      for (StructureMode mode : {StructureMode::cgc, StructureMode::sac}) {
        ExperimentConfig c = detail::mode_config(setup.cfg, mode);
        c.block_sparsity = pstar;
        auto [dt, bt, report] = bksvd_train(data, d0, c);
        (void)report;
        (mode == StructureMode::cgc ? out.cgc_errors : out.sac_errors)[pi]
            .push_back(reconstruction_error(data, dt, bt, c.block_sparsity,
                                            c.residual_tolerance));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification benchmark: supervised vs unsupervised vs plain KSVD with
// equal atom budgets on class-partitioned oracle data.
// ---------------------------------------------------------------------------

struct ClassifyStudyResult {
  // accuracies[rule][mode] with rules {residual, energy} and modes
  // {supervised_cgc, cgc, ksvd}.
  std::map<std::string, std::map<std::string, std::vector<double>>> accuracies;

  double mean(const std::string& rule, const std::string& mode) const {
    return mean_of(accuracies.at(rule).at(mode));
  }

  CsvTable table() const {
    CsvTable t;
    t.columns = {"experiment", "trial", "rule", "dictionary_mode", "accuracy"};
    for (const char* rule : {"residual", "energy"}) {
      for (const char* mode : {"supervised_cgc", "cgc", "ksvd"}) {
        const auto& accs = accuracies.at(rule).at(mode);
        for (std::size_t tr = 0; tr < accs.size(); ++tr)
          t.rows.push_back({"classify", fmt_int(static_cast<long>(tr) + 1), rule,
                            mode, fmt_num(accs[tr])});
        t.rows.push_back({"classify", "mean", rule, mode,
                          fmt_num(mean_of(accs))});
      }
    }
    return t;
  }
};

namespace detail {

// Sort atoms so classes are contiguous ascending, remapping the structure;
// block-major labels stay pure by construction.
inline std::tuple<Dictionary, BlockStructure, ClassLabels> sort_by_class(
    const Dictionary& d, const BlockStructure& b,
    const std::vector<int>& label_of_atom) {
  const Index n = d.atom_count();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index c) {
    return label_of_atom[static_cast<std::size_t>(a)] <
           label_of_atom[static_cast<std::size_t>(c)];
  });
  Matrix atoms(d.dim(), n);
  std::vector<int> assignment(static_cast<std::size_t>(n));
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<int> id_map(static_cast<std::size_t>(b.block_count()) + 1, 0);
  int next_id = 0;
  for (Index pos = 0; pos < n; ++pos) {
    const Index src = order[static_cast<std::size_t>(pos)];
    atoms.col(pos) = d.atoms().col(src);
    labels[static_cast<std::size_t>(pos)] = label_of_atom[static_cast<std::size_t>(src)];
    const int old_id = b.id_of(src);
    if (id_map[static_cast<std::size_t>(old_id)] == 0)
      id_map[static_cast<std::size_t>(old_id)] = ++next_id;
    assignment[static_cast<std::size_t>(pos)] = id_map[static_cast<std::size_t>(old_id)];
  }
  return {Dictionary(std::move(atoms)), BlockStructure(std::move(assignment)),
          ClassLabels(std::move(labels))};
}

// Majority class of each block by coefficient energy over labeled training
// codes; silent blocks default to class 1.
inline std::vector<int> label_blocks_by_energy(const SparseCodes& codes,
                                               const BlockStructure& b,
                                               const TrainingSet& train) {
  const int C = train.class_count();
  std::vector<int> block_label(static_cast<std::size_t>(b.block_count()), 1);
  for (int id = 1; id <= b.block_count(); ++id) {
    Vector energy = Vector::Zero(C);
    for (Index a : b.block(id)) {
      for (Index s = 0; s < codes.signal_count(); ++s) {
        const double v = codes.coefficients()(a, s);
        if (v != 0.0)
          energy[train.class_of_signal()[static_cast<std::size_t>(s)] - 1] += v * v;
      }
    }
    int best = 1;
    for (int c = 2; c <= C; ++c)
      if (energy[c - 1] > energy[best - 1] + kTieTolerance) best = c;
    block_label[static_cast<std::size_t>(id - 1)] = best;
  }
  std::vector<int> atom_label(static_cast<std::size_t>(b.atom_count()));
  for (Index j = 0; j < b.atom_count(); ++j)
    atom_label[static_cast<std::size_t>(j)] =
        block_label[static_cast<std::size_t>(b.id_of(j) - 1)];
  return atom_label;
}

}  // namespace detail

inline ClassifyStudyResult run_classify_benchmark(const StudySetup& setup) {
  setup.cfg.validate();
  const int C = setup.n_classes;
  const int bs = setup.oracle_block_size;
  const int atoms_per_class = setup.blocks_per_class * bs;
  const int n_atoms = C * atoms_per_class;

  ClassifyStudyResult out;
  for (const char* rule : {"residual", "energy"})
    for (const char* mode : {"supervised_cgc", "cgc", "ksvd"})
      out.accuracies[rule][mode] = {};

  for (int trial = 0; trial < setup.cfg.trials; ++trial) {
    const std::uint64_t base =
        chain_seed(setup.cfg.rng_seed, {6, static_cast<std::uint64_t>(trial)});

    // Class-partitioned oracle: class c owns blocks_per_class consecutive
    // blocks of one oracle dictionary.
    OracleSpec ospec = setup.oracle_spec(bs, setup.target_intra_corr,
                                         chain_seed(base, {1}));
    ospec.n_atoms = n_atoms;
    auto [oracle_d, oracle_b] = gen_oracle_dict(ospec);

    // Per-class signals from the class's own blocks.
    const Index per_class = setup.train_per_class + setup.test_per_class;
    Matrix all_signals(setup.oracle_m, per_class * C);
    std::vector<int> signal_class(static_cast<std::size_t>(per_class * C));
    for (int c = 1; c <= C; ++c) {
      Matrix class_atoms(setup.oracle_m, atoms_per_class);
      for (Index j = 0; j < atoms_per_class; ++j)
        class_atoms.col(j) = oracle_d.atoms().col((c - 1) * atoms_per_class + j);
      std::vector<int> class_assign(static_cast<std::size_t>(atoms_per_class));
      for (int j = 0; j < atoms_per_class; ++j)
        class_assign[static_cast<std::size_t>(j)] = j / bs + 1;
      const TrainingSet class_data = gen_block_sparse_data(
          Dictionary(class_atoms), BlockStructure(class_assign), per_class,
          setup.class_pstar, chain_seed(base, {2, static_cast<std::uint64_t>(c)}));
      all_signals.middleCols((c - 1) * per_class, per_class) = class_data.signals();
      for (Index i = 0; i < per_class; ++i)
        signal_class[static_cast<std::size_t>((c - 1) * per_class + i)] = c;
    }
    const TrainingSet noisy = add_noise_snr(
        TrainingSet(all_signals, signal_class), setup.classify_snr_db,
        chain_seed(base, {3}));

    // Train/test split: the first train_per_class of each class train.
    std::vector<Index> train_idx, test_idx;
    for (int c = 0; c < C; ++c) {
      for (Index i = 0; i < per_class; ++i) {
        (i < setup.train_per_class ? train_idx : test_idx)
            .push_back(c * per_class + i);
      }
    }
    auto subset = [&](const std::vector<Index>& idx) {
      Matrix s(setup.oracle_m, static_cast<Index>(idx.size()));
      std::vector<int> cls(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        s.col(static_cast<Index>(i)) = noisy.signals().col(idx[i]);
        cls[i] = noisy.class_of_signal()[static_cast<std::size_t>(idx[i])];
      }
      return TrainingSet(std::move(s), std::move(cls));
    };
    const TrainingSet train = subset(train_idx);
    const TrainingSet test = subset(test_idx);

    const int p = setup.cfg.block_sparsity;
    struct System {
      std::string mode;
      Dictionary d;
      BlockStructure b;
      ClassLabels l;
      int coding_p;
    };
    std::vector<System> systems;

    {  // supervised
      ExperimentConfig c = setup.cfg;
      c.structure_mode = StructureMode::supervised_cgc;
      c.structure_update_period = 1;
      c.rng_seed = chain_seed(base, {4});
      SupervisedResult r = supervised_train(train, atoms_per_class, c);
      systems.push_back({"supervised_cgc", std::move(r.dict), std::move(r.structure),
                         std::move(r.labels), p});
    }
    {  // unsupervised blocks, labels assigned after the fact
      auto [d0, codes0, rep0] = ksvd_train(train, n_atoms, setup.cfg.atom_sparsity,
                                           setup.cfg.init_iterations,
                                           chain_seed(base, {5}));
      (void)codes0;
      (void)rep0;
      auto [dt, bt, rep] =
          bksvd_train(train, d0, detail::mode_config(setup.cfg, StructureMode::cgc));
      (void)rep;
      ExperimentConfig code_cfg = setup.cfg;
      const SparseCodes train_codes = batch_code(dt, bt, train, code_cfg);
      const auto atom_label = detail::label_blocks_by_energy(train_codes, bt, train);
      auto [ds, bsrt, ls] = detail::sort_by_class(dt, bt, atom_label);
      systems.push_back({"cgc", std::move(ds), std::move(bsrt), std::move(ls), p});
    }
    {  // plain ksvd: singleton blocks, per-atom labels, matched coefficients
      auto [dk, ck, repk] = ksvd_train(train, n_atoms, setup.cfg.atom_sparsity,
                                       setup.cfg.init_iterations +
                                           setup.cfg.outer_iterations,
                                       chain_seed(base, {6}));
      (void)repk;
      const BlockStructure singles = BlockStructure::singletons(n_atoms);
      const auto atom_label = detail::label_blocks_by_energy(
          SparseCodes(ck.coefficients()), singles, train);
      auto [ds, bsrt, ls] = detail::sort_by_class(dk, singles, atom_label);
      systems.push_back({"ksvd", std::move(ds), std::move(bsrt), std::move(ls),
                         p * bs});
    }

    for (const auto& sys : systems) {
      int correct_residual = 0, correct_energy = 0;
      for (Index i = 0; i < test.size(); ++i) {
        const int truth = test.class_of_signal()[static_cast<std::size_t>(i)];
        if (classify_signal(sys.d, sys.b, sys.l, test.signals().col(i), sys.coding_p,
                            ClassifyRule::residual,
                            setup.cfg.residual_tolerance) == truth)
          ++correct_residual;
        if (classify_signal(sys.d, sys.b, sys.l, test.signals().col(i), sys.coding_p,
                            ClassifyRule::energy,
                            setup.cfg.residual_tolerance) == truth)
          ++correct_energy;
      }
      const double denom = static_cast<double>(test.size());
      out.accuracies["residual"][sys.mode].push_back(correct_residual / denom);
      out.accuracies["energy"][sys.mode].push_back(correct_energy / denom);
    }
  }
  return out;
}

}  // namespace blockdict
