#pragma once

// Command line front end. cli_main() is separated from main() so tests can
// drive it in-process and capture streams / exit codes.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "analysis.hpp"
#include "classify.hpp"
#include "core.hpp"
#include "dict_learning.hpp"
#include "experiments.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "synthetic.hpp"

namespace blockdict {
namespace cli {

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      // training / coding parameters
      "max_block_size", "block_sparsity", "atom_sparsity", "outer_iterations",
      "structure_update_period", "shrink_fraction", "snr_db", "trials",
      "rng_seed", "structure_mode", "residual_tolerance", "init_iterations",
      "supervised_init_ksvd_iterations", "coherence_threshold",
      // oracle / data generation
      "m", "n_atoms", "oracle_block_size", "target_intra_corr", "n_signals",
      "blocks_per_signal",
      // experiment grids
      "corr_grid", "bs_grid", "snr_grid", "pstar_grid",
      "recovery_shrink_fraction",
      // classification benchmark
      "n_classes", "blocks_per_class", "class_pstar", "train_per_class",
      "test_per_class", "classify_snr_db",
      // supervised training
      "atoms_per_class",
      // input files
      "data", "dict",
  };
  return keys;
}

inline nlohmann::ordered_json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (known_config_keys().count(item.key()) == 0)
      throw ConfigError("unknown config key '" + item.key() + "'");
  }
  return j;
}

inline int get_int(const nlohmann::ordered_json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

inline double get_double(const nlohmann::ordered_json& j, const std::string& key,
                         double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number())
    throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

// snr_db admits the string "inf"; structure_update_period admits "inf" too
// (meaning: estimate once, never revisit).
inline double get_double_or_inf(const nlohmann::ordered_json& j, const std::string& key,
                                double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("config key '" + key + "' must be a number or \"inf\"");
  }
  if (!v.is_number())
    throw ConfigError("config key '" + key + "' must be a number or \"inf\"");
  return v.get<double>();
}

inline int get_period(const nlohmann::ordered_json& j, const std::string& key,
                      int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return kInfinitePeriod;
    throw ConfigError("config key '" + key + "' must be an integer or \"inf\"");
  }
  if (!v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer or \"inf\"");
  return v.get<int>();
}

inline std::string get_string(const nlohmann::ordered_json& j, const std::string& key,
                              const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string())
    throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

template <typename T>
std::vector<T> get_grid(const nlohmann::ordered_json& j, const std::string& key,
                        std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.empty())
    throw ConfigError("config key '" + key + "' must be a non-empty array");
  std::vector<T> out;
  for (const auto& e : v) {
    if (!e.is_number())
      throw ConfigError("config key '" + key + "' must hold numbers");
    out.push_back(e.get<T>());
  }
  return out;
}

inline void require_keys(const nlohmann::ordered_json& j,
                         std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (!j.contains(k)) throw ConfigError(std::string("missing required key '") + k + "'");
}

// Flag values that override config entries when given on the command line.
struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::string mode;
  std::uint64_t seed = 0;
  int trials = 0;
  bool has_config = false;
  bool has_mode = false;
  bool has_seed = false;
  bool has_trials = false;
};

struct ParsedSetup {
  StudySetup setup;
  nlohmann::ordered_json raw;  // for keys outside StudySetup (data, dict, ...)
};

inline ParsedSetup build_setup(const CommonFlags& flags) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (flags.has_config) j = load_config_json(flags.config_path);

  ExperimentConfig cfg;
  cfg.max_block_size = get_int(j, "max_block_size", cfg.max_block_size);
  cfg.block_sparsity = get_int(j, "block_sparsity", cfg.block_sparsity);
  cfg.atom_sparsity = get_int(j, "atom_sparsity", cfg.atom_sparsity);
  cfg.outer_iterations = get_int(j, "outer_iterations", cfg.outer_iterations);
  cfg.structure_update_period = get_period(j, "structure_update_period", cfg.structure_update_period);
  cfg.shrink_fraction = get_double(j, "shrink_fraction", cfg.shrink_fraction);
  cfg.snr_db = get_double_or_inf(j, "snr_db", cfg.snr_db);
  cfg.trials = get_int(j, "trials", cfg.trials);
  cfg.rng_seed = j.contains("rng_seed")
                     ? j.at("rng_seed").get<std::uint64_t>()
                     : cfg.rng_seed;
  cfg.structure_mode = structure_mode_from_string(
      get_string(j, "structure_mode", to_string(cfg.structure_mode)));
  cfg.residual_tolerance = get_double(j, "residual_tolerance", cfg.residual_tolerance);
  cfg.init_iterations = get_int(j, "init_iterations", cfg.init_iterations);
  cfg.supervised_init_ksvd_iterations =
      get_int(j, "supervised_init_ksvd_iterations", cfg.supervised_init_ksvd_iterations);
  cfg.coherence_threshold = get_double(j, "coherence_threshold", cfg.coherence_threshold);

  if (flags.has_seed) cfg.rng_seed = flags.seed;
  if (flags.has_trials) cfg.trials = flags.trials;
  if (flags.has_mode) cfg.structure_mode = structure_mode_from_string(flags.mode);
  cfg.validate();

  StudySetup setup;
  setup.cfg = cfg;
  setup.oracle_m = get_int(j, "m", setup.oracle_m);
  setup.oracle_n_atoms = get_int(j, "n_atoms", setup.oracle_n_atoms);
  setup.oracle_block_size = get_int(j, "oracle_block_size", setup.oracle_block_size);
  setup.target_intra_corr = get_double(j, "target_intra_corr", setup.target_intra_corr);
  setup.n_signals = get_int(j, "n_signals", setup.n_signals);
  setup.blocks_per_signal = get_int(j, "blocks_per_signal", setup.blocks_per_signal);
  setup.corr_grid = get_grid<double>(j, "corr_grid", setup.corr_grid);
  setup.bs_grid = get_grid<int>(j, "bs_grid", setup.bs_grid);
  setup.snr_grid = get_grid<double>(j, "snr_grid", setup.snr_grid);
  setup.pstar_grid = get_grid<int>(j, "pstar_grid", setup.pstar_grid);
  setup.recovery_shrink_fraction =
      get_double(j, "recovery_shrink_fraction", setup.recovery_shrink_fraction);
  setup.n_classes = get_int(j, "n_classes", setup.n_classes);
  setup.blocks_per_class = get_int(j, "blocks_per_class", setup.blocks_per_class);
  setup.class_pstar = get_int(j, "class_pstar", setup.class_pstar);
  setup.train_per_class = get_int(j, "train_per_class", setup.train_per_class);
  setup.test_per_class = get_int(j, "test_per_class", setup.test_per_class);
  setup.classify_snr_db = get_double_or_inf(j, "classify_snr_db", setup.classify_snr_db);

  if (setup.n_signals < 1) throw ConfigError("n_signals must be >= 1");
  if (setup.blocks_per_signal < 1) throw ConfigError("blocks_per_signal must be >= 1");
  if (setup.recovery_shrink_fraction <= 0.0 || setup.recovery_shrink_fraction > 1.0)
    throw ConfigError("recovery_shrink_fraction must be in (0, 1]");
  if (setup.n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (setup.blocks_per_class < 1) throw ConfigError("blocks_per_class must be >= 1");
  if (setup.class_pstar < 1) throw ConfigError("class_pstar must be >= 1");
  if (setup.train_per_class < 1 || setup.test_per_class < 1)
    throw ConfigError("train_per_class and test_per_class must be >= 1");

  return ParsedSetup{std::move(setup), std::move(j)};
}

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  std::filesystem::path p(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec && !std::filesystem::is_directory(p))
    throw DataError("cannot create output directory " + out_dir);
  return p;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  f << text;
  if (!f) throw DataError("write failed for " + path.string());
}

// ---- subcommand bodies ------------------------------------------------

inline int cmd_gen(const ParsedSetup& ps, const std::filesystem::path& out_dir,
                   std::ostream& out) {
  const auto& j = ps.raw;
  require_keys(j, {"m", "n_atoms", "oracle_block_size", "target_intra_corr",
                   "n_signals", "blocks_per_signal"});
  const auto& s = ps.setup;

  OracleSpec spec;
  spec.m = s.oracle_m;
  spec.n_atoms = s.oracle_n_atoms;
  spec.block_size = s.oracle_block_size;
  spec.target_intra_corr = s.target_intra_corr;
  spec.seed = chain_seed(s.cfg.rng_seed, {1});
  auto [dict, structure] = gen_oracle_dict(spec);

  TrainingSet signals = gen_block_sparse_data(dict, structure, s.n_signals,
                                              s.blocks_per_signal,
                                              chain_seed(s.cfg.rng_seed, {2}));
  if (std::isfinite(s.cfg.snr_db))
    signals = add_noise_snr(signals, s.cfg.snr_db, chain_seed(s.cfg.rng_seed, {3}));

  save_dictionary(dict, structure, std::nullopt, (out_dir / "oracle.bdkt").string());
  save_training_set(signals, (out_dir / "data.bdkt").string());

  auto stats = block_coherence_stats(dict, structure);
  out << "wrote " << (out_dir / "oracle.bdkt").string() << " ("
      << dict.atom_count() << " atoms, " << structure.block_count() << " blocks)\n";
  out << "wrote " << (out_dir / "data.bdkt").string() << " ("
      << signals.size() << " signals)\n";
  out << "realized mean intra-block |corr| = " << fmt_num(stats.avg_intra)
      << "\n";
  out << "realized mean inter-block |corr| = " << fmt_num(stats.avg_inter)
      << " (max " << fmt_num(stats.max_inter) << ")\n";
  return 0;
}

inline int cmd_train(const ParsedSetup& ps, const std::filesystem::path& out_dir,
                     std::ostream& out) {
  const auto& j = ps.raw;
  require_keys(j, {"data"});
  const auto& cfg = ps.setup.cfg;
  TrainingSet ys = load_training_set(get_string(j, "data", ""));

  auto finish = [&](const Dictionary& dict, const BlockStructure& structure,
                    const std::optional<ClassLabels>& labels, const TrainReport& report) {
    save_dictionary(dict, structure, labels, (out_dir / "trained.bdkt").string());
    write_text_file(out_dir / "report.jsonl", report.to_jsonl());
    out << "wrote " << (out_dir / "trained.bdkt").string() << " ("
        << dict.atom_count() << " atoms, " << structure.block_count() << " blocks)\n";
    out << "wrote " << (out_dir / "report.jsonl").string() << " ("
        << report.rel_errors.size() << " iterations)\n";
    if (!report.rel_errors.empty())
      out << "final relative error = "
          << fmt_num(report.rel_errors.back()) << "\n";
    return 0;
  };

  const StructureMode mode = cfg.structure_mode;
  if (mode == StructureMode::supervised_cgc || mode == StructureMode::fixed_supervised) {
    if (!ys.has_classes())
      throw DataError("supervised training needs class labels in the data file");
    require_keys(j, {"atoms_per_class"});
    auto res = supervised_train(ys, get_int(j, "atoms_per_class", 0), cfg);
    return finish(res.dict, res.structure, res.labels, res.report);
  }
  auto [d0, init_codes, init_report] =
      ksvd_train(ys, ps.setup.oracle_n_atoms, cfg.atom_sparsity, cfg.init_iterations,
                 chain_seed(cfg.rng_seed, {1}));
  auto [dict, structure, report] = bksvd_train(ys, d0, cfg);
  return finish(dict, structure, std::nullopt, report);
}

inline int cmd_code(const ParsedSetup& ps, const std::filesystem::path& out_dir,
                    std::ostream& out) {
  const auto& j = ps.raw;
  require_keys(j, {"dict", "data"});
  auto [dict, structure, labels] = load_dictionary(get_string(j, "dict", ""));
  TrainingSet ys = load_training_set(get_string(j, "data", ""));

  SparseCodes codes = batch_code(dict, structure, ys, ps.setup.cfg);
  Matrix recon = dict.atoms() * codes.coefficients();
  const double rel = (ys.signals() - recon).norm() / ys.signals().norm();

  save_training_set(TrainingSet(codes.coefficients()), (out_dir / "codes.bdkt").string());
  out << "wrote " << (out_dir / "codes.bdkt").string() << " (coefficients, "
      << codes.signal_count() << " signals x " << dict.atom_count() << " atoms)\n";
  out << "relative reconstruction error = " << fmt_num(rel) << "\n";
  return 0;
}

inline int cmd_analyze(const ParsedSetup& ps, const std::vector<std::string>& paths,
                       const std::filesystem::path& out_dir, std::ostream& out) {
  const double thr = ps.setup.cfg.coherence_threshold;
  auto [dict_a, structure_a, labels_a] = load_dictionary(paths[0]);
  auto prof_a = coherence_profile(dict_a);

  CsvTable table;
  if (paths.size() == 1) {
    table.columns = {"rank", "corr"};
    for (std::size_t i = 0; i < prof_a.size(); ++i)
      table.rows.push_back({fmt_int(static_cast<long long>(i) + 1),
                            fmt_num(prof_a[i])});
    out << "pairs with |corr| > " << fmt_num(thr) << ": "
        << count_above(prof_a, thr) << " of " << prof_a.size() << "\n";
  } else {
    auto [dict_b, structure_b, labels_b] = load_dictionary(paths[1]);
    auto prof_b = coherence_profile(dict_b);
    if (prof_b.size() != prof_a.size())
      throw DataError("dictionaries have different atom counts; profiles are not comparable");
    table.columns = {"rank", "corr_a", "corr_b"};
    for (std::size_t i = 0; i < prof_a.size(); ++i)
      table.rows.push_back({fmt_int(static_cast<long long>(i) + 1),
                            fmt_num(prof_a[i]),
                            fmt_num(prof_b[i])});
    out << "pairs with |corr| > " << fmt_num(thr) << ": first "
        << count_above(prof_a, thr) << ", second " << count_above(prof_b, thr)
        << " of " << prof_a.size() << "\n";
  }
  write_text_file(out_dir / "coherence.csv", table.to_csv());
  out << "wrote " << (out_dir / "coherence.csv").string() << "\n";
  return 0;
}

inline int cmd_exp(const ParsedSetup& ps, const std::string& name,
                   const std::filesystem::path& out_dir, std::ostream& out) {
  const auto& setup = ps.setup;
  CsvTable table;
  if (name == "fig5") {
    table = run_recovery_study(setup).table();
  } else if (name == "fig6a") {
    table = run_convergence_study(setup).table();
  } else if (name == "fig6b") {
    table = run_noise_study(setup).table();
  } else if (name == "fig6c") {
    table = run_block_size_study(setup).table();
  } else if (name == "fig6d") {
    table = run_sparsity_study(setup).table();
  } else {
    throw ConfigError("unknown experiment '" + name + "'");
  }
  const auto path = out_dir / (name + ".csv");
  write_text_file(path, table.to_csv());
  out << "wrote " << path.string() << " (" << table.rows.size() << " rows)\n";
  return 0;
}

inline int cmd_classify(const ParsedSetup& ps, const std::filesystem::path& out_dir,
                        std::ostream& out) {
  auto result = run_classify_benchmark(ps.setup);
  const auto path = out_dir / "classify.csv";
  write_text_file(path, result.table().to_csv());
  out << "wrote " << path.string() << "\n";
  for (const auto& [rule, modes] : result.accuracies)
    for (const auto& [mode, accs] : modes)
      out << "mean accuracy " << rule << "/" << mode << " = "
          << fmt_num(mean_of(accs)) << "\n";
  return 0;
}

}  // namespace detail

// args excludes the program name.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out,
                    std::ostream& err) {
  CLI::App app{"block-structured dictionary learning toolkit"};
  app.require_subcommand(1);

  detail::CommonFlags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "JSON config file");
    sub->add_option("--out", flags.out_dir, "output directory (default .)");
    sub->add_option("--seed", flags.seed, "override rng_seed");
    sub->add_option("--trials", flags.trials, "override trials");
    sub->add_option("--mode", flags.mode,
                    "structure mode: sac | cgc | supervised_cgc | fixed_supervised");
  };

  auto* gen = app.add_subcommand(
      "gen",
      "generate a synthetic block dictionary and block-sparse signals\n"
      "(writes oracle.bdkt and data.bdkt; requires config keys m, n_atoms,\n"
      "oracle_block_size, target_intra_corr, n_signals, blocks_per_signal)");
  add_common(gen);

  auto* train = app.add_subcommand(
      "train",
      "learn a block dictionary from signals\n"
      "(requires config key data; supervised modes also need atoms_per_class\n"
      "and class labels in the data file; writes trained.bdkt and report.jsonl,\n"
      "one JSON object per iteration with iter, rel_error, n_blocks)");
  add_common(train);

  auto* code = app.add_subcommand(
      "code",
      "sparse-code signals against a saved dictionary\n"
      "(requires config keys dict and data; writes codes.bdkt)");
  add_common(code);

  auto* analyze = app.add_subcommand(
      "analyze",
      "coherence profile of one dictionary, or side-by-side for two\n"
      "(writes coherence.csv with columns rank,corr or rank,corr_a,corr_b;\n"
      "prints the count of atom pairs above coherence_threshold)");
  add_common(analyze);
  std::vector<std::string> analyze_paths;
  analyze->add_option("dicts", analyze_paths, "one or two dictionary files")
      ->expected(1, 2)
      ->required();

  auto* exp = app.add_subcommand(
      "exp",
      "run a study and write its CSV\n"
      "fig5:  block recovery vs intra-block correlation;\n"
      "       columns experiment,trial,target_corr,block_size,method,recovery\n"
      "fig6a: training convergence;\n"
      "       columns experiment,trial,method,iteration,rel_error\n"
      "fig6b: error vs snr_db; columns experiment,trial,method,snr_db,rel_error\n"
      "fig6c: error vs max_block_size;\n"
      "       columns experiment,trial,method,max_block_size,rel_error\n"
      "fig6d: error vs block_sparsity;\n"
      "       columns experiment,trial,method,block_sparsity,rel_error")
      ;
  add_common(exp);
  std::string exp_name;
  exp->add_option("experiment", exp_name, "fig5 | fig6a | fig6b | fig6c | fig6d")
      ->required();

  auto* classify = app.add_subcommand(
      "classify",
      "synthetic classification benchmark over dictionary variants\n"
      "(writes classify.csv with columns experiment,trial,rule,dictionary_mode,\n"
      "accuracy; rules are residual and energy)");
  add_common(classify);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("blockdict");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }

  flags.has_config = gen->count("--config") || train->count("--config") ||
                     code->count("--config") || analyze->count("--config") ||
                     exp->count("--config") || classify->count("--config");
  flags.has_seed = gen->count("--seed") || train->count("--seed") ||
                   code->count("--seed") || analyze->count("--seed") ||
                   exp->count("--seed") || classify->count("--seed");
  flags.has_trials = gen->count("--trials") || train->count("--trials") ||
                     code->count("--trials") || analyze->count("--trials") ||
                     exp->count("--trials") || classify->count("--trials");
  flags.has_mode = gen->count("--mode") || train->count("--mode") ||
                   code->count("--mode") || analyze->count("--mode") ||
                   exp->count("--mode") || classify->count("--mode");

  try {
    auto parsed = detail::build_setup(flags);
    auto out_dir = detail::prepare_out_dir(flags.out_dir);
    if (gen->parsed()) return detail::cmd_gen(parsed, out_dir, out);
    if (train->parsed()) return detail::cmd_train(parsed, out_dir, out);
    if (code->parsed()) return detail::cmd_code(parsed, out_dir, out);
    if (analyze->parsed()) return detail::cmd_analyze(parsed, analyze_paths, out_dir, out);
    if (exp->parsed()) return detail::cmd_exp(parsed, exp_name, out_dir, out);
    if (classify->parsed()) return detail::cmd_classify(parsed, out_dir, out);
    err << "config error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace cli
}  // namespace blockdict
