#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "metashift/trainer.hpp"

namespace metashift {

/// The cross-domain sine-regression comparison grid:
/// {MAML, ANIL} x {baseline, fisl} x {5, 10}-shot, repeated over seeds, each
/// scored on freshly sampled unseen-domain tasks.
struct Table1Options {
  std::filesystem::path out_dir = "runs/table1";
  std::int64_t iterations = 20000;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t n_eval_tasks = 2000;
  std::ostream* log = nullptr;
};

struct Table1Cell {
  std::string learner;  // maml | anil
  std::string mode;     // baseline | fisl
  std::size_t shot = 0;
  std::uint64_t seed = 0;
  double mse_mean = 0.0;
  double ci95 = 0.0;
};

ExperimentConfig table1_cell_config(const Table1Options& opts, const std::string& learner,
                                    const std::string& mode, std::size_t shot,
                                    std::uint64_t seed);

/// Trains and evaluates one grid cell.
Table1Cell run_table1_cell(const Table1Options& opts, const std::string& learner,
                           const std::string& mode, std::size_t shot, std::uint64_t seed);

/// Runs the whole grid and writes table1.csv (raw rows) and table1.txt (the
/// formatted comparison) under opts.out_dir.
std::vector<Table1Cell> reproduce_table1(const Table1Options& opts);

/// Seed-averaged comparison table.
std::string format_table1(const std::vector<Table1Cell>& cells);

void write_table1_files(const std::filesystem::path& out_dir,
                        const std::vector<Table1Cell>& cells);

}  // namespace metashift
