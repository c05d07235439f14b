// Command-line front end: train / eval / reproduce-table1.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "metashift/experiments.hpp"

namespace fs = std::filesystem;
using namespace metashift;

namespace {

int fail_with_json(const std::string& subcommand, const std::exception& e) {
  nlohmann::json err{{"error", e.what()}, {"subcommand", subcommand}};
  std::cerr << err.dump() << std::endl;
  return 1;
}

ExperimentConfig load_run_config(const std::string& config_path, const std::string& checkpoint) {
  if (!config_path.empty()) return parse_config(config_path);
  // Default: the resolved config archived next to the checkpoint.
  const fs::path sibling = fs::path(checkpoint).parent_path() / "config.resolved.json";
  return parse_config(sibling.string());
}

int run_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_dir_override, const std::string& resume_path) {
  ExperimentConfig config = parse_config(config_path);
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  if (!out_dir_override.empty()) config.out_dir = out_dir_override;

  TrainState state = resume_path.empty() ? init_train_state(config)
                                         : load_checkpoint(resume_path, config.outer_lr);
  state = train(config, std::move(state), /*fresh_artifacts=*/resume_path.empty());
  std::cout << "trained " << config.model_tag() << " to iteration " << state.iteration
            << "; artifacts in " << config.out_dir << std::endl;
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& domain, bool no_fisl,
             const std::string& config_path, const std::string& out_dir_override,
             bool dump_per_task, std::size_t dump_curves) {
  if (domain != "source" && domain != "unseen") {
    throw std::runtime_error("--domain must be source or unseen");
  }
  const ExperimentConfig config = load_run_config(config_path, checkpoint);
  ad::set_finite_checks(config.finite_checks);
  const bool unseen = domain == "unseen";
  const bool use_fisl = config.mode == RunMode::Fisl && !no_fisl;
  TrainState state = load_checkpoint(checkpoint, config.outer_lr);

  Rng rng = Rng::child(config.seed, unseen ? 0x9001 : 0x9002);
  std::vector<double> per_task;
  MetricsRecord rec = evaluate_suite(config.model_spec(), state.theta, state.phi,
                                     config.eval_sampler(unseen), config.n_eval_tasks,
                                     config.inner, use_fisl, rng,
                                     config.model_tag() + (no_fisl ? "-nofisl" : ""), &per_task);

  const fs::path out_dir = out_dir_override.empty()
                               ? fs::path(checkpoint).parent_path()
                               : fs::path(out_dir_override);
  fs::create_directories(out_dir);
  const std::string suffix = domain + (no_fisl ? "-nofisl" : "");
  ResultRow row{rec, config.shots.k_support, config.seed};
  write_results_csv(out_dir / ("results-" + suffix + ".csv"), {row});
  write_summary_json(out_dir / ("results-" + suffix + ".json"), {row});
  if (dump_per_task) {
    append_per_task_csv(out_dir / ("per-task-" + suffix + ".csv"), row, per_task);
  }
  if (dump_curves > 0) {
    if (config.problem != ProblemKind::Sine) {
      throw std::runtime_error("--dump-curves only applies to the sine problem");
    }
    Rng curve_rng = Rng::child(config.seed, 0x51DE);
    write_prediction_curves(out_dir / ("curves-" + suffix + ".csv"), config.model_spec(),
                            state.theta, state.phi, unseen ? config.sine_unseen : config.sine_source,
                            config.shots.k_support, config.inner, use_fisl, dump_curves, 200,
                            curve_rng);
  }
  std::cout << rec.model_tag << " on " << rec.domain_tag << ": " << rec.metric_name << " = "
            << rec.mean << " +/- " << rec.ci95_halfwidth << " over " << rec.n_tasks << " tasks"
            << std::endl;
  return 0;
}

int run_table1(const std::string& out_dir, std::int64_t iterations,
               const std::vector<std::uint64_t>& seeds, std::size_t n_eval_tasks) {
  Table1Options opts;
  opts.out_dir = out_dir;
  opts.iterations = iterations;
  if (!seeds.empty()) opts.seeds = seeds;
  opts.n_eval_tasks = n_eval_tasks;
  opts.log = &std::cout;
  const std::vector<Table1Cell> cells = reproduce_table1(opts);
  std::cout << '\n' << format_table1(cells);
  std::cout << "raw rows: " << (opts.out_dir / "table1.csv").string() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning lab: adversarial feature-shift training for cross-domain few-shot "
               "regression and classification"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");
  std::string train_config, train_out_dir, train_resume;
  std::int64_t train_seed = -1;
  train_cmd->add_option("--config", train_config, "Path to the experiment config")->required();
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_option("--out-dir", train_out_dir, "Override the output directory");
  train_cmd->add_option("--resume", train_resume, "Resume from a checkpoint file");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a domain");
  std::string eval_checkpoint, eval_domain, eval_config, eval_out_dir;
  bool eval_no_fisl = false, eval_dump_per_task = false;
  std::size_t eval_dump_curves = 0;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--domain", eval_domain, "source | unseen")->required();
  eval_cmd->add_flag("--no-fisl", eval_no_fisl, "Evaluate without the feature shift");
  eval_cmd->add_option("--config", eval_config, "Config (default: next to the checkpoint)");
  eval_cmd->add_option("--out-dir", eval_out_dir, "Where to write results");
  eval_cmd->add_flag("--dump-per-task", eval_dump_per_task, "Dump raw per-task metrics");
  eval_cmd->add_option("--dump-curves", eval_dump_curves,
                       "Dump prediction curves for N fresh tasks (sine only)");

  auto* table_cmd = app.add_subcommand("reproduce-table1",
                                       "Run the {MAML,ANIL} x {baseline,fisl} sine grid");
  std::string table_out_dir = "runs/table1";
  std::int64_t table_iterations = 20000;
  std::vector<std::uint64_t> table_seeds;
  std::size_t table_eval_tasks = 2000;
  table_cmd->add_option("--out-dir", table_out_dir, "Output directory");
  table_cmd->add_option("--iterations", table_iterations, "Training iterations per cell");
  table_cmd->add_option("--seeds", table_seeds, "Seeds to run (default 0 1 2)");
  table_cmd->add_option("--n-eval-tasks", table_eval_tasks, "Evaluation tasks per cell");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_config, train_seed, train_out_dir, train_resume);
    if (*eval_cmd) {
      return run_eval(eval_checkpoint, eval_domain, eval_no_fisl, eval_config, eval_out_dir,
                      eval_dump_per_task, eval_dump_curves);
    }
    if (*table_cmd) return run_table1(table_out_dir, table_iterations, table_seeds,
                                      table_eval_tasks);
  } catch (const std::exception& e) {
    return fail_with_json(app.get_subcommands().front()->get_name(), e);
  }
  return 0;
}
