#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "metashift/meta.hpp"

namespace metashift {

struct MetricsRecord {
  std::string metric_name;  // "mse" or "accuracy"
  double mean = 0.0;
  double ci95_halfwidth = 0.0;  // 1.96 * sample std / sqrt(n)
  std::size_t n_tasks = 0;
  std::string domain_tag;
  std::string model_tag;
};

/// Meta-test on one task with frozen parameters. With use_fisl the support and
/// query sets ride through the learned shift initialization (no per-task
/// adaptation of the shift), the base learner adapts on the transformed
/// support, and the metric is scored on the transformed query. Returns the
/// task MSE (regression) or accuracy (classification).
double meta_test_task(const ModelSpec& model, const ad::ParamSet& theta, const FislParams& phi,
                      const Task& task, const InnerConfig& inner, bool use_fisl);

/// Mean and 95% CI (1.96 * sample std / sqrt(n), n-1 denominator) over
/// per-task metrics, reduced in slot order.
MetricsRecord aggregate_metrics(const std::string& metric_name, const std::vector<double>& per_task,
                                const std::string& domain_tag, const std::string& model_tag);

/// Samples n_tasks tasks, scores each with meta_test_task, and aggregates the
/// mean with a 95% confidence interval (sample std, n-1). Per-task metrics are
/// reduced in sampling order regardless of evaluation order.
MetricsRecord evaluate_suite(const ModelSpec& model, const ad::ParamSet& theta,
                             const FislParams& phi, const TaskSampler& sampler,
                             std::size_t n_tasks, const InnerConfig& inner, bool use_fisl,
                             Rng& rng, const std::string& model_tag,
                             std::vector<double>* per_task = nullptr);

struct ResultRow {
  MetricsRecord record;
  std::size_t shot = 0;
  std::uint64_t seed = 0;
};

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
void write_summary_json(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
void append_per_task_csv(const std::filesystem::path& path, const ResultRow& row,
                         const std::vector<double>& per_task);

/// Prediction curves for freshly sampled sine tasks: one row per grid point
/// (task, x, ground truth, model prediction after adaptation).
void write_prediction_curves(const std::filesystem::path& path, const ModelSpec& model,
                             const ad::ParamSet& theta, const FislParams& phi,
                             const SineDomain& domain, std::size_t k_support,
                             const InnerConfig& inner, bool use_fisl, std::size_t n_tasks,
                             std::size_t grid_points, Rng& rng);

}  // namespace metashift
