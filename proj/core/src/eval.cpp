#include "metashift/eval.hpp"

#include "metashift/tape.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace metashift {

using ad::ParamSet;
using ad::Tape;
using ad::Tensor;

namespace {

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t m = logits.shape()[0], k = logits.shape()[1];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    }
    if (static_cast<int>(best) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

double mse_value(const Tensor& pred, const Tensor& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.at(i) - target.at(i);
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace

double meta_test_task(const ModelSpec& model, const ParamSet& theta, const FislParams& phi,
                      const Task& task, const InnerConfig& inner, bool use_fisl) {
  const FislParams route = phi.detached();
  TaskView v{&task, use_fisl ? &route : nullptr};

  if (inner.kind == LearnerKind::Proto) {
    ad::NoGradGuard no_grad;
    Tensor zs = encode(model, theta, task.support_x);
    Tensor zq = encode(model, theta, task.query_x);
    if (use_fisl) {
      zs = fisl_apply(route, zs);
      zq = fisl_apply(route, zq);
    }
    Tensor logits = head_forward(ProtoFeatures{ad::group_mean_rows(zs, task.support_groups()), zq});
    return accuracy(logits, task.query_labels);
  }

  Tape tape;
  ParamSet watched;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    watched.insert(theta.name(i), tape.watch(theta.tensor(i), theta.name(i)));
  }
  BaseLearner learner = inner_adapt(model, watched, v, inner, /*differentiable=*/false);
  ad::NoGradGuard no_grad;
  Tensor z = encode(model, learner.w, task.query_x);
  if (use_fisl) z = fisl_apply(route, z);
  Tensor out = head_forward(model, learner.w, z);
  if (task.kind == Task::Kind::Regression) return mse_value(out, task.query_y);
  return accuracy(out, task.query_labels);
}

MetricsRecord aggregate_metrics(const std::string& metric_name, const std::vector<double>& per_task,
                                const std::string& domain_tag, const std::string& model_tag) {
  const std::size_t n = per_task.size();
  if (n < 2) throw std::invalid_argument("aggregate_metrics: need at least 2 tasks");
  double mean = 0.0;
  for (double m : per_task) mean += m;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double m : per_task) var += (m - mean) * (m - mean);
  var /= static_cast<double>(n - 1);

  MetricsRecord rec;
  rec.metric_name = metric_name;
  rec.mean = mean;
  rec.ci95_halfwidth = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(n));
  rec.n_tasks = n;
  rec.domain_tag = domain_tag;
  rec.model_tag = model_tag;
  return rec;
}

MetricsRecord evaluate_suite(const ModelSpec& model, const ParamSet& theta, const FislParams& phi,
                             const TaskSampler& sampler, std::size_t n_tasks,
                             const InnerConfig& inner, bool use_fisl, Rng& rng,
                             const std::string& model_tag, std::vector<double>* per_task) {
  if (n_tasks < 2) throw std::invalid_argument("evaluate_suite: need at least 2 tasks");
  std::vector<Task> tasks;
  tasks.reserve(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) tasks.push_back(sampler.sample(rng));

  std::vector<double> metrics(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    metrics[i] = meta_test_task(model, theta, phi, tasks[i], inner, use_fisl);
  }

  MetricsRecord rec =
      aggregate_metrics(tasks.front().kind == Task::Kind::Regression ? "mse" : "accuracy",
                        metrics, sampler.tag(), model_tag);
  if (per_task) *per_task = std::move(metrics);
  return rec;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  out << "model_tag,domain_tag,shot,metric_name,mean,ci95,n_tasks,seed\n";
  for (const ResultRow& r : rows) {
    out << r.record.model_tag << ',' << r.record.domain_tag << ',' << r.shot << ','
        << r.record.metric_name << ',' << ad::format_double(r.record.mean) << ','
        << ad::format_double(r.record.ci95_halfwidth) << ',' << r.record.n_tasks << ',' << r.seed
        << '\n';
  }
}

void write_summary_json(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const ResultRow& r : rows) {
    doc.push_back({{"model_tag", r.record.model_tag},
                   {"domain_tag", r.record.domain_tag},
                   {"shot", r.shot},
                   {"metric_name", r.record.metric_name},
                   {"mean", r.record.mean},
                   {"ci95", r.record.ci95_halfwidth},
                   {"n_tasks", r.record.n_tasks},
                   {"seed", r.seed}});
  }
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
}

void append_per_task_csv(const std::filesystem::path& path, const ResultRow& row,
                         const std::vector<double>& per_task) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh) out << "model_tag,domain_tag,shot,seed,task_index,metric\n";
  for (std::size_t i = 0; i < per_task.size(); ++i) {
    out << row.record.model_tag << ',' << row.record.domain_tag << ',' << row.shot << ','
        << row.seed << ',' << i << ',' << ad::format_double(per_task[i]) << '\n';
  }
}

void write_prediction_curves(const std::filesystem::path& path, const ModelSpec& model,
                             const ParamSet& theta, const FislParams& phi,
                             const SineDomain& domain, std::size_t k_support,
                             const InnerConfig& inner, bool use_fisl, std::size_t n_tasks,
                             std::size_t grid_points, Rng& rng) {
  std::ofstream out(path);
  out << "task,x,y_true,y_pred\n";
  for (std::size_t t = 0; t < n_tasks; ++t) {
    Task task = sample_sine_task(domain, k_support, 2, rng);
    // Score on a dense grid instead of the sampled query points.
    std::vector<double> xs(grid_points), ys(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i) {
      xs[i] = domain.x_range.lo + (domain.x_range.hi - domain.x_range.lo) *
                                      static_cast<double>(i) /
                                      static_cast<double>(grid_points - 1);
      ys[i] = sine_value(task.sine_amplitude, task.sine_phase, xs[i]);
    }
    Task grid_task = task;
    grid_task.query_x = Tensor({grid_points, 1}, xs);
    grid_task.query_y = Tensor({grid_points, 1}, ys);

    const FislParams route = phi.detached();
    TaskView v{&grid_task, use_fisl ? &route : nullptr};
    Tape tape;
    ParamSet watched;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      watched.insert(theta.name(i), tape.watch(theta.tensor(i), theta.name(i)));
    }
    Tensor pred;
    if (inner.kind == LearnerKind::Proto) {
      throw std::invalid_argument("prediction curves are a regression-only artifact");
    }
    BaseLearner learner = inner_adapt(model, watched, v, inner, /*differentiable=*/false);
    ad::NoGradGuard no_grad;
    Tensor z = encode(model, learner.w, grid_task.query_x);
    if (use_fisl) z = fisl_apply(route, z);
    pred = head_forward(model, learner.w, z);
    for (std::size_t i = 0; i < grid_points; ++i) {
      out << t << ',' << ad::format_double(xs[i]) << ',' << ad::format_double(ys[i]) << ','
          << ad::format_double(pred.at(i)) << '\n';
    }
  }
}

}  // namespace metashift
