#include "metashift/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace metashift {

using ad::Tensor;

std::size_t Task::n_classes() const {
  if (kind != Kind::Classification || support_labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(support_labels.begin(), support_labels.end())) + 1;
}

ad::RowGroups Task::support_groups() const {
  ad::RowGroups groups(n_classes());
  for (std::size_t i = 0; i < support_labels.size(); ++i) {
    groups[static_cast<std::size_t>(support_labels[i])].push_back(i);
  }
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) {
      throw std::invalid_argument("task: support class " + std::to_string(c) + " has no examples");
    }
  }
  return groups;
}

PseudoTask fisl_transform_task(const FislParams& phi, const Task& task) {
  return PseudoTask{task, phi};
}

double sine_value(double amplitude, double phase, double x) {
  return amplitude * std::sin(x + phase);
}

Task sample_sine_task(const SineDomain& domain, std::size_t k_support, std::size_t k_query,
                      Rng& rng) {
  if (k_support < 1 || k_query < 1) {
    throw std::invalid_argument("sample_sine_task: support and query sizes must be >= 1");
  }
  const double amplitude = rng.uniform(domain.amplitude.lo, domain.amplitude.hi);
  const double phase = rng.uniform(domain.phase.lo, domain.phase.hi);

  auto draw = [&](std::size_t n, Tensor& xs, Tensor& ys) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform(domain.x_range.lo, domain.x_range.hi);
      y[i] = sine_value(amplitude, phase, x[i]);
    }
    xs = Tensor({n, 1}, std::move(x));
    ys = Tensor({n, 1}, std::move(y));
  };

  Task task;
  task.kind = Task::Kind::Regression;
  task.domain_tag = domain.tag;
  task.sine_amplitude = amplitude;
  task.sine_phase = phase;
  draw(k_support, task.support_x, task.support_y);
  draw(k_query, task.query_x, task.query_y);
  return task;
}

AffineMap2D AffineMap2D::rotation_scale_translate(double degrees, double s, double tx, double ty) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), sn = std::sin(rad);
  AffineMap2D map;
  map.linear = {s * c, -s * sn, s * sn, s * c};
  map.offset = {tx, ty};
  return map;
}

std::array<double, 2> BlobDomain::class_center(std::size_t class_id) const {
  Rng rng = Rng::child(center_seed, class_id);
  const double angle = rng.uniform(0.0, 6.283185307179586476925286766559);
  const double norm = rng.uniform(center_norm.lo, center_norm.hi);
  return {norm * std::cos(angle), norm * std::sin(angle)};
}

Task sample_blob_task(const BlobDomain& domain, std::size_t n_way, std::size_t k_shot,
                      std::size_t k_query, Rng& rng) {
  if (n_way < 2) throw std::invalid_argument("sample_blob_task: n_way must be >= 2");
  if (n_way > domain.n_classes_pool) {
    throw std::invalid_argument("sample_blob_task: n_way " + std::to_string(n_way) +
                                " exceeds class pool " + std::to_string(domain.n_classes_pool));
  }
  if (!domain.transform.invertible()) {
    throw std::invalid_argument("sample_blob_task: domain transform is not invertible");
  }
  const std::vector<std::size_t> classes =
      rng.sample_without_replacement(domain.n_classes_pool, n_way);

  auto draw_set = [&](std::size_t per_class, Tensor& xs, std::vector<int>& labels) {
    std::vector<double> x;
    x.reserve(n_way * per_class * 2);
    labels.clear();
    for (std::size_t c = 0; c < n_way; ++c) {
      const auto center = domain.class_center(classes[c]);
      for (std::size_t i = 0; i < per_class; ++i) {
        const double p0 = center[0] + domain.noise_std * rng.normal();
        const double p1 = center[1] + domain.noise_std * rng.normal();
        const auto q = domain.transform.apply(p0, p1);
        x.push_back(q[0]);
        x.push_back(q[1]);
        labels.push_back(static_cast<int>(c));
      }
    }
    xs = Tensor({n_way * per_class, 2}, std::move(x));
  };

  Task task;
  task.kind = Task::Kind::Classification;
  task.domain_tag = domain.tag;
  draw_set(k_shot, task.support_x, task.support_labels);
  draw_set(k_query, task.query_x, task.query_labels);
  return task;
}

Task TaskSampler::sample(Rng& rng) const {
  if (kind == Kind::Sine) return sample_sine_task(sine, k_support, k_query, rng);
  return sample_blob_task(blob, n_way, k_support, k_query, rng);
}

}  // namespace metashift
