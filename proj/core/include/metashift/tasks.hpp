#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "metashift/models.hpp"
#include "metashift/rng.hpp"
#include "metashift/tensor.hpp"

namespace metashift {

/// One episode: disjoint support and query sets from a single domain.
struct Task {
  enum class Kind { Regression, Classification };

  Kind kind = Kind::Regression;
  ad::Tensor support_x;  // (k, input_dim)
  ad::Tensor support_y;  // regression: (k, out)
  ad::Tensor query_x;
  ad::Tensor query_y;
  std::vector<int> support_labels;  // classification
  std::vector<int> query_labels;
  std::string domain_tag;
  // Generating sine parameters, kept for ground-truth curve dumps.
  double sine_amplitude = 0.0;
  double sine_phase = 0.0;

  std::size_t n_support() const { return support_x.defined() ? support_x.shape()[0] : 0; }
  std::size_t n_query() const { return query_x.defined() ? query_x.shape()[0] : 0; }
  std::size_t n_classes() const;
  /// Support row indices grouped by class label 0..n_classes-1.
  ad::RowGroups support_groups() const;
};

/// A source task routed through a feature shift: the raw inputs and labels are
/// kept as-is and every forward pass applies `route` after the encoder. Labels
/// are never rewritten.
struct PseudoTask {
  Task task;
  FislParams route;
};

/// Forward-routing view: `route == nullptr` means the plain task.
struct TaskView {
  const Task* task = nullptr;
  const FislParams* route = nullptr;
};

inline TaskView view(const Task& t) { return {&t, nullptr}; }
inline TaskView view(const PseudoTask& p) { return {&p.task, &p.route}; }

PseudoTask fisl_transform_task(const FislParams& phi, const Task& task);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const { return lo <= hi; }
};

/// y = A sin(x + p), amplitude and phase drawn uniformly per task.
struct SineDomain {
  Interval amplitude{0.1, 3.0};
  Interval phase{0.0, 2.356194490192344929};  // 3π/4
  Interval x_range{-5.0, 5.0};
  std::string tag = "source";
};

double sine_value(double amplitude, double phase, double x);

Task sample_sine_task(const SineDomain& domain, std::size_t k_support, std::size_t k_query,
                      Rng& rng);

struct AffineMap2D {
  std::array<double, 4> linear{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  std::array<double, 2> offset{0.0, 0.0};

  bool invertible() const { return std::abs(linear[0] * linear[3] - linear[1] * linear[2]) > 1e-12; }
  std::array<double, 2> apply(double x0, double x1) const {
    return {linear[0] * x0 + linear[1] * x1 + offset[0],
            linear[2] * x0 + linear[3] * x1 + offset[1]};
  }
  static AffineMap2D rotation_scale_translate(double degrees, double s, double tx, double ty);
};

/// Gaussian blobs around a fixed pool of class centers; the domain transform
/// remaps inputs to emulate a shifted domain.
struct BlobDomain {
  std::size_t n_classes_pool = 20;
  Interval center_norm{2.0, 6.0};
  double noise_std = 1.0;
  AffineMap2D transform;
  std::uint64_t center_seed = 1234;
  std::string tag = "source";

  std::array<double, 2> class_center(std::size_t class_id) const;
};

/// Episode labels are re-assigned 0..n_way-1, so label spaces are disjoint
/// across episodes.
Task sample_blob_task(const BlobDomain& domain, std::size_t n_way, std::size_t k_shot,
                      std::size_t k_query, Rng& rng);

/// Uniform handle for "sample one task from this domain at these sizes".
struct TaskSampler {
  enum class Kind { Sine, Blob };
  Kind kind = Kind::Sine;
  SineDomain sine;
  BlobDomain blob;
  std::size_t k_support = 5;
  std::size_t k_query = 20;
  std::size_t n_way = 5;

  Task sample(Rng& rng) const;
  std::size_t input_dim() const { return kind == Kind::Sine ? 1 : 2; }
  const std::string& tag() const { return kind == Kind::Sine ? sine.tag : blob.tag; }
};

}  // namespace metashift
