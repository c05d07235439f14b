#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metashift/tensor.hpp"

namespace metashift::ad {

class ParamSet;

struct GradSpec {
  bool create_graph = false;
};

/// Enables/disables the per-operation NaN/Inf scan (on by default).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

/// Suspends recording on the active tape for the guard's lifetime.
/// Operations still compute values; they just leave no nodes behind.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Records primitive operations as an append-only list of nodes with parent
/// references. Node ids are topologically ordered by construction. A tape is
/// single-owner: at most one may be active per thread, and tensors recorded
/// on it degrade to constants once it is destroyed.
///
/// gradient() walks the recorded graph in reverse. With create_graph set the
/// adjoint arithmetic is itself recorded onto the same tape, which is what
/// makes gradients-of-gradients (and unrolled inner updates) differentiable.
class Tape {
 public:
  using ForwardFn = std::function<Tensor(const std::vector<Tensor>&)>;
  using BackwardFn = std::function<std::vector<Tensor>(
      const Tensor& grad_out, const std::vector<Tensor>& parents, const Tensor& out)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();
  /// True when a tape is active and no NoGradGuard is in scope.
  static bool recording();

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }

  /// Registers a leaf the tape will differentiate with respect to.
  /// Returns the attached handle; already-attached tensors pass through.
  Tensor watch(const Tensor& t, std::string name = {});

  /// Used by the op layer: attaches `value` as a new node whose parents are
  /// `inputs` (unattached inputs are interned as constant leaves).
  Tensor record(const char* op, Tensor value, const std::vector<Tensor>& inputs,
                ForwardFn forward, BackwardFn backward);

  /// Reverse sweep from a scalar output. Returns one gradient per entry of
  /// `wrt`, in order, each with the parameter's shape. Entries that the
  /// output does not reach get zero tensors; their indices are appended to
  /// `unreachable` when given.
  std::vector<Tensor> gradient(const Tensor& output, const std::vector<Tensor>& wrt,
                               GradSpec spec = {},
                               std::vector<std::size_t>* unreachable = nullptr);

  /// Marks the current end of tape; returns the marker position.
  std::size_t add_checkpoint();
  std::size_t last_checkpoint() const;

  /// Recomputes `output` by re-running the recorded forward closures from the
  /// stored leaf values. Bit-for-bit identical to the original by contract.
  Tensor replay(const Tensor& output) const;
  /// Same, but node values before `mark` are taken as stored (sub-graph replay).
  Tensor replay_from(std::size_t mark, const Tensor& output) const;

  const char* op_name(std::size_t node) const { return nodes_[node].op; }
  std::string leaf_name(std::size_t node) const { return nodes_[node].name; }

 private:
  struct Node {
    const char* op;
    std::string name;  // leaves only
    std::vector<std::int64_t> parents;
    Tensor value;
    ForwardFn forward;
    BackwardFn backward;  // empty for leaves/constants
  };

  Tensor handle(std::int64_t node_id) const;
  void check_owned(const Tensor& t, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> checkpoints_;
  std::uint64_t id_;
};

}  // namespace metashift::ad
