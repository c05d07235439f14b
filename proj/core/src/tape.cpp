#include "metashift/tape.hpp"

#include <atomic>

#include "metashift/ops.hpp"

namespace metashift::ad {

namespace {
thread_local Tape* g_current = nullptr;
thread_local int g_no_grad_depth = 0;
std::atomic<std::uint64_t> g_next_tape_id{1};
std::atomic<bool> g_finite_checks{true};
}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {
  if (g_current != nullptr) {
    throw std::logic_error("a tape is already active on this thread");
  }
  g_current = this;
}

Tape::~Tape() {
  if (g_current == this) g_current = nullptr;
}

Tape* Tape::current() { return g_current; }

bool Tape::recording() { return g_current != nullptr && g_no_grad_depth == 0; }

Tensor Tape::handle(std::int64_t node_id) const {
  Tensor t = nodes_[static_cast<std::size_t>(node_id)].value;
  t.node_ = node_id;
  t.tape_id_ = id_;
  return t;
}

void Tape::check_owned(const Tensor& t, const char* what) const {
  if (!t.attached() || t.tape_id() != id_) {
    throw std::logic_error(std::string(what) + ": tensor is not attached to this tape");
  }
}

Tensor Tape::watch(const Tensor& t, std::string name) {
  if (!t.defined()) throw std::logic_error("watch: undefined tensor");
  if (t.attached() && t.tape_id() == id_) return t;
  Node node;
  node.op = "leaf";
  node.name = std::move(name);
  node.value = t.detached();
  nodes_.push_back(std::move(node));
  return handle(static_cast<std::int64_t>(nodes_.size()) - 1);
}

Tensor Tape::record(const char* op, Tensor value, const std::vector<Tensor>& inputs,
                    ForwardFn forward, BackwardFn backward) {
  if (g_finite_checks.load() && !value.all_finite()) {
    throw NumericError(std::string("non-finite result in op '") + op + "'");
  }
  if (!recording() || g_current != this) {
    return value;
  }
  Node node;
  node.op = op;
  node.parents.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    if (in.attached() && in.tape_id() == id_) {
      node.parents.push_back(in.node());
    } else {
      // Intern constants so backward closures can address every parent by id.
      Node leaf;
      leaf.op = "const";
      leaf.value = in.detached();
      nodes_.push_back(std::move(leaf));
      node.parents.push_back(static_cast<std::int64_t>(nodes_.size()) - 1);
    }
  }
  node.value = value.detached();
  node.forward = std::move(forward);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return handle(static_cast<std::int64_t>(nodes_.size()) - 1);
}

std::vector<Tensor> Tape::gradient(const Tensor& output, const std::vector<Tensor>& wrt,
                                   GradSpec spec, std::vector<std::size_t>* unreachable) {
  if (output.size() != 1) {
    throw ShapeError("gradient: output must be scalar, got shape " + shape_str(output.shape()));
  }
  check_owned(output, "gradient");
  for (const Tensor& w : wrt) {
    if (w.defined() && w.attached() && w.tape_id() != id_) {
      throw std::logic_error("gradient: wrt tensor belongs to another tape");
    }
  }
  if (spec.create_graph && !recording()) {
    throw std::logic_error("gradient: create_graph requires an active recording tape");
  }

  const std::size_t sweep_end = static_cast<std::size_t>(output.node());
  std::vector<Tensor> adjoint(sweep_end + 1);
  adjoint[sweep_end] = Tensor::ones(output.shape());

  auto run_sweep = [&] {
    for (std::size_t id = sweep_end + 1; id-- > 0;) {
      if (!adjoint[id].defined()) continue;
      if (!nodes_[id].backward) continue;
      // Copy before invoking: with create_graph the backward ops append to
      // nodes_ and may reallocate it.
      const std::vector<std::int64_t> parent_ids = nodes_[id].parents;
      const BackwardFn backward = nodes_[id].backward;
      std::vector<Tensor> parents;
      parents.reserve(parent_ids.size());
      for (std::int64_t pid : parent_ids) parents.push_back(handle(pid));
      std::vector<Tensor> contribs =
          backward(adjoint[id], parents, handle(static_cast<std::int64_t>(id)));
      for (std::size_t slot = 0; slot < contribs.size(); ++slot) {
        if (!contribs[slot].defined()) continue;
        const auto pid = static_cast<std::size_t>(parent_ids[slot]);
        adjoint[pid] = adjoint[pid].defined() ? add(adjoint[pid], contribs[slot])
                                              : contribs[slot];
      }
    }
  };

  if (spec.create_graph) {
    run_sweep();
  } else {
    NoGradGuard no_grad;
    run_sweep();
  }

  std::vector<Tensor> grads;
  grads.reserve(wrt.size());
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const Tensor& p = wrt[i];
    const bool reachable = p.attached() && static_cast<std::size_t>(p.node()) <= sweep_end &&
                           adjoint[static_cast<std::size_t>(p.node())].defined();
    if (reachable) {
      grads.push_back(adjoint[static_cast<std::size_t>(p.node())]);
    } else {
      if (unreachable) unreachable->push_back(i);
      grads.push_back(Tensor::zeros(p.shape()));
    }
  }
  return grads;
}

std::size_t Tape::add_checkpoint() {
  checkpoints_.push_back(nodes_.size());
  return nodes_.size();
}

std::size_t Tape::last_checkpoint() const {
  return checkpoints_.empty() ? 0 : checkpoints_.back();
}

Tensor Tape::replay(const Tensor& output) const { return replay_from(0, output); }

Tensor Tape::replay_from(std::size_t mark, const Tensor& output) const {
  check_owned(output, "replay");
  NoGradGuard no_grad;
  const std::size_t end = static_cast<std::size_t>(output.node());
  std::vector<Tensor> recomputed(end + 1);
  auto value_of = [&](std::int64_t id) -> const Tensor& {
    const auto uid = static_cast<std::size_t>(id);
    return recomputed[uid].defined() ? recomputed[uid] : nodes_[uid].value;
  };
  for (std::size_t id = mark; id <= end; ++id) {
    const Node& node = nodes_[id];
    if (!node.forward) continue;  // leaves and constants keep stored values
    std::vector<Tensor> parent_vals;
    parent_vals.reserve(node.parents.size());
    for (std::int64_t pid : node.parents) parent_vals.push_back(value_of(pid));
    recomputed[id] = node.forward(parent_vals);
  }
  return value_of(output.node());
}

}  // namespace metashift::ad
