#include "metashift/ops.hpp"

#include <algorithm>
#include <cmath>

#include "metashift/tape.hpp"

namespace metashift::ad {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                     " tensor, got shape " + shape_str(a.shape()));
  }
}

/// Commits an op result: finiteness scan, then tape recording when an input
/// carries graph state.
Tensor finish(const char* op, Tensor value, const std::vector<Tensor>& inputs,
              Tape::ForwardFn forward, Tape::BackwardFn backward) {
  if (finite_checks_enabled() && !value.all_finite()) {
    throw NumericError(std::string("non-finite result in op '") + op + "'");
  }
  if (!Tape::recording()) return value;
  Tape* tape = Tape::current();
  bool any_attached = false;
  for (const Tensor& in : inputs) {
    if (in.attached() && in.tape_id() == tape->id()) {
      any_attached = true;
      break;
    }
  }
  if (!any_attached) return value;
  return tape->record(op, std::move(value), inputs, std::move(forward), std::move(backward));
}

template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, F f) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return Tensor(a.shape(), std::move(out));
}

template <typename F>
Tensor map1(const Tensor& a, F f) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return Tensor(a.shape(), std::move(out));
}

// Value-level kernels (shared by ops and replay closures).

Tensor k_add(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x + y; }); }
Tensor k_sub(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x - y; }); }
Tensor k_mul(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x * y; }); }
Tensor k_div(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x / y; }); }

Tensor k_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t r = a.shape()[0], k = a.shape()[1], c = b.shape()[1];
  std::vector<double> out(r * c, 0.0);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ap[i * k + t];
      if (av == 0.0) continue;
      const double* brow = bp + t * c;
      double* orow = out.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) orow[j] += av * brow[j];
    }
  }
  return Tensor({r, c}, std::move(out));
}

Tensor k_transpose(const Tensor& a) {
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
  return Tensor({c, r}, std::move(out));
}

Tensor k_sum_rows(const Tensor& m) {
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += m.values()[i * c + j];
  return Tensor({c}, std::move(out));
}

Tensor k_sum_cols(const Tensor& m) {
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += m.values()[i * c + j];
  return Tensor({r}, std::move(out));
}

Tensor k_broadcast_rows(const Tensor& v, std::size_t r) {
  const std::size_t c = v.size();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = v.values()[j];
  return Tensor({r, c}, std::move(out));
}

Tensor k_broadcast_cols(const Tensor& v, std::size_t c) {
  const std::size_t r = v.size();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = v.values()[i];
  return Tensor({r, c}, std::move(out));
}

Tensor k_add_rowvec(const Tensor& m, const Tensor& v) {
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.values()[i * c + j] + v.values()[j];
  return Tensor({r, c}, std::move(out));
}

Tensor k_mul_rowvec(const Tensor& m, const Tensor& v) {
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.values()[i * c + j] * v.values()[j];
  return Tensor({r, c}, std::move(out));
}

Tensor k_add_colvec(const Tensor& m, const Tensor& v) {
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.values()[i * c + j] + v.values()[i];
  return Tensor({r, c}, std::move(out));
}

Tensor k_group_mean_rows(const Tensor& z, const RowGroups& groups) {
  const std::size_t c = z.shape()[1];
  std::vector<double> out(groups.size() * c, 0.0);
  std::vector<double> column;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    for (std::size_t j = 0; j < c; ++j) {
      column.clear();
      for (std::size_t row : members) column.push_back(z.values()[row * c + j]);
      std::sort(column.begin(), column.end());
      double s = 0.0;
      for (double x : column) s += x;
      out[g * c + j] = s / static_cast<double>(members.size());
    }
  }
  return Tensor({groups.size(), c}, std::move(out));
}

Tensor k_group_expand_rows(const Tensor& p, const RowGroups& groups, std::size_t rows,
                           bool divide_by_size) {
  const std::size_t c = p.shape()[1];
  std::vector<double> out(rows * c, 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double f = divide_by_size ? 1.0 / static_cast<double>(groups[g].size()) : 1.0;
    for (std::size_t row : groups[g])
      for (std::size_t j = 0; j < c; ++j) out[row * c + j] = p.values()[g * c + j] * f;
  }
  return Tensor({rows, c}, std::move(out));
}

Tensor k_group_sum_rows(const Tensor& z, const RowGroups& groups, bool divide_by_size) {
  const std::size_t c = z.shape()[1];
  std::vector<double> out(groups.size() * c, 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double f = divide_by_size ? 1.0 / static_cast<double>(groups[g].size()) : 1.0;
    for (std::size_t row : groups[g])
      for (std::size_t j = 0; j < c; ++j) out[g * c + j] += z.values()[row * c + j] * f;
  }
  return Tensor({groups.size(), c}, std::move(out));
}

Tensor k_solve(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.shape()[0], m = b.shape()[1];
  std::vector<double> lu = a.values();
  std::vector<double> x = b.values();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  double scale_ref = 0.0;
  for (double v : lu) scale_ref = std::max(scale_ref, std::abs(v));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(lu[i * n + col]) > std::abs(lu[pivot * n + col])) pivot = i;
    if (std::abs(lu[pivot * n + col]) <= 1e-13 * std::max(scale_ref, 1.0)) {
      throw NumericError("solve: matrix is singular or near-singular (for a ridge system, "
                         "set a positive regularization)");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu[col * n + j], lu[pivot * n + j]);
      for (std::size_t j = 0; j < m; ++j) std::swap(x[col * m + j], x[pivot * m + j]);
    }
    const double d = lu[col * n + col];
    for (std::size_t i = col + 1; i < n; ++i) {
      const double f = lu[i * n + col] / d;
      if (f == 0.0) continue;
      lu[i * n + col] = f;
      for (std::size_t j = col + 1; j < n; ++j) lu[i * n + j] -= f * lu[col * n + j];
      for (std::size_t j = 0; j < m; ++j) x[i * m + j] -= f * x[col * m + j];
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    const double d = lu[col * n + col];
    for (std::size_t j = 0; j < m; ++j) x[col * m + j] /= d;
    for (std::size_t i = 0; i < col; ++i) {
      const double f = lu[i * n + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) x[i * m + j] -= f * x[col * m + j];
    }
  }
  return Tensor({n, m}, std::move(x));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return finish("add", k_add(a, b), {a, b},
                [](const std::vector<Tensor>& p) { return k_add(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{g, g};
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return finish("sub", k_sub(a, b), {a, b},
                [](const std::vector<Tensor>& p) { return k_sub(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{g, neg(g)};
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return finish("mul", k_mul(a, b), {a, b},
                [](const std::vector<Tensor>& p) { return k_mul(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{mul(g, p[1]), mul(g, p[0])};
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  return finish("div", k_div(a, b), {a, b},
                [](const std::vector<Tensor>& p) { return k_div(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor& out) {
                  return std::vector<Tensor>{div(g, p[1]), neg(mul(g, div(out, p[1])))};
                });
}

Tensor neg(const Tensor& a) {
  return finish("neg", map1(a, [](double x) { return -x; }), {a},
                [](const std::vector<Tensor>& p) { return map1(p[0], [](double x) { return -x; }); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{neg(g)};
                });
}

Tensor scale(const Tensor& a, double c) {
  return finish("scale", map1(a, [c](double x) { return x * c; }), {a},
                [c](const std::vector<Tensor>& p) {
                  return map1(p[0], [c](double x) { return x * c; });
                },
                [c](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{scale(g, c)};
                });
}

Tensor add_scalar(const Tensor& a, double c) {
  return finish("add_scalar", map1(a, [c](double x) { return x + c; }), {a},
                [c](const std::vector<Tensor>& p) {
                  return map1(p[0], [c](double x) { return x + c; });
                },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{g};
                });
}

Tensor square(const Tensor& a) {
  return finish("square", map1(a, [](double x) { return x * x; }), {a},
                [](const std::vector<Tensor>& p) {
                  return map1(p[0], [](double x) { return x * x; });
                },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{mul(g, scale(p[0], 2.0))};
                });
}

Tensor exp(const Tensor& a) {
  return finish("exp", map1(a, [](double x) { return std::exp(x); }), {a},
                [](const std::vector<Tensor>& p) {
                  return map1(p[0], [](double x) { return std::exp(x); });
                },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor& out) {
                  return std::vector<Tensor>{mul(g, out)};
                });
}

Tensor log(const Tensor& a) {
  return finish("log", map1(a, [](double x) { return std::log(x); }), {a},
                [](const std::vector<Tensor>& p) {
                  return map1(p[0], [](double x) { return std::log(x); });
                },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{div(g, p[0])};
                });
}

Tensor relu(const Tensor& a) {
  return finish("relu", map1(a, [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                [](const std::vector<Tensor>& p) {
                  return map1(p[0], [](double x) { return x > 0.0 ? x : 0.0; });
                },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  Tensor mask = map1(p[0], [](double x) { return x > 0.0 ? 1.0 : 0.0; });
                  return std::vector<Tensor>{mul(g, mask.detached())};
                });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  return finish("matmul", k_matmul(a, b), {a, b},
                [](const std::vector<Tensor>& p) { return k_matmul(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{matmul(g, transpose(p[1])),
                                             matmul(transpose(p[0]), g)};
                });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  return finish("transpose", k_transpose(a), {a},
                [](const std::vector<Tensor>& p) { return k_transpose(p[0]); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{transpose(g)};
                });
}

Tensor solve(const Tensor& a, const Tensor& b) {
  require_rank("solve", a, 2);
  require_rank("solve", b, 2);
  if (a.shape()[0] != a.shape()[1] || a.shape()[0] != b.shape()[0]) {
    throw ShapeError("solve: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  return finish("solve", k_solve(a, b), {a, b},
                [](const std::vector<Tensor>& p) { return k_solve(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor& out) {
                  Tensor gb = solve(transpose(p[0]), g);
                  Tensor ga = neg(matmul(gb, transpose(out)));
                  return std::vector<Tensor>{ga, gb};
                });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return finish("sum_all", Tensor::scalar(s), {a},
                [](const std::vector<Tensor>& p) {
                  double acc = 0.0;
                  for (double v : p[0].values()) acc += v;
                  return Tensor::scalar(acc);
                },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{broadcast_scalar(g, p[0].shape())};
                });
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_rows(const Tensor& m) {
  require_rank("sum_rows", m, 2);
  return finish("sum_rows", k_sum_rows(m), {m},
                [](const std::vector<Tensor>& p) { return k_sum_rows(p[0]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{broadcast_rows(g, p[0].shape()[0])};
                });
}

Tensor sum_cols(const Tensor& m) {
  require_rank("sum_cols", m, 2);
  return finish("sum_cols", k_sum_cols(m), {m},
                [](const std::vector<Tensor>& p) { return k_sum_cols(p[0]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{broadcast_cols(g, p[0].shape()[1])};
                });
}

Tensor broadcast_rows(const Tensor& v, std::size_t r) {
  require_rank("broadcast_rows", v, 1);
  return finish("broadcast_rows", k_broadcast_rows(v, r), {v},
                [r](const std::vector<Tensor>& p) { return k_broadcast_rows(p[0], r); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{sum_rows(g)};
                });
}

Tensor broadcast_cols(const Tensor& v, std::size_t c) {
  require_rank("broadcast_cols", v, 1);
  return finish("broadcast_cols", k_broadcast_cols(v, c), {v},
                [c](const std::vector<Tensor>& p) { return k_broadcast_cols(p[0], c); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{sum_cols(g)};
                });
}

Tensor broadcast_scalar(const Tensor& s, Shape shape) {
  if (s.size() != 1) throw ShapeError("broadcast_scalar: source has shape " + shape_str(s.shape()));
  Tensor out = Tensor::full(shape, s.value());
  return finish("broadcast_scalar", std::move(out), {s},
                [shape](const std::vector<Tensor>& p) { return Tensor::full(shape, p[0].value()); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{reshape(sum_all(g), p[0].shape())};
                });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_rank("add_rowvec", m, 2);
  require_rank("add_rowvec", v, 1);
  if (m.shape()[1] != v.shape()[0]) {
    throw ShapeError("add_rowvec: shape mismatch " + shape_str(m.shape()) + " vs " +
                     shape_str(v.shape()));
  }
  return finish("add_rowvec", k_add_rowvec(m, v), {m, v},
                [](const std::vector<Tensor>& p) { return k_add_rowvec(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{g, sum_rows(g)};
                });
}

Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
  require_rank("mul_rowvec", m, 2);
  require_rank("mul_rowvec", v, 1);
  if (m.shape()[1] != v.shape()[0]) {
    throw ShapeError("mul_rowvec: shape mismatch " + shape_str(m.shape()) + " vs " +
                     shape_str(v.shape()));
  }
  return finish("mul_rowvec", k_mul_rowvec(m, v), {m, v},
                [](const std::vector<Tensor>& p) { return k_mul_rowvec(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>& p, const Tensor&) {
                  return std::vector<Tensor>{mul_rowvec(g, p[1]), sum_rows(mul(g, p[0]))};
                });
}

Tensor add_colvec(const Tensor& m, const Tensor& v) {
  require_rank("add_colvec", m, 2);
  require_rank("add_colvec", v, 1);
  if (m.shape()[0] != v.shape()[0]) {
    throw ShapeError("add_colvec: shape mismatch " + shape_str(m.shape()) + " vs " +
                     shape_str(v.shape()));
  }
  return finish("add_colvec", k_add_colvec(m, v), {m, v},
                [](const std::vector<Tensor>& p) { return k_add_colvec(p[0], p[1]); },
                [](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{g, sum_cols(g)};
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  Tensor out(shape, a.values());
  Shape orig = a.shape();
  return finish("reshape", std::move(out), {a},
                [shape](const std::vector<Tensor>& p) { return Tensor(shape, p[0].values()); },
                [orig](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{reshape(g, orig)};
                });
}

Tensor group_mean_rows(const Tensor& z, const RowGroups& groups) {
  require_rank("group_mean_rows", z, 2);
  for (const auto& g : groups) {
    if (g.empty()) throw ShapeError("group_mean_rows: empty group");
  }
  const std::size_t rows = z.shape()[0];
  return finish("group_mean_rows", k_group_mean_rows(z, groups), {z},
                [groups](const std::vector<Tensor>& p) { return k_group_mean_rows(p[0], groups); },
                [groups, rows](const Tensor& g, const std::vector<Tensor>&, const Tensor&) {
                  return std::vector<Tensor>{group_expand_rows(g, groups, rows, true)};
                });
}

Tensor group_expand_rows(const Tensor& p, const RowGroups& groups, std::size_t rows,
                         bool divide_by_size) {
  require_rank("group_expand_rows", p, 2);
  return finish("group_expand_rows", k_group_expand_rows(p, groups, rows, divide_by_size), {p},
                [groups, rows, divide_by_size](const std::vector<Tensor>& in) {
                  return k_group_expand_rows(in[0], groups, rows, divide_by_size);
                },
                [groups, divide_by_size](const Tensor& g, const std::vector<Tensor>&,
                                         const Tensor&) {
                  return std::vector<Tensor>{group_sum_rows(g, groups, divide_by_size)};
                });
}

Tensor group_sum_rows(const Tensor& z, const RowGroups& groups, bool divide_by_size) {
  require_rank("group_sum_rows", z, 2);
  const std::size_t rows = z.shape()[0];
  return finish("group_sum_rows", k_group_sum_rows(z, groups, divide_by_size), {z},
                [groups, divide_by_size](const std::vector<Tensor>& in) {
                  return k_group_sum_rows(in[0], groups, divide_by_size);
                },
                [groups, rows, divide_by_size](const Tensor& g, const std::vector<Tensor>&,
                                               const Tensor&) {
                  return std::vector<Tensor>{group_expand_rows(g, groups, rows, divide_by_size)};
                });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape("mse_loss", pred, target);
  return mean_all(square(sub(pred, target)));
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t m = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != m) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_str(logits.shape()));
  }
  std::vector<double> neg_max(m), onehot(m * k, 0.0), maxv(m);
  for (std::size_t i = 0; i < m; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    }
    onehot[i * k + static_cast<std::size_t>(y)] = 1.0;
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    maxv[i] = mx;
    neg_max[i] = -mx;
  }
  // Row max enters as a detached shift; the loss value and its gradients do
  // not depend on it away from ties.
  Tensor shifted = add_colvec(logits, Tensor({m}, std::move(neg_max)));
  Tensor lse = add(log(sum_cols(exp(shifted))), Tensor({m}, std::move(maxv)));
  Tensor picked = sum_cols(mul(logits, Tensor({m, k}, std::move(onehot))));
  return mean_all(sub(lse, picked));
}

Tensor softmax(const Tensor& logits) {
  require_rank("softmax", logits, 2);
  const std::size_t m = logits.shape()[0], k = logits.shape()[1];
  std::vector<double> neg_max(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    neg_max[i] = -mx;
  }
  Tensor ex = exp(add_colvec(logits, Tensor({m}, std::move(neg_max))));
  return div(ex, broadcast_cols(sum_cols(ex), k));
}

Tensor pairwise_sqdist(const Tensor& q, const Tensor& p) {
  require_rank("pairwise_sqdist", q, 2);
  require_rank("pairwise_sqdist", p, 2);
  if (q.shape()[1] != p.shape()[1]) {
    throw ShapeError("pairwise_sqdist: shape mismatch " + shape_str(q.shape()) + " vs " +
                     shape_str(p.shape()));
  }
  Tensor cross = scale(matmul(q, transpose(p)), -2.0);
  Tensor qs = sum_cols(square(q));
  Tensor ps = sum_cols(square(p));
  return add_colvec(add_rowvec(cross, ps), qs);
}

}  // namespace metashift::ad
