#include "kpgen/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kpgen/errors.hpp"

namespace kpgen::ops {

namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ConfigError(std::string(op) + ": " + what);
}

void require_same_shape(const Tape& tape, Var a, Var b, const char* op) {
  require(tape.shape(a) == tape.shape(b), op,
          "shape mismatch " + shape_string(tape.shape(a)) + " vs " +
              shape_string(tape.shape(b)));
}

std::size_t rows_of(const Tape& tape, Var m, const char* op) {
  require(tape.shape(m).size() == 2, op, "expected a matrix, got " + shape_string(tape.shape(m)));
  return tape.shape(m)[0];
}

std::size_t cols_of(const Tape& tape, Var m) { return tape.shape(m)[1]; }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> xs) {
  double mx = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "add");
  auto av = tape.value(a), bv = tape.value(b);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return tape.record("add", tape.shape(a), std::move(out), {a, b},
                     [a, b](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       for (Var in : {a, b}) {
                         if (!t.needs_grad(in)) continue;
                         auto gi = t.grad(in);
                         for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                       }
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "mul");
  auto av = tape.value(a), bv = tape.value(b);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.record("mul", tape.shape(a), std::move(out), {a, b},
                     [a, b](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto av = t.value(a), bv = t.value(b);
                       if (t.needs_grad(a)) {
                         auto ga = t.grad(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (t.needs_grad(b)) {
                         auto gb = t.grad(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

Var scale(Tape& tape, Var a, double factor) {
  auto av = tape.value(a);
  std::vector<double> out(av.begin(), av.end());
  for (double& v : out) v *= factor;
  return tape.record("scale", tape.shape(a), std::move(out), {a},
                     [a, factor](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto ga = t.grad(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                     });
}

Var sigmoid(Tape& tape, Var a) {
  auto av = tape.value(a);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(av[i]);
  return tape.record("sigmoid", tape.shape(a), std::move(out), {a},
                     [a](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto y = t.value(Var{self});
                       auto ga = t.grad(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
                     });
}

Var tanh(Tape& tape, Var a) {
  auto av = tape.value(a);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return tape.record("tanh", tape.shape(a), std::move(out), {a},
                     [a](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto y = t.value(Var{self});
                       auto ga = t.grad(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                     });
}

Var add_n(Tape& tape, std::span<const Var> scalars) {
  require(!scalars.empty(), "add_n", "no inputs");
  double total = 0.0;
  for (Var s : scalars) {
    require(tape.size_of(s) == 1, "add_n", "inputs must be scalars");
    total += tape.value(s)[0];
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return tape.record("add_n", {1}, {total}, inputs,
                     [inputs](Tape& t, std::uint32_t self) {
                       double g = t.grad(Var{self})[0];
                       for (Var in : inputs) {
                         if (t.needs_grad(in)) t.grad(in)[0] += g;
                       }
                     });
}

Var sum(Tape& tape, Var a) {
  auto av = tape.value(a);
  double total = 0.0;
  for (double v : av) total += v;
  return tape.record("sum", {1}, {total}, {a}, [a](Tape& t, std::uint32_t self) {
    double g = t.grad(Var{self})[0];
    for (double& gi : t.grad(a)) gi += g;
  });
}

Var dot(Tape& tape, Var a, Var b) {
  require(tape.size_of(a) == tape.size_of(b), "dot", "length mismatch");
  auto av = tape.value(a), bv = tape.value(b);
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * bv[i];
  return tape.record("dot", {1}, {total}, {a, b}, [a, b](Tape& t, std::uint32_t self) {
    double g = t.grad(Var{self})[0];
    auto av = t.value(a), bv = t.value(b);
    if (t.needs_grad(a)) {
      auto ga = t.grad(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    }
    if (t.needs_grad(b)) {
      auto gb = t.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
    }
  });
}

Var matvec(Tape& tape, Var w, Var x) {
  const std::size_t m = rows_of(tape, w, "matvec");
  const std::size_t n = cols_of(tape, w);
  require(tape.size_of(x) == n, "matvec",
          "matrix " + shape_string(tape.shape(w)) + " vs vector of " +
              std::to_string(tape.size_of(x)));
  auto wv = tape.value(w), xv = tape.value(x);
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = wv.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * xv[j];
    out[i] = acc;
  }
  return tape.record("matvec", {m}, std::move(out), {w, x},
                     [w, x, m, n](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       if (t.needs_grad(w)) {
                         auto gw = t.grad(w);
                         auto xv = t.value(x);
                         for (std::size_t i = 0; i < m; ++i) {
                           if (g[i] == 0.0) continue;
                           double* gr = gw.data() + i * n;
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g[i] * xv[j];
                         }
                       }
                       if (t.needs_grad(x)) {
                         auto gx = t.grad(x);
                         auto wv = t.value(w);
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* wr = wv.data() + i * n;
                           for (std::size_t j = 0; j < n; ++j) gx[j] += g[i] * wr[j];
                         }
                       }
                     });
}

Var matvec_t(Tape& tape, Var w, Var x) {
  const std::size_t m = rows_of(tape, w, "matvec_t");
  const std::size_t n = cols_of(tape, w);
  require(tape.size_of(x) == m, "matvec_t",
          "matrix " + shape_string(tape.shape(w)) + " vs vector of " +
              std::to_string(tape.size_of(x)));
  auto wv = tape.value(w), xv = tape.value(x);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = wv.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += wr[j] * xv[i];
  }
  return tape.record("matvec_t", {n}, std::move(out), {w, x},
                     [w, x, m, n](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       if (t.needs_grad(w)) {
                         auto gw = t.grad(w);
                         auto xv = t.value(x);
                         for (std::size_t i = 0; i < m; ++i) {
                           double* gr = gw.data() + i * n;
                           for (std::size_t j = 0; j < n; ++j) gr[j] += xv[i] * g[j];
                         }
                       }
                       if (t.needs_grad(x)) {
                         auto gx = t.grad(x);
                         auto wv = t.value(w);
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* wr = wv.data() + i * n;
                           double acc = 0.0;
                           for (std::size_t j = 0; j < n; ++j) acc += wr[j] * g[j];
                           gx[i] += acc;
                         }
                       }
                     });
}

Var affine(Tape& tape, Var w, Var x, Var b) {
  Var wx = matvec(tape, w, x);
  return add(tape, wx, b);
}

Var matmul(Tape& tape, Var a, Var b) {
  const std::size_t m = rows_of(tape, a, "matmul");
  const std::size_t k = cols_of(tape, a);
  require(rows_of(tape, b, "matmul") == k, "matmul",
          shape_string(tape.shape(a)) + " x " + shape_string(tape.shape(b)));
  const std::size_t n = cols_of(tape, b);
  auto av = tape.value(a), bv = tape.value(b);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      const double* br = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * br[j];
    }
  }
  return tape.record("matmul", {m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto av = t.value(a), bv = t.value(b);
                       if (t.needs_grad(a)) {
                         auto ga = t.grad(a);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (t.needs_grad(b)) {
                         auto gb = t.grad(b);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double aip = av[i * k + p];
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                           }
                       }
                     });
}

Var matmul_bt(Tape& tape, Var a, Var b) {
  const std::size_t m = rows_of(tape, a, "matmul_bt");
  const std::size_t k = cols_of(tape, a);
  const std::size_t n = rows_of(tape, b, "matmul_bt");
  require(cols_of(tape, b) == k, "matmul_bt",
          shape_string(tape.shape(a)) + " x " + shape_string(tape.shape(b)) + "^T");
  auto av = tape.value(a), bv = tape.value(b);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[j * k + p];
      out[i * n + j] = acc;
    }
  return tape.record("matmul_bt", {m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto av = t.value(a), bv = t.value(b);
                       if (t.needs_grad(a)) {
                         auto ga = t.grad(a);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                             double gij = g[i * n + j];
                             for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[j * k + p];
                           }
                       }
                       if (t.needs_grad(b)) {
                         auto gb = t.grad(b);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                             double gij = g[i * n + j];
                             for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gij * av[i * k + p];
                           }
                       }
                     });
}

Var add_row(Tape& tape, Var m, Var v) {
  const std::size_t rows = rows_of(tape, m, "add_row");
  const std::size_t cols = cols_of(tape, m);
  require(tape.size_of(v) == cols, "add_row", "row length mismatch");
  auto mv = tape.value(m), vv = tape.value(v);
  std::vector<double> out(mv.begin(), mv.end());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += vv[j];
  return tape.record("add_row", tape.shape(m), std::move(out), {m, v},
                     [m, v, rows, cols](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       if (t.needs_grad(m)) {
                         auto gm = t.grad(m);
                         for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
                       }
                       if (t.needs_grad(v)) {
                         auto gv = t.grad(v);
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < cols; ++j) gv[j] += g[i * cols + j];
                       }
                     });
}

Var concat(Tape& tape, std::span<const Var> parts) {
  require(!parts.empty(), "concat", "no inputs");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    offsets.push_back(out.size());
    auto pv = tape.value(p);
    out.insert(out.end(), pv.begin(), pv.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::size_t total = out.size();
  return tape.record("concat", {total}, std::move(out), inputs,
                     [inputs, offsets](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         if (!t.needs_grad(inputs[k])) continue;
                         auto gi = t.grad(inputs[k]);
                         for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offsets[k] + i];
                       }
                     });
}

Var stack_rows(Tape& tape, std::span<const Var> rows) {
  require(!rows.empty(), "stack_rows", "no inputs");
  const std::size_t n = tape.size_of(rows[0]);
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (Var r : rows) {
    require(tape.size_of(r) == n, "stack_rows", "ragged rows");
    auto rv = tape.value(r);
    out.insert(out.end(), rv.begin(), rv.end());
  }
  std::vector<Var> inputs(rows.begin(), rows.end());
  return tape.record("stack_rows", {rows.size(), n}, std::move(out), inputs,
                     [inputs, n](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         if (!t.needs_grad(inputs[k])) continue;
                         auto gi = t.grad(inputs[k]);
                         for (std::size_t i = 0; i < n; ++i) gi[i] += g[k * n + i];
                       }
                     });
}

Var row(Tape& tape, Var m, std::size_t index) {
  const std::size_t rows = rows_of(tape, m, "row");
  const std::size_t cols = cols_of(tape, m);
  if (index >= rows) {
    throw UsageError("row: index " + std::to_string(index) + " out of range for " +
                     shape_string(tape.shape(m)));
  }
  auto mv = tape.value(m);
  std::vector<double> out(mv.begin() + index * cols, mv.begin() + (index + 1) * cols);
  return tape.record("row", {cols}, std::move(out), {m},
                     [m, index, cols](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto gm = t.grad(m);
                       for (std::size_t j = 0; j < cols; ++j) gm[index * cols + j] += g[j];
                     });
}

Var softmax(Tape& tape, Var logits) {
  if (tape.size_of(logits) == 0) throw UsageError("softmax: empty input");
  std::vector<double> out = kpgen::softmax(tape.value(logits));
  return tape.record("softmax", tape.shape(logits), std::move(out), {logits},
                     [logits](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto y = t.value(Var{self});
                       double inner = 0.0;
                       for (std::size_t i = 0; i < y.size(); ++i) inner += g[i] * y[i];
                       auto gl = t.grad(logits);
                       for (std::size_t i = 0; i < y.size(); ++i) gl[i] += y[i] * (g[i] - inner);
                     });
}

Var log_softmax_mass(Tape& tape, Var scores, std::span<const std::size_t> members) {
  auto sv = tape.value(scores);
  if (sv.empty()) throw UsageError("log_softmax_mass: empty scores");
  if (members.empty()) {
    throw NumericError("log_softmax_mass: empty member set has zero probability");
  }
  std::vector<double> picked;
  picked.reserve(members.size());
  for (std::size_t i : members) {
    if (i >= sv.size()) throw UsageError("log_softmax_mass: member index out of range");
    picked.push_back(sv[i]);
  }
  const double lse_all = log_sum_exp(sv);
  const double lse_members = log_sum_exp(picked);
  std::vector<std::size_t> idx(members.begin(), members.end());
  return tape.record(
      "log_softmax_mass", {1}, {lse_members - lse_all}, {scores},
      [scores, idx, lse_all, lse_members](Tape& t, std::uint32_t self) {
        double g = t.grad(Var{self})[0];
        auto sv = t.value(scores);
        auto gs = t.grad(scores);
        for (std::size_t i = 0; i < sv.size(); ++i) gs[i] -= g * std::exp(sv[i] - lse_all);
        for (std::size_t i : idx) gs[i] += g * std::exp(sv[i] - lse_members);
      });
}

Var dropout(Tape& tape, Var x, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto xv = tape.value(x);
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = unif(rng) < rate ? 0.0 : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return tape.record("dropout", tape.shape(x), std::move(out), {x},
                     [x, mask = std::move(mask)](Tape& t, std::uint32_t self) {
                       auto g = t.grad(Var{self});
                       auto gx = t.grad(x);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                     });
}

Var gru_cell(Tape& tape, Var x, Var h_prev, const GruWeights& w) {
  const std::size_t in = tape.size_of(x);
  const std::size_t hid = tape.size_of(h_prev);
  require(tape.shape(w.w_input) == Shape{3 * hid, in}, "gru_cell",
          "input weights " + shape_string(tape.shape(w.w_input)) + " for input " +
              std::to_string(in) + ", hidden " + std::to_string(hid));
  require(tape.shape(w.w_hidden) == Shape{3 * hid, hid}, "gru_cell",
          "hidden weights " + shape_string(tape.shape(w.w_hidden)));
  require(tape.size_of(w.bias) == 3 * hid, "gru_cell", "bias length");

  auto xv = tape.value(x), hv = tape.value(h_prev);
  auto wi = tape.value(w.w_input), wh = tape.value(w.w_hidden), bv = tape.value(w.bias);

  // Saved activations: z, r, n, r*h.
  std::vector<double> z(hid), r(hid), n(hid), rh(hid), out(hid);
  auto input_part = [&](std::size_t row) {
    const double* wr = wi.data() + row * in;
    double acc = bv[row];
    for (std::size_t j = 0; j < in; ++j) acc += wr[j] * xv[j];
    return acc;
  };
  auto hidden_part = [&](std::size_t row, std::span<const double> h) {
    const double* wr = wh.data() + row * hid;
    double acc = 0.0;
    for (std::size_t j = 0; j < hid; ++j) acc += wr[j] * h[j];
    return acc;
  };
  for (std::size_t i = 0; i < hid; ++i) {
    z[i] = sigmoid_scalar(input_part(i) + hidden_part(i, hv));
    r[i] = sigmoid_scalar(input_part(hid + i) + hidden_part(hid + i, hv));
    rh[i] = r[i] * hv[i];
  }
  for (std::size_t i = 0; i < hid; ++i) {
    n[i] = std::tanh(input_part(2 * hid + i) + hidden_part(2 * hid + i, rh));
    out[i] = z[i] * hv[i] + (1.0 - z[i]) * n[i];
  }

  GruWeights wc = w;
  return tape.record(
      "gru_cell", {hid}, std::move(out), {x, h_prev, w.w_input, w.w_hidden, w.bias},
      [x, h_prev, wc, in, hid, z = std::move(z), r = std::move(r), n = std::move(n),
       rh = std::move(rh)](Tape& t, std::uint32_t self) {
        auto g = t.grad(Var{self});
        auto xv = t.value(x), hv = t.value(h_prev);
        auto wi = t.value(wc.w_input), wh = t.value(wc.w_hidden);

        // Pre-activation gradients for the three gate blocks.
        std::vector<double> da(3 * hid);
        std::vector<double> dh(hid, 0.0);
        for (std::size_t i = 0; i < hid; ++i) {
          double dz = g[i] * (hv[i] - n[i]);
          double dn = g[i] * (1.0 - z[i]);
          dh[i] += g[i] * z[i];
          da[i] = dz * z[i] * (1.0 - z[i]);
          da[2 * hid + i] = dn * (1.0 - n[i] * n[i]);
        }
        // Through U_n (r * h).
        std::vector<double> drh(hid, 0.0);
        for (std::size_t row = 0; row < hid; ++row) {
          const double* wr = wh.data() + (2 * hid + row) * hid;
          double d = da[2 * hid + row];
          for (std::size_t j = 0; j < hid; ++j) drh[j] += wr[j] * d;
        }
        for (std::size_t i = 0; i < hid; ++i) {
          double dr = drh[i] * hv[i];
          dh[i] += drh[i] * r[i];
          da[hid + i] = dr * r[i] * (1.0 - r[i]);
        }
        // Recurrent path of z and r.
        for (std::size_t row = 0; row < 2 * hid; ++row) {
          const double* wr = wh.data() + row * hid;
          double d = da[row];
          for (std::size_t j = 0; j < hid; ++j) dh[j] += wr[j] * d;
        }

        if (t.needs_grad(wc.w_input)) {
          auto gwi = t.grad(wc.w_input);
          for (std::size_t row = 0; row < 3 * hid; ++row) {
            double d = da[row];
            if (d == 0.0) continue;
            double* gr = gwi.data() + row * in;
            for (std::size_t j = 0; j < in; ++j) gr[j] += d * xv[j];
          }
        }
        if (t.needs_grad(wc.w_hidden)) {
          auto gwh = t.grad(wc.w_hidden);
          for (std::size_t row = 0; row < 3 * hid; ++row) {
            double d = da[row];
            if (d == 0.0) continue;
            std::span<const double> src = row < 2 * hid ? hv : std::span<const double>(rh);
            double* gr = gwh.data() + row * hid;
            for (std::size_t j = 0; j < hid; ++j) gr[j] += d * src[j];
          }
        }
        if (t.needs_grad(wc.bias)) {
          auto gb = t.grad(wc.bias);
          for (std::size_t row = 0; row < 3 * hid; ++row) gb[row] += da[row];
        }
        if (t.needs_grad(x)) {
          auto gx = t.grad(x);
          for (std::size_t row = 0; row < 3 * hid; ++row) {
            const double* wr = wi.data() + row * in;
            double d = da[row];
            for (std::size_t j = 0; j < in; ++j) gx[j] += wr[j] * d;
          }
        }
        if (t.needs_grad(h_prev)) {
          auto gh = t.grad(h_prev);
          for (std::size_t i = 0; i < hid; ++i) gh[i] += dh[i];
        }
      });
}

}  // namespace kpgen::ops

namespace kpgen {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw UsageError("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

ClipResult clip_gradients(Gradients& grads, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("clip_gradients: threshold must be positive");
  ClipResult result;
  result.norm = global_norm(grads);
  if (!std::isfinite(result.norm)) throw NumericError("clip_gradients: non-finite gradient");
  if (result.norm <= threshold) return result;
  const double factor = threshold / result.norm;
  for (auto& g : grads) {
    for (double& v : g.values()) v *= factor;
  }
  result.clipped = true;
  return result;
}

}  // namespace kpgen
