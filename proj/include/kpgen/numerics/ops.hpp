#pragma once

#include <random>
#include <span>
#include <vector>

#include "kpgen/numerics/tape.hpp"

namespace kpgen::ops {

// Elementwise, shapes must agree.
Var add(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var sigmoid(Tape& tape, Var a);
Var tanh(Tape& tape, Var a);

// Sum of scalars.
Var add_n(Tape& tape, std::span<const Var> scalars);
Var sum(Tape& tape, Var a);
Var dot(Tape& tape, Var a, Var b);

// W[m x n] * x[n] -> [m]
Var matvec(Tape& tape, Var w, Var x);
// W[m x n]^T * x[m] -> [n]
Var matvec_t(Tape& tape, Var w, Var x);
// W x + b
Var affine(Tape& tape, Var w, Var x, Var b);
// A[m x k] * B[k x n] -> [m x n]
Var matmul(Tape& tape, Var a, Var b);
// A[m x k] * B[n x k]^T -> [m x n]
Var matmul_bt(Tape& tape, Var a, Var b);
// M[m x n] + v[n] broadcast over rows.
Var add_row(Tape& tape, Var m, Var v);

// Flattened concatenation of vectors.
Var concat(Tape& tape, std::span<const Var> parts);
// Vectors of equal length n -> [count x n]
Var stack_rows(Tape& tape, std::span<const Var> rows);
// Row i of M, e.g. an embedding lookup.
Var row(Tape& tape, Var m, std::size_t index);

Var softmax(Tape& tape, Var logits);

/// log(sum_{i in members} softmax(scores)_i), computed without forming the
/// probabilities in linear space. `members` must be non-empty and in range.
Var log_softmax_mass(Tape& tape, Var scores, std::span<const std::size_t> members);

/// Inverted dropout. Identity when !training or rate == 0.
Var dropout(Tape& tape, Var x, double rate, bool training, std::mt19937_64& rng);

struct GruWeights {
  Var w_input;   // [3H x I], gate blocks ordered update, reset, candidate
  Var w_hidden;  // [3H x H]
  Var bias;      // [3H]
};

/// One GRU step in the Cho et al. form:
///   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r * h) + bn), h' = z * h + (1 - z) * n
Var gru_cell(Tape& tape, Var x, Var h_prev, const GruWeights& w);

}  // namespace kpgen::ops

namespace kpgen {

/// Max-subtracted softmax over a plain vector. Throws UsageError on empty input.
std::vector<double> softmax(std::span<const double> logits);

struct ClipResult {
  double norm = 0.0;  // global L2 norm before clipping
  bool clipped = false;
};

/// Rescales all gradients by threshold/norm when their global L2 norm exceeds
/// `threshold`.
ClipResult clip_gradients(Gradients& grads, double threshold);

}  // namespace kpgen
