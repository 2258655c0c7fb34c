#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazeaeg/random.hpp"
#include "gazeaeg/tape.hpp"

namespace gazeaeg::num {

// Differentiable primitives. Each records its result on the tape together
// with the rule that maps the output gradient back to its inputs.
//
// Matrices are rank-2 tensors; vectors are rank-1. Masks are per-row 0/1
// bytes where an empty span means "all rows active".

Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var mul(Tape& tape, Var a, Var b);
Var sum(Tape& tape, Var a);
// Sum of scalars with fixed weights.
Var weighted_sum(Tape& tape, std::span<const Var> terms, std::span<const double> weights);

Var relu(Tape& tape, Var x);
Var tanh(Tape& tape, Var x);
Var sigmoid(Tape& tape, Var x);

// (n x k) . (k x m)
Var matmul(Tape& tape, Var a, Var b);
// x: n x a (or a vector of length a), w: a x b, bias: b.
Var linear(Tape& tape, Var x, Var w, Var bias);

// Rows of `table` picked by index; result is n x d.
Var gather_rows(Tape& tape, Var table, std::span<const std::int32_t> rows);

// Inverted dropout: in training each entry is zeroed with probability
// `rate` and survivors are scaled by 1 / (1 - rate); identity otherwise.
Var dropout(Tape& tape, Var x, double rate, bool train, Rng& rng);

// x: T x d_in, kernels: k x d_in x f, bias: f -> T x f. k must be odd; the
// input is zero padded by (k - 1) / 2 on both ends.
Var conv1d_same(Tape& tape, Var x, Var kernels, Var bias);

// Gate blocks are ordered input, forget, candidate, output.
struct LstmWeights {
  Var w_input;   // d x 4h
  Var w_hidden;  // h x 4h
  Var bias;      // 4h
};

// Runs an LSTM from zero state over the rows of `inputs` (S x d) and
// returns every hidden state (S x h).
Var lstm_seq(Tape& tape, Var inputs, const LstmWeights& weights);

struct AttentionWeights {
  Var w;  // h x a
  Var v;  // a
};

struct Pooled {
  Var output;                   // h
  std::vector<double> weights;  // one per row, 0 where masked
};

// score_i = v . tanh(s_i w); weights = softmax over active rows;
// output = sum_i weight_i s_i.
Pooled attention_pool(Tape& tape, Var states, const AttentionWeights& weights,
                      std::span<const std::uint8_t> mask = {});

// Mean of the active rows.
Var mean_pool(Tape& tape, Var states, std::span<const std::uint8_t> mask = {});

// Stacks equal-length vectors into a matrix, one per row.
Var stack_rows(Tape& tape, std::span<const Var> rows);

// Concatenates matrices with equal column counts along the rows. Vectors
// count as single rows.
Var concat_rows(Tape& tape, std::span<const Var> parts);

// Column j of a matrix, as a vector.
Var column(Tape& tape, Var x, std::size_t j);

// Mean of (pred - target)^2 over entries whose mask is nonzero. With no
// active entries the loss is 0 and no gradient flows.
Var mse(Tape& tape, Var pred, const Tensor& target, const Tensor* mask = nullptr);

}  // namespace gazeaeg::num
