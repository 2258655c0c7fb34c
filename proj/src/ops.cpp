#include "gazeaeg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "gazeaeg/error.hpp"

namespace gazeaeg::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using CVecMap = Eigen::Map<const Eigen::RowVectorXd>;

MatMap mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
CMatMap mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
VecMap vec(Tensor& t) { return VecMap(t.data(), static_cast<Eigen::Index>(t.size())); }
CVecMap vec(const Tensor& t) { return CVecMap(t.data(), static_cast<Eigen::Index>(t.size())); }

// Id the next recorded node will receive.
Var next_var(const Tape& tape) { return Var{static_cast<std::uint32_t>(tape.size())}; }

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw ParameterError(std::string(op) + ": " + detail);
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    shape_error(op, std::string(what) + " must have rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

void require_mask(const char* op, std::span<const std::uint8_t> mask, std::size_t rows) {
  if (!mask.empty() && mask.size() != rows) {
    shape_error(op, "mask has " + std::to_string(mask.size()) + " entries for " + std::to_string(rows) + " rows");
  }
}

bool active(std::span<const std::uint8_t> mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

template <typename F, typename D>
Var unary(Tape& tape, Var x, const char* op, F f, D derivative_from_output) {
  const auto& xv = tape.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const Var self = next_var(tape);
  return tape.record(
      std::move(out), {x},
      [x, self, derivative_from_output](Tape& t, const Tensor& g) {
        auto* gx = t.grad_target(x);
        if (gx == nullptr) return;
        const auto& y = t.value(self);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * derivative_from_output(y[i]);
      },
      op);
}

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (!av.same_shape(bv)) shape_error("add", shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return tape.record(
      std::move(out), {a, b},
      [a, b](Tape& t, const Tensor& g) {
        for (auto v : {a, b}) {
          if (auto* gv = t.grad_target(v)) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
          }
        }
      },
      "add");
}

Var scale(Tape& tape, Var a, double factor) {
  const auto& av = tape.value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * av[i];
  return tape.record(
      std::move(out), {a},
      [a, factor](Tape& t, const Tensor& g) {
        if (auto* ga = t.grad_target(a)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += factor * g[i];
        }
      },
      "scale");
}

Var mul(Tape& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (!av.same_shape(bv)) shape_error("mul", shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.record(
      std::move(out), {a, b},
      [a, b](Tape& t, const Tensor& g) {
        const auto& av = t.value(a);
        const auto& bv = t.value(b);
        if (auto* ga = t.grad_target(a)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
        }
        if (auto* gb = t.grad_target(b)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
        }
      },
      "mul");
}

Var sum(Tape& tape, Var a) {
  const auto& av = tape.value(a);
  double s = 0.0;
  for (double v : av.values()) s += v;
  return tape.record(
      Tensor::scalar(s), {a},
      [a](Tape& t, const Tensor& g) {
        if (auto* ga = t.grad_target(a)) {
          for (auto& v : ga->values()) v += g[0];
        }
      },
      "sum");
}

Var weighted_sum(Tape& tape, std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size()) shape_error("weighted_sum", "terms and weights differ in length");
  if (terms.empty()) return tape.constant(Tensor::scalar(0.0));
  double s = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& v = tape.value(terms[i]);
    if (!v.is_scalar()) shape_error("weighted_sum", "terms must be scalars");
    s += weights[i] * v[0];
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<double> ws(weights.begin(), weights.end());
  return tape.record(
      Tensor::scalar(s), std::span<const Var>(ts),
      [ts, ws](Tape& t, const Tensor& g) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
          if (auto* gi = t.grad_target(ts[i])) (*gi)[0] += ws[i] * g[0];
        }
      },
      "weighted_sum");
}

Var relu(Tape& tape, Var x) {
  return unary(
      tape, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Tape& tape, Var x) {
  return unary(
      tape, x, "tanh", [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Tape& tape, Var x) {
  return unary(tape, x, "sigmoid", sigmoid_scalar, [](double y) { return y * (1.0 - y); });
}

Var matmul(Tape& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_rank("matmul", av, 2, "left operand");
  require_rank("matmul", bv, 2, "right operand");
  const auto n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  if (bv.dim(0) != k) shape_error("matmul", shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  Tensor out({n, m});
  mat(out, n, m).noalias() = mat(av, n, k) * mat(bv, k, m);
  return tape.record(
      std::move(out), {a, b},
      [a, b, n, k, m](Tape& t, const Tensor& g) {
        const auto gm = mat(g, n, m);
        if (auto* ga = t.grad_target(a)) mat(*ga, n, k).noalias() += gm * mat(t.value(b), k, m).transpose();
        if (auto* gb = t.grad_target(b)) mat(*gb, k, m).noalias() += mat(t.value(a), n, k).transpose() * gm;
      },
      "matmul");
}

Var linear(Tape& tape, Var x, Var w, Var bias) {
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(w);
  const auto& bv = tape.value(bias);
  require_rank("linear", wv, 2, "weight");
  const auto in = wv.dim(0), outd = wv.dim(1);
  if (xv.rank() > 2 || xv.size() % in != 0 || (xv.rank() == 2 && xv.dim(1) != in) || (xv.rank() == 1 && xv.size() != in)) {
    shape_error("linear", "input " + shape_string(xv.shape()) + " does not match weight " + shape_string(wv.shape()));
  }
  if (bv.size() != outd) shape_error("linear", "bias has " + std::to_string(bv.size()) + " entries, expected " + std::to_string(outd));
  const auto n = xv.rank() == 1 ? std::size_t{1} : xv.dim(0);
  Tensor out = xv.rank() == 1 ? Tensor({outd}) : Tensor({n, outd});
  auto om = mat(out, n, outd);
  om.noalias() = mat(xv, n, in) * mat(wv, in, outd);
  om.rowwise() += vec(bv);
  return tape.record(
      std::move(out), {x, w, bias},
      [x, w, bias, n, in, outd](Tape& t, const Tensor& g) {
        const auto gm = mat(g, n, outd);
        if (auto* gx = t.grad_target(x)) mat(*gx, n, in).noalias() += gm * mat(t.value(w), in, outd).transpose();
        if (auto* gw = t.grad_target(w)) mat(*gw, in, outd).noalias() += mat(t.value(x), n, in).transpose() * gm;
        if (auto* gb = t.grad_target(bias)) vec(*gb) += gm.colwise().sum();
      },
      "linear");
}

Var gather_rows(Tape& tape, Var table, std::span<const std::int32_t> rows) {
  const auto& tv = tape.value(table);
  require_rank("gather_rows", tv, 2, "table");
  if (rows.empty()) shape_error("gather_rows", "no rows requested");
  const auto d = tv.dim(1);
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r < 0 || static_cast<std::size_t>(r) >= tv.dim(0)) {
      shape_error("gather_rows", "row index " + std::to_string(r) + " outside table of " + std::to_string(tv.dim(0)) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(r) * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  return tape.record(
      std::move(out), {table},
      [table, idx = std::move(idx), d](Tape& t, const Tensor& g) {
        auto* gt = t.grad_target(table);
        if (gt == nullptr) return;
        for (std::size_t i = 0; i < idx.size(); ++i) {
          double* dst = gt->data() + static_cast<std::size_t>(idx[i]) * d;
          const double* src = g.data() + i * d;
          for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
        }
      },
      "gather_rows");
}

Var dropout(Tape& tape, Var x, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return x;
  const auto& xv = tape.value(x);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(xv.size());
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    factor[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = xv[i] * factor[i];
  }
  return tape.record(
      std::move(out), {x},
      [x, factor = std::move(factor)](Tape& t, const Tensor& g) {
        if (auto* gx = t.grad_target(x)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * factor[i];
        }
      },
      "dropout");
}

Var conv1d_same(Tape& tape, Var x, Var kernels, Var bias) {
  const auto& xv = tape.value(x);
  const auto& kv = tape.value(kernels);
  const auto& bv = tape.value(bias);
  require_rank("conv1d_same", xv, 2, "input");
  require_rank("conv1d_same", kv, 3, "kernels");
  const auto len = xv.dim(0), din = xv.dim(1);
  const auto k = kv.dim(0), f = kv.dim(2);
  if (k % 2 == 0) throw ParameterError("conv1d_same: kernel size must be odd, got " + std::to_string(k));
  if (kv.dim(1) != din) shape_error("conv1d_same", "kernels " + shape_string(kv.shape()) + " vs input " + shape_string(xv.shape()));
  if (bv.size() != f) shape_error("conv1d_same", "bias must have " + std::to_string(f) + " entries");
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto width = k * din;

  // Unfold each window into one row so the convolution is a single GEMM.
  Tensor cols({len, width}, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      std::copy_n(xv.data() + static_cast<std::size_t>(src) * din, din, cols.data() + t * width + j * din);
    }
  }
  Tensor out({len, f});
  auto om = mat(out, len, f);
  om.noalias() = mat(cols, len, width) * mat(kv, width, f);
  om.rowwise() += vec(bv);
  return tape.record(
      std::move(out), {x, kernels, bias},
      [x, kernels, bias, cols = std::move(cols), len, din, k, f, width, pad](Tape& t, const Tensor& g) {
        const auto gm = mat(g, len, f);
        if (auto* gk = t.grad_target(kernels)) mat(*gk, width, f).noalias() += mat(cols, len, width).transpose() * gm;
        if (auto* gb = t.grad_target(bias)) vec(*gb) += gm.colwise().sum();
        if (auto* gx = t.grad_target(x)) {
          RowMat gcols = gm * mat(t.value(kernels), width, f).transpose();
          for (std::size_t tt = 0; tt < len; ++tt) {
            for (std::size_t j = 0; j < k; ++j) {
              const auto src = static_cast<std::ptrdiff_t>(tt) + static_cast<std::ptrdiff_t>(j) - pad;
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
              double* dst = gx->data() + static_cast<std::size_t>(src) * din;
              const double* from = gcols.data() + tt * width + j * din;
              for (std::size_t c = 0; c < din; ++c) dst[c] += from[c];
            }
          }
        }
      },
      "conv1d_same");
}

Var lstm_seq(Tape& tape, Var inputs, const LstmWeights& weights) {
  const auto& xv = tape.value(inputs);
  const auto& wx = tape.value(weights.w_input);
  const auto& wh = tape.value(weights.w_hidden);
  const auto& bv = tape.value(weights.bias);
  require_rank("lstm_seq", xv, 2, "inputs");
  require_rank("lstm_seq", wx, 2, "input weights");
  require_rank("lstm_seq", wh, 2, "hidden weights");
  const auto steps = xv.dim(0), d = xv.dim(1), h = wh.dim(0);
  if (wx.dim(0) != d || wx.dim(1) != 4 * h || wh.dim(1) != 4 * h || bv.size() != 4 * h) {
    shape_error("lstm_seq", "inconsistent shapes: inputs " + shape_string(xv.shape()) + ", w_input " +
                                shape_string(wx.shape()) + ", w_hidden " + shape_string(wh.shape()) + ", bias " +
                                shape_string(bv.shape()));
  }
  const auto hi = static_cast<Eigen::Index>(h);

  // Pre-activations for all steps from the inputs, then the recurrence.
  RowMat z = mat(xv, steps, d) * mat(wx, d, 4 * h);
  z.rowwise() += vec(bv);
  RowMat gates(steps, 4 * h);  // activated i, f, g, o
  RowMat cell(steps, h);
  RowMat cell_tanh(steps, h);
  Tensor out({steps, h});
  auto hm = mat(out, steps, h);
  const auto whm = mat(wh, h, 4 * h);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    Eigen::RowVectorXd pre = z.row(ti);
    if (t > 0) pre.noalias() += hm.row(ti - 1) * whm;
    for (Eigen::Index c = 0; c < 4 * hi; ++c) {
      const bool candidate = c >= 2 * hi && c < 3 * hi;
      gates(ti, c) = candidate ? std::tanh(pre(c)) : sigmoid_scalar(pre(c));
    }
    for (Eigen::Index c = 0; c < hi; ++c) {
      const double prev = t > 0 ? cell(ti - 1, c) : 0.0;
      cell(ti, c) = gates(ti, hi + c) * prev + gates(ti, c) * gates(ti, 2 * hi + c);
      cell_tanh(ti, c) = std::tanh(cell(ti, c));
      hm(ti, c) = gates(ti, 3 * hi + c) * cell_tanh(ti, c);
    }
  }
  const Var self = next_var(tape);
  return tape.record(
      std::move(out), {inputs, weights.w_input, weights.w_hidden, weights.bias},
      [inputs, weights, self, steps, d, h, hi, gates = std::move(gates), cell = std::move(cell),
       cell_tanh = std::move(cell_tanh)](Tape& t, const Tensor& g) {
        const auto gm = mat(g, steps, h);
        const auto hs = mat(t.value(self), steps, h);
        const auto whm = mat(t.value(weights.w_hidden), h, 4 * h);
        RowMat dz(steps, 4 * h);
        Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(hi);
        Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(hi);
        auto* gwh = t.grad_target(weights.w_hidden);
        for (std::size_t step = steps; step-- > 0;) {
          const auto ti = static_cast<Eigen::Index>(step);
          for (Eigen::Index c = 0; c < hi; ++c) {
            const double i_g = gates(ti, c), f_g = gates(ti, hi + c), c_g = gates(ti, 2 * hi + c),
                         o_g = gates(ti, 3 * hi + c);
            const double th = cell_tanh(ti, c);
            const double dh = gm(ti, c) + dh_next(c);
            const double dc = dh * o_g * (1.0 - th * th) + dc_next(c);
            const double prev = step > 0 ? cell(ti - 1, c) : 0.0;
            dz(ti, c) = dc * c_g * i_g * (1.0 - i_g);
            dz(ti, hi + c) = dc * prev * f_g * (1.0 - f_g);
            dz(ti, 2 * hi + c) = dc * i_g * (1.0 - c_g * c_g);
            dz(ti, 3 * hi + c) = dh * th * o_g * (1.0 - o_g);
            dc_next(c) = dc * f_g;
          }
          if (step > 0) {
            dh_next.noalias() = dz.row(ti) * whm.transpose();
            if (gwh != nullptr) mat(*gwh, h, 4 * h).noalias() += hs.row(ti - 1).transpose() * dz.row(ti);
          }
        }
        if (auto* gwx = t.grad_target(weights.w_input)) {
          mat(*gwx, d, 4 * h).noalias() += mat(t.value(inputs), steps, d).transpose() * dz;
        }
        if (auto* gb = t.grad_target(weights.bias)) vec(*gb) += dz.colwise().sum();
        if (auto* gx = t.grad_target(inputs)) {
          mat(*gx, steps, d).noalias() += dz * mat(t.value(weights.w_input), d, 4 * h).transpose();
        }
      },
      "lstm_seq");
}

Pooled attention_pool(Tape& tape, Var states, const AttentionWeights& weights, std::span<const std::uint8_t> mask) {
  const auto& sv = tape.value(states);
  const auto& wv = tape.value(weights.w);
  const auto& vv = tape.value(weights.v);
  require_rank("attention_pool", sv, 2, "states");
  require_rank("attention_pool", wv, 2, "projection");
  const auto n = sv.dim(0), h = sv.dim(1), a = wv.dim(1);
  if (wv.dim(0) != h || vv.size() != a) {
    shape_error("attention_pool", "states " + shape_string(sv.shape()) + ", w " + shape_string(wv.shape()) + ", v " +
                                      shape_string(vv.shape()));
  }
  require_mask("attention_pool", mask, n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) any = any || active(mask, i);
  if (!any) throw PoolingError("attention_pool: every position is masked");

  const auto sm = mat(sv, n, h);
  RowMat proj = (sm * mat(wv, h, a)).array().tanh();
  Eigen::VectorXd scores = proj * vec(vv).transpose();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (active(mask, i)) top = std::max(top, scores(static_cast<Eigen::Index>(i)));
  }
  std::vector<double> alpha(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active(mask, i)) continue;
    alpha[i] = std::exp(scores(static_cast<Eigen::Index>(i)) - top);
    z += alpha[i];
  }
  for (auto& w : alpha) w /= z;

  Tensor out({h}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] != 0.0) vec(out) += alpha[i] * sm.row(static_cast<Eigen::Index>(i));
  }
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  Var output = tape.record(
      std::move(out), {states, weights.w, weights.v},
      [states, weights, n, h, a, alpha, m = std::move(m), proj = std::move(proj)](Tape& t, const Tensor& g) {
        const auto sm = mat(t.value(states), n, h);
        const auto gv = vec(g);
        // d loss / d alpha_i, then through the softmax.
        Eigen::VectorXd dalpha = sm * gv.transpose();
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += alpha[i] * dalpha(static_cast<Eigen::Index>(i));
        Eigen::VectorXd dscore(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          dscore(ii) = active(m, i) ? alpha[i] * (dalpha(ii) - mean) : 0.0;
        }
        if (auto* gvv = t.grad_target(weights.v)) vec(*gvv) += (proj.transpose() * dscore).transpose();
        RowMat dpre = (dscore * vec(t.value(weights.v))).array() * (1.0 - proj.array().square());
        if (auto* gw = t.grad_target(weights.w)) mat(*gw, h, a).noalias() += sm.transpose() * dpre;
        if (auto* gs = t.grad_target(states)) {
          auto gsm = mat(*gs, n, h);
          gsm.noalias() += dpre * mat(t.value(weights.w), h, a).transpose();
          for (std::size_t i = 0; i < n; ++i) {
            if (alpha[i] != 0.0) gsm.row(static_cast<Eigen::Index>(i)) += alpha[i] * gv;
          }
        }
      },
      "attention_pool");
  return Pooled{output, std::move(alpha)};
}

Var mean_pool(Tape& tape, Var states, std::span<const std::uint8_t> mask) {
  const auto& sv = tape.value(states);
  require_rank("mean_pool", sv, 2, "states");
  const auto n = sv.dim(0), h = sv.dim(1);
  require_mask("mean_pool", mask, n);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += active(mask, i) ? 1 : 0;
  if (count == 0) throw PoolingError("mean_pool: every position is masked");
  const double inv = 1.0 / static_cast<double>(count);
  Tensor out({h}, 0.0);
  const auto sm = mat(sv, n, h);
  for (std::size_t i = 0; i < n; ++i) {
    if (active(mask, i)) vec(out) += inv * sm.row(static_cast<Eigen::Index>(i));
  }
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return tape.record(
      std::move(out), {states},
      [states, n, h, inv, m = std::move(m)](Tape& t, const Tensor& g) {
        auto* gs = t.grad_target(states);
        if (gs == nullptr) return;
        auto gsm = mat(*gs, n, h);
        for (std::size_t i = 0; i < n; ++i) {
          if (active(m, i)) gsm.row(static_cast<Eigen::Index>(i)) += inv * vec(g);
        }
      },
      "mean_pool");
}

Var stack_rows(Tape& tape, std::span<const Var> rows) {
  if (rows.empty()) shape_error("stack_rows", "nothing to stack");
  const auto width = tape.value(rows[0]).size();
  for (auto r : rows) {
    if (tape.value(r).size() != width) shape_error("stack_rows", "rows differ in length");
  }
  return concat_rows(tape, rows);
}

Var concat_rows(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) shape_error("concat_rows", "nothing to concatenate");
  const auto width_of = [&](const Tensor& t) { return t.rank() == 1 ? t.size() : t.cols(); };
  const auto width = width_of(tape.value(parts[0]));
  std::vector<std::size_t> offsets;
  std::size_t rows = 0;
  for (auto p : parts) {
    const auto& pv = tape.value(p);
    if (pv.rank() > 2 || width_of(pv) != width) {
      shape_error("concat_rows", "part " + shape_string(pv.shape()) + " does not have " + std::to_string(width) + " columns");
    }
    offsets.push_back(rows * width);
    rows += pv.size() / width;
  }
  Tensor out({rows, width});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& pv = tape.value(parts[i]);
    std::copy_n(pv.data(), pv.size(), out.data() + offsets[i]);
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return tape.record(
      std::move(out), parts,
      [ps, offsets = std::move(offsets)](Tape& t, const Tensor& g) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
          if (auto* gp = t.grad_target(ps[i])) {
            const double* src = g.data() + offsets[i];
            for (std::size_t c = 0; c < gp->size(); ++c) (*gp)[c] += src[c];
          }
        }
      },
      "concat_rows");
}

Var column(Tape& tape, Var x, std::size_t j) {
  const auto& xv = tape.value(x);
  require_rank("column", xv, 2, "input");
  const auto n = xv.dim(0), m = xv.dim(1);
  if (j >= m) shape_error("column", "column " + std::to_string(j) + " of " + shape_string(xv.shape()));
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i * m + j];
  return tape.record(
      std::move(out), {x},
      [x, n, m, j](Tape& t, const Tensor& g) {
        if (auto* gx = t.grad_target(x)) {
          for (std::size_t i = 0; i < n; ++i) (*gx)[i * m + j] += g[i];
        }
      },
      "column");
}

Var mse(Tape& tape, Var pred, const Tensor& target, const Tensor* mask) {
  const auto& pv = tape.value(pred);
  if (!pv.same_shape(target)) {
    shape_error("mse", "prediction " + shape_string(pv.shape()) + " vs target " + shape_string(target.shape()));
  }
  if (mask != nullptr && !mask->same_shape(target)) {
    shape_error("mse", "mask " + shape_string(mask->shape()) + " vs target " + shape_string(target.shape()));
  }
  std::vector<double> weight(pv.size(), 1.0);
  std::size_t count = pv.size();
  if (mask != nullptr) {
    count = 0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      weight[i] = (*mask)[i] != 0.0 ? 1.0 : 0.0;
      count += (*mask)[i] != 0.0 ? 1 : 0;
    }
  }
  if (count == 0) return tape.constant(Tensor::scalar(0.0));
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<double> diff(pv.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    diff[i] = weight[i] * (pv[i] - target[i]);
    loss += diff[i] * diff[i];
  }
  return tape.record(
      Tensor::scalar(loss * inv), {pred},
      [pred, inv, diff = std::move(diff)](Tape& t, const Tensor& g) {
        if (auto* gp = t.grad_target(pred)) {
          for (std::size_t i = 0; i < diff.size(); ++i) (*gp)[i] += g[0] * 2.0 * inv * diff[i];
        }
      },
      "mse");
}

}  // namespace gazeaeg::num
