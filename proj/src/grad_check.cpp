#include "gazeaeg/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace gazeaeg::num {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  Tensor analytic;
  {
    Tape tape;
    const Var in = tape.leaf(x);
    const Var out = f(tape, in);
    tape.backward(out);
    const Tensor* g = tape.grad(in);
    analytic = g != nullptr ? *g : Tensor(x.shape(), 0.0);
  }
  auto eval = [&](const Tensor& point) {
    Tape tape;
    return tape.value(f(tape, tape.leaf(point))).item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

double grad_check(const ParamFn& f, const ParamStore& params, double eps) {
  Gradients grads(params);
  {
    Tape tape(&grads);
    tape.backward(f(tape, params));
  }
  ParamStore probe = params;
  auto eval = [&]() {
    Tape tape;
    return tape.value(f(tape, probe)).item();
  };
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& values = probe.value(p);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = eval();
      values[i] = orig - eps;
      const double down = eval();
      values[i] = orig;
      worst = std::max(worst, relative_error(grads[p][i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace gazeaeg::num
