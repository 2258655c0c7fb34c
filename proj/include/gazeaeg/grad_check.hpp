#pragma once

#include <functional>

#include "gazeaeg/tape.hpp"

namespace gazeaeg::num {

// Builds a scalar on the given tape from the differentiable input.
using ScalarFn = std::function<Var(Tape&, Var)>;
// Builds a scalar on the given tape from parameters in a store.
using ParamFn = std::function<Var(Tape&, const ParamStore&)>;

// Largest elementwise |a - n| / max(1e-8, |a| + |n|) between the gradient
// from backward() (a) and central differences with step eps (n).
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// Same comparison for every entry of every tensor in `params`.
double grad_check(const ParamFn& f, const ParamStore& params, double eps = 1e-5);

double relative_error(double analytic, double numeric);

}  // namespace gazeaeg::num
