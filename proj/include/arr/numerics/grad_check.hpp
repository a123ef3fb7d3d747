#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "arr/numerics/graph.hpp"

namespace arr {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "<name>[index]" of the worst coordinate
};

/// Relative error with an absolute floor in the denominator, so coordinates
/// whose true derivative is ~0 are judged on absolute error.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace detail {

inline void record(GradCheckResult& r, double analytic, double numeric, const std::string& where) {
  const double rel = relative_error(analytic, numeric);
  r.max_abs_error = std::max(r.max_abs_error, std::abs(analytic - numeric));
  if (rel > r.max_rel_error || r.coordinates == 0) {
    r.max_rel_error = std::max(r.max_rel_error, rel);
    r.worst = where;
  }
  ++r.coordinates;
}

}  // namespace detail

/// Compares the analytic gradient of a scalar function `f(graph, x)` with
/// central differences (f(x+h) - f(x-h)) / 2h at every coordinate of x.
template <class F>
GradCheckResult grad_check(F&& f, const Tensor<double>& x, double h = 1e-5) {
  std::vector<double> analytic;
  {
    Graph<double> g;
    Var<double> xv = g.input(x);
    Var<double> loss = f(g, xv);
    g.backward(loss);
    analytic = g.grad(xv).storage();
  }
  auto eval = [&](const Tensor<double>& at) {
    Graph<double> g;
    return f(g, g.input(at)).value()[0];
  };
  GradCheckResult result;
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = eval(probe);
    probe[i] = orig - h;
    const double fm = eval(probe);
    probe[i] = orig;
    detail::record(result, analytic[i], (fp - fm) / (2.0 * h), "x[" + std::to_string(i) + "]");
  }
  return result;
}

/// Same check over every coordinate of a parameter list; `f(graph)` must
/// bind the parameters it uses with Graph::param.
template <class F>
GradCheckResult grad_check_params(F&& f, const ParameterList<double>& params, double h = 1e-5) {
  zero_grads(params);
  {
    Graph<double> g;
    Var<double> loss = f(g);
    g.backward(loss);
    g.accumulate_param_grads();
  }
  auto eval = [&] {
    Graph<double> g;
    return f(g).value()[0];
  };
  GradCheckResult result;
  for (const auto& np : params) {
    Tensor<double>& value = np.param->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      value[i] = orig + h;
      const double fp = eval();
      value[i] = orig - h;
      const double fm = eval();
      value[i] = orig;
      detail::record(result, np.param->grad[i], (fp - fm) / (2.0 * h), np.name + "[" + std::to_string(i) + "]");
    }
  }
  return result;
}

}  // namespace arr
