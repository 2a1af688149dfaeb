#pragma once

#include "las/tape.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace las {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Compares tape gradients of a scalar-valued function against central
/// finite differences, parameter by parameter. 64-bit only; `f` must be a
/// deterministic function of the leaf values it is handed.
///
/// `f` receives a fresh tape plus one leaf Var per input matrix and returns
/// the scalar output Var.
inline GradCheckReport grad_check(
    const std::function<Var(Tape<double>&, const std::vector<Var>&)>& f,
    const std::vector<Eigen::MatrixXd>& inputs,
    const std::vector<std::string>& names, double eps = 1e-5,
    double tol = 1e-6) {
  auto eval = [&](const std::vector<Eigen::MatrixXd>& xs) {
    Tape<double> tape;
    std::vector<Var> vars;
    vars.reserve(xs.size());
    for (const auto& x : xs) vars.push_back(tape.input(x));
    Var out = f(tape, vars);
    const double v = tape.value(out)(0, 0);
    if (!std::isfinite(v)) throw NumericError("grad_check: f is not finite");
    return v;
  };

  // Analytic gradients from one taped pass.
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.input(x));
  Var out = f(tape, vars);
  tape.backward(out);

  GradCheckReport report;
  report.tol = tol;
  std::vector<Eigen::MatrixXd> xs = inputs;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const Eigen::MatrixXd& analytic = tape.grad(vars[p]);
    GradCheckEntry entry;
    entry.name = p < names.size() ? names[p] : "input" + std::to_string(p);
    for (Eigen::Index i = 0; i < xs[p].size(); ++i) {
      const double orig = xs[p](i);
      xs[p](i) = orig + eps;
      const double fp = eval(xs);
      xs[p](i) = orig - eps;
      const double fm = eval(xs);
      xs[p](i) = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic(i);
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      entry.max_rel_err =
          std::max(entry.max_rel_err, std::abs(a - numeric) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_err <= tol;
  return report;
}

}  // namespace las
