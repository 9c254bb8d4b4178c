#pragma once

// Explicit Runge-Kutta integration of autonomous systems dx/dt = f(x):
// classical fixed-step RK4 and adaptive Dormand-Prince 5(4). Trajectories keep
// f at every node so they can be interpolated with cubic Hermite polynomials.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"

namespace poissonkit {

enum class Method { RK4, RK45 };

inline std::string to_string(Method m) { return m == Method::RK4 ? "rk4" : "rk45"; }

struct IntegratorConfig {
  Method method = Method::RK4;
  double step = 1e-3;      // RK4
  double abs_tol = 1e-9;   // RK45
  double rel_tol = 1e-9;   // RK45
  std::size_t max_steps = 50'000'000;

  static IntegratorConfig rk4(double h) { return {Method::RK4, h, 1e-9, 1e-9}; }
  static IntegratorConfig rk45(double atol, double rtol) { return {Method::RK45, 1e-3, atol, rtol}; }

  void validate() const {
    if (method == Method::RK4 && !(step > 0.0)) throw Error("IntegratorConfig: step must be positive");
    if (method == Method::RK45 && !(abs_tol > 0.0 && rel_tol > 0.0))
      throw Error("IntegratorConfig: tolerances must be positive");
    if (max_steps < 1) throw Error("IntegratorConfig: max_steps must be at least 1");
  }
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time, std::vector<double> state)
      : Error(what + " at t = " + std::to_string(time)), time_(time), state_(std::move(state)) {}
  double time() const noexcept { return time_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> derivatives;
  Method method = Method::RK4;
  double step = 0.0;
  double abs_tol = 0.0;
  double rel_tol = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;

  std::size_t size() const noexcept { return times.size(); }
  std::size_t dim() const noexcept { return states.empty() ? 0 : states.front().size(); }
  const std::vector<double>& back() const { return states.back(); }

  /// Cubic Hermite interpolation between the bracketing nodes.
  std::vector<double> at(double t) const {
    if (times.empty()) throw Error("Trajectory::at: empty trajectory");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t m = static_cast<std::size_t>(it - times.begin()) - 1;
    const double t0 = times[m], h = times[m + 1] - t0;
    const double s = (t - t0) / h, s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    std::vector<double> x(dim());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = h00 * states[m][i] + h10 * h * derivatives[m][i] + h01 * states[m + 1][i] +
             h11 * h * derivatives[m + 1][i];
    return x;
  }
};

using VectorField = std::function<void(std::span<const double> x, std::span<double> dx)>;
/// Called after every accepted step; throw to abort the integration.
using StepGuard = std::function<void(double t, std::span<const double> x)>;

namespace detail {

inline double rms_scaled(std::span<const double> v, std::span<const double> a, std::span<const double> b,
                         double atol, double rtol) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    s += (v[i] / sc) * (v[i] / sc);
  }
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

inline void eval_field(const VectorField& f, double t, std::span<const double> x, std::span<double> dx) {
  try {
    f(x, dx);
  } catch (const DomainError& e) {
    throw IntegrationError(std::string("evaluation failed: ") + e.what(), t, {x.begin(), x.end()});
  }
  for (double v : dx)
    if (!std::isfinite(v)) throw IntegrationError("non-finite derivative", t, {x.begin(), x.end()});
}

class Recorder {
 public:
  Recorder(Trajectory& tr, const StepGuard& guard) : tr_(tr), guard_(guard) {}

  void push(double t, const std::vector<double>& x, const std::vector<double>& dx) {
    for (double v : x)
      if (!std::isfinite(v)) throw IntegrationError("non-finite state", t, x);
    tr_.times.push_back(t);
    tr_.states.push_back(x);
    tr_.derivatives.push_back(dx);
    if (guard_) guard_(t, x);
  }

 private:
  Trajectory& tr_;
  const StepGuard& guard_;
};

inline void axpy_stages(std::vector<double>& out, std::span<const double> x, double h,
                        std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (const auto& [c, k] : terms) s += c * (*k)[i];
    out[i] = x[i] + h * s;
  }
}

}  // namespace detail

inline Trajectory integrate(const VectorField& f, std::vector<double> x0, double t_end, const IntegratorConfig& cfg,
                            const StepGuard& guard = {}) {
  cfg.validate();
  if (!(t_end > 0.0)) throw Error("integrate: t_end must be positive");
  const std::size_t n = x0.size();
  Trajectory tr;
  tr.method = cfg.method;
  tr.step = cfg.method == Method::RK4 ? cfg.step : 0.0;
  tr.abs_tol = cfg.method == Method::RK45 ? cfg.abs_tol : 0.0;
  tr.rel_tol = cfg.method == Method::RK45 ? cfg.rel_tol : 0.0;
  detail::Recorder rec(tr, guard);

  std::vector<double> x = std::move(x0), f0(n);
  detail::eval_field(f, 0.0, x, f0);
  rec.push(0.0, x, f0);

  std::vector<double> k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), xn(n);

  if (cfg.method == Method::RK4) {
    const double h = cfg.step;
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / h * (1.0 - 1e-12)));
    if (steps > cfg.max_steps) throw IntegrationError("step-count exhaustion", 0.0, x);
    double t = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const double t1 = s + 1 == steps ? t_end : static_cast<double>(s + 1) * h;
      const double hs = t1 - t;
      detail::axpy_stages(tmp, x, hs, {{0.5, &f0}});
      detail::eval_field(f, t + hs / 2, tmp, k2);
      detail::axpy_stages(tmp, x, hs, {{0.5, &k2}});
      detail::eval_field(f, t + hs / 2, tmp, k3);
      detail::axpy_stages(tmp, x, hs, {{1.0, &k3}});
      detail::eval_field(f, t1, tmp, k4);
      detail::axpy_stages(xn, x, hs, {{1.0 / 6, &f0}, {1.0 / 3, &k2}, {1.0 / 3, &k3}, {1.0 / 6, &k4}});
      x.swap(xn);
      t = t1;
      detail::eval_field(f, t, x, f0);
      rec.push(t, x, f0);
      ++tr.accepted;
    }
    return tr;
  }

  // Dormand-Prince 5(4), first-same-as-last.
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double atol = cfg.abs_tol, rtol = cfg.rel_tol;
  double h;
  {
    const double d0 = detail::rms_scaled(x, x, x, atol, rtol);
    const double d1 = detail::rms_scaled(f0, x, x, atol, rtol);
    const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    detail::axpy_stages(tmp, x, h0, {{1.0, &f0}});
    detail::eval_field(f, h0, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) k3[i] = (k2[i] - f0[i]) / h0;
    const double d2 = detail::rms_scaled(k3, x, x, atol, rtol);
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5);
    h = std::min(100 * h0, h1);
  }

  double t = 0.0;
  std::size_t attempts = 0;
  bool last_rejected = false;
  std::vector<double> err(n);
  while (t < t_end) {
    if (++attempts > cfg.max_steps) throw IntegrationError("step-count exhaustion", t, x);
    const bool final_step = t + h >= t_end;
    const double hs = final_step ? t_end - t : h;
    detail::axpy_stages(tmp, x, hs, {{a21, &f0}});
    detail::eval_field(f, t, tmp, k2);
    detail::axpy_stages(tmp, x, hs, {{a31, &f0}, {a32, &k2}});
    detail::eval_field(f, t, tmp, k3);
    detail::axpy_stages(tmp, x, hs, {{a41, &f0}, {a42, &k2}, {a43, &k3}});
    detail::eval_field(f, t, tmp, k4);
    detail::axpy_stages(tmp, x, hs, {{a51, &f0}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
    detail::eval_field(f, t, tmp, k5);
    detail::axpy_stages(tmp, x, hs, {{a61, &f0}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
    detail::eval_field(f, t, tmp, k6);
    detail::axpy_stages(xn, x, hs, {{b1, &f0}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    detail::eval_field(f, t + hs, xn, k7);
    for (std::size_t i = 0; i < n; ++i)
      err[i] = hs * (e1 * f0[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double en = detail::rms_scaled(err, x, xn, atol, rtol);
    if (en <= 1.0) {
      t = final_step ? t_end : t + hs;
      x.swap(xn);
      f0.swap(k7);
      rec.push(t, x, f0);
      ++tr.accepted;
      double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h = hs * fac;
      last_rejected = false;
    } else {
      ++tr.rejected;
      h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) throw IntegrationError("step size underflow", t, x);
  }
  return tr;
}

/// dx/dt given componentwise by expressions over vars.
class ExprField {
 public:
  ExprField(std::vector<Expr> components, const VariableList& vars) {
    if (components.size() != vars.size()) throw Error("ExprField: need one component per variable");
    comps_.reserve(components.size());
    for (const Expr& c : components) comps_.push_back(bind_to(c, vars));
  }

  void operator()(std::span<const double> x, std::span<double> dx) const {
    for (std::size_t i = 0; i < comps_.size(); ++i) dx[i] = evaluate(comps_[i], x);
  }

  const std::vector<Expr>& components() const noexcept { return comps_; }

 private:
  std::vector<Expr> comps_;
};

/// Integrates dx/dt = rhs(x) from x0 (whose names fix the variable order) to t_end.
inline Trajectory integrate(const std::vector<Expr>& rhs, const Point& x0, double t_end, const IntegratorConfig& cfg,
                            const StepGuard& guard = {}) {
  const ExprField field(rhs, x0.names());
  return integrate(VectorField(field), std::vector<double>(x0.values().begin(), x0.values().end()), t_end, cfg,
                   guard);
}

/// max over nodes of |f(x_m) - f(x_0)|.
inline double conserved_drift(const Trajectory& traj, const Expr& f, const VariableList& vars) {
  if (traj.size() == 0) return 0.0;
  const Expr fb = bind_to(f, vars);
  const double f0 = evaluate(fb, traj.states.front());
  double drift = 0.0;
  for (const auto& x : traj.states) drift = std::max(drift, std::abs(evaluate(fb, x) - f0));
  return drift;
}

/// Header "t, x1, ..., xn", one row per accepted step, 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& traj, const VariableList& vars) {
  os << 't';
  for (const std::string& v : vars) os << ", " << v;
  os << '\n';
  char buf[40];
  for (std::size_t m = 0; m < traj.size(); ++m) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[m]);
    os << buf;
    for (double v : traj.states[m]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ", " << buf;
    }
    os << '\n';
  }
}

}  // namespace poissonkit
