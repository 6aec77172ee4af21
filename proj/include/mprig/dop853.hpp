#pragma once

// Dormand-Prince 8(5,3) explicit Runge-Kutta stepper with PI step-size control
// and the 7th-order dense output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>

#include "mprig/detail/dop853_tableau.hpp"
#include "mprig/error.hpp"

namespace mprig {

struct Dop853Options {
  double rtol = 1e-10;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 selects automatically
  double max_step = std::numeric_limits<double>::infinity();
};

/// Continuous extension over one accepted step [t0, t1].
template <std::size_t N>
struct DenseSegment {
  using State = std::array<double, N>;
  double t0 = 0.0;
  double t1 = 0.0;
  State y0{};
  std::array<State, detail::dop853::kInterpolatorPower> F{};

  State operator()(double t) const {
    const double h = t1 - t0;
    const double x = h == 0.0 ? 0.0 : (t - t0) / h;
    State y{};
    for (int i = 0; i < detail::dop853::kInterpolatorPower; ++i) {
      const State& f = F[detail::dop853::kInterpolatorPower - 1 - i];
      const double w = (i % 2 == 0) ? x : 1.0 - x;
      for (std::size_t n = 0; n < N; ++n) y[n] = (y[n] + f[n]) * w;
    }
    for (std::size_t n = 0; n < N; ++n) y[n] += y0[n];
    return y;
  }
};

template <std::size_t N>
class Dop853 {
 public:
  using State = std::array<double, N>;
  using Rhs = std::function<State(double, const State&)>;

  Dop853(Rhs f, double t0, const State& y0, Dop853Options opts = {})
      : f_(std::move(f)), opts_(opts), t_(t0), t_old_(t0), y_(y0), y_old_(y0) {
    f_cur_ = f_(t_, y_);
    ++evaluations_;
    h_ = opts_.initial_step > 0.0 ? opts_.initial_step : initial_step();
    h_ = std::min(h_, opts_.max_step);
  }

  double t() const { return t_; }
  double t_previous() const { return t_old_; }
  const State& y() const { return y_; }
  const State& y_previous() const { return y_old_; }
  const State& derivative() const { return f_cur_; }
  double last_step() const { return t_ - t_old_; }
  long evaluations() const { return evaluations_; }
  long rejected() const { return rejected_; }

  /// Advances by one accepted step, never past t_bound.
  void step(double t_bound) {
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_));
    bool rejected_once = false;
    for (;;) {
      double h = std::min(h_, opts_.max_step);
      bool last = false;
      if (t_ + h >= t_bound) {
        h = t_bound - t_;
        last = true;
      }
      if (!(h > min_step)) {
        std::ostringstream os;
        os << "step size " << h << " underflow at t=" << t_;
        throw Error(ErrorCode::kStepUnderflow, os.str());
      }
      State y_new;
      State f_new;
      const double err = attempt(h, y_new, f_new);
      if (err <= 1.0) {
        // PI controller in the form used by DOP853.
        const double fac11 = std::pow(err, kExpo1);
        double fac = fac11 / std::pow(facold_, kBeta);
        fac = std::max(kFacc2, std::min(kFacc1, fac / kSafety));
        double h_next = h / fac;
        if (rejected_once) h_next = std::min(h_next, h);
        facold_ = std::max(err, 1e-4);
        t_old_ = t_;
        y_old_ = y_;
        f_old_ = f_cur_;
        K_last_ = K_;
        t_ = last ? t_bound : t_ + h;
        y_ = y_new;
        f_cur_ = f_new;
        h_ = h_next;
        return;
      }
      ++rejected_;
      rejected_once = true;
      const double fac11 = std::pow(err, kExpo1);
      h_ = h / std::min(kFacc1, fac11 / kSafety);
    }
  }

  /// Dense output of the last accepted step. Costs three extra evaluations.
  DenseSegment<N> dense() {
    namespace tb = detail::dop853;
    const double h = t_ - t_old_;
    std::array<State, tb::kStagesExtended> K{};
    for (int s = 0; s <= tb::kStages; ++s) K[s] = K_last_[s];
    for (int s = tb::kStages + 1; s < tb::kStagesExtended; ++s) {
      State ys = y_old_;
      for (int j = 0; j < s; ++j) {
        const double a = tb::A[s][j];
        if (a == 0.0) continue;
        for (std::size_t n = 0; n < N; ++n) ys[n] += h * a * K[j][n];
      }
      K[s] = f_(t_old_ + tb::C[s] * h, ys);
      ++evaluations_;
    }
    DenseSegment<N> seg;
    seg.t0 = t_old_;
    seg.t1 = t_;
    seg.y0 = y_old_;
    for (std::size_t n = 0; n < N; ++n) {
      const double dy = y_[n] - y_old_[n];
      seg.F[0][n] = dy;
      seg.F[1][n] = h * f_old_[n] - dy;
      seg.F[2][n] = 2.0 * dy - h * (f_cur_[n] + f_old_[n]);
    }
    for (int r = 0; r < 4; ++r) {
      for (std::size_t n = 0; n < N; ++n) {
        double s = 0.0;
        for (int j = 0; j < tb::kStagesExtended; ++j) s += tb::D[r][j] * K[j][n];
        seg.F[3 + r][n] = h * s;
      }
    }
    return seg;
  }

  /// One uncontrolled step of size h from (t0, y0), used to polish events.
  static State single_step(const Rhs& f, double t0, const State& y0, double h) {
    namespace tb = detail::dop853;
    std::array<State, tb::kStages> K{};
    K[0] = f(t0, y0);
    for (int s = 1; s < tb::kStages; ++s) {
      State ys = y0;
      for (int j = 0; j < s; ++j) {
        const double a = tb::A[s][j];
        if (a == 0.0) continue;
        for (std::size_t n = 0; n < N; ++n) ys[n] += h * a * K[j][n];
      }
      K[s] = f(t0 + tb::C[s] * h, ys);
    }
    State y = y0;
    for (int j = 0; j < tb::kStages; ++j) {
      const double b = tb::A[tb::kStages][j];
      if (b == 0.0) continue;
      for (std::size_t n = 0; n < N; ++n) y[n] += h * b * K[j][n];
    }
    return y;
  }

 private:
  static constexpr double kBeta = 0.04;
  static constexpr double kExpo1 = 1.0 / 8.0 - kBeta * 0.2;
  static constexpr double kSafety = 0.9;
  static constexpr double kFacc1 = 1.0 / 0.333;  // largest shrink divisor
  static constexpr double kFacc2 = 1.0 / 6.0;    // largest growth divisor

  double scale(double a, double b) const {
    return opts_.atol + opts_.rtol * std::max(std::abs(a), std::abs(b));
  }

  double initial_step() {
    double d0 = 0.0;
    double d1 = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double sc = scale(y_[n], y_[n]);
      d0 += (y_[n] / sc) * (y_[n] / sc);
      d1 += (f_cur_[n] / sc) * (f_cur_[n] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    State y1;
    for (std::size_t n = 0; n < N; ++n) y1[n] = y_[n] + h0 * f_cur_[n];
    const State f1 = f_(t_ + h0, y1);
    ++evaluations_;
    double d2 = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double sc = scale(y_[n], y_[n]);
      d2 += ((f1[n] - f_cur_[n]) / sc) * ((f1[n] - f_cur_[n]) / sc);
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15)
                          ? std::max(1e-6, h0 * 1e-3)
                          : std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    return std::min(100.0 * h0, h1);
  }

  // Returns the scaled error norm of a trial step.
  double attempt(double h, State& y_new, State& f_new) {
    namespace tb = detail::dop853;
    K_[0] = f_cur_;
    for (int s = 1; s < tb::kStages; ++s) {
      State ys = y_;
      for (int j = 0; j < s; ++j) {
        const double a = tb::A[s][j];
        if (a == 0.0) continue;
        for (std::size_t n = 0; n < N; ++n) ys[n] += h * a * K_[j][n];
      }
      K_[s] = f_(t_ + tb::C[s] * h, ys);
      ++evaluations_;
    }
    y_new = y_;
    for (int j = 0; j < tb::kStages; ++j) {
      const double b = tb::A[tb::kStages][j];
      if (b == 0.0) continue;
      for (std::size_t n = 0; n < N; ++n) y_new[n] += h * b * K_[j][n];
    }
    f_new = f_(t_ + h, y_new);
    ++evaluations_;
    K_[tb::kStages] = f_new;

    double err5 = 0.0;
    double err3 = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      double e5 = 0.0;
      double e3 = 0.0;
      for (int j = 0; j <= tb::kStages; ++j) {
        e5 += tb::E5[j] * K_[j][n];
        e3 += tb::E3[j] * K_[j][n];
      }
      const double sc = scale(y_[n], y_new[n]);
      err5 += (e5 / sc) * (e5 / sc);
      err3 += (e3 / sc) * (e3 / sc);
    }
    if (err5 == 0.0 && err3 == 0.0) return 0.0;
    const double denom = err5 + 0.01 * err3;
    const double err = std::abs(h) * err5 / std::sqrt(denom * static_cast<double>(N));
    return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
  }

  Rhs f_;
  Dop853Options opts_;
  double t_;
  double t_old_;
  State y_;
  State y_old_;
  State f_cur_{};
  State f_old_{};
  double h_ = 0.0;
  double facold_ = 1e-4;
  std::array<State, detail::dop853::kStages + 1> K_{};
  std::array<State, detail::dop853::kStages + 1> K_last_{};
  long evaluations_ = 0;
  long rejected_ = 0;
};

}  // namespace mprig
