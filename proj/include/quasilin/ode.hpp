#pragma once

// Adaptive Dormand-Prince 5(4) for Eigen vector states (real or complex),
// reporting the solution exactly at the requested output times.

#include "quasilin/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace quasilin {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double min_step_factor = 1e-14;  // step underflow below this * max(1, |t|)
    std::size_t max_steps = 50'000'000;
};

namespace detail {

template <class Vec>
double scaled_error(const Vec& err, const Vec& y0, const Vec& y1, const OdeOptions& opt) {
    const auto scale = opt.atol + opt.rtol * y0.array().abs().max(y1.array().abs());
    return std::sqrt((err.array().abs() / scale).square().mean());
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t_grid[0] and calls observe(i, t_grid[i], y)
/// at every grid point (including the first). post_step(y) runs after each
/// accepted step and may project the state (e.g. symmetrize).
template <class Vec, class Rhs, class Observer, class PostStep>
void integrate_dopri5(Rhs&& rhs, Vec y, std::span<const double> t_grid, const OdeOptions& opt, Observer&& observe,
                      PostStep&& post_step) {
    if (t_grid.empty()) return;
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("integrate_dopri5: time grid must increase");
    }
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = t_grid[0];
    observe(std::size_t{0}, t, static_cast<const Vec&>(y));
    if (t_grid.size() == 1) return;

    Vec k1 = rhs(t, y);
    double h;
    {
        const double span = t_grid.back() - t;
        const double d0 = std::sqrt((y.array().abs() / (opt.atol + opt.rtol * y.array().abs())).square().mean());
        const double d1 = std::sqrt((k1.array().abs() / (opt.atol + opt.rtol * y.array().abs())).square().mean());
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * std::max(1.0, span) : 0.01 * d0 / d1;
        h = std::min(h, span);
    }

    std::size_t steps = 0;
    for (std::size_t next = 1; next < t_grid.size(); ++next) {
        const double target = t_grid[next];
        while (t < target) {
            if (++steps > opt.max_steps) throw IntegrationError("integrate_dopri5: step budget exhausted");
            // h is the controller's proposal; step is clipped to land on the grid.
            double step = h;
            bool last = false;
            if (t + step >= target || target - (t + step) < 1e-12 * std::max(1.0, std::abs(target))) {
                step = target - t;
                last = true;
            }
            if (step < opt.min_step_factor * std::max(1.0, std::abs(t))) {
                throw IntegrationError("integrate_dopri5: step size underflow");
            }
            const Vec k2 = rhs(t + c2 * step, (y + step * (a21 * k1)).eval());
            const Vec k3 = rhs(t + c3 * step, (y + step * (a31 * k1 + a32 * k2)).eval());
            const Vec k4 = rhs(t + c4 * step, (y + step * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
            const Vec k5 = rhs(t + c5 * step, (y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
            const Vec k6 =
                rhs(t + step, (y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
            Vec y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Vec k7 = rhs(t + step, y_new);
            const Vec err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double en = detail::scaled_error(err, y, y_new, opt);
            if (!std::isfinite(en)) {
                h = step * 0.2;
                continue;
            }
            if (en <= 1.0) {
                t = last ? target : t + step;
                y = std::move(y_new);
                post_step(y);
                k1 = rhs(t, y);
                const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                h = last ? std::max(h, step * fac) : step * fac;
            } else {
                h = step * std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
            }
        }
        observe(next, t, static_cast<const Vec&>(y));
    }
}

template <class Vec, class Rhs, class Observer>
void integrate_dopri5(Rhs&& rhs, Vec y, std::span<const double> t_grid, const OdeOptions& opt, Observer&& observe) {
    integrate_dopri5(std::forward<Rhs>(rhs), std::move(y), t_grid, opt, std::forward<Observer>(observe),
                     [](Vec&) {});
}

}  // namespace quasilin
