#pragma once

// Independent numerical oracles for the unit and acceptance tests. They use
// only plain fixed-step schemes, so they share no code with the library.

#include <cmath>
#include <algorithm>
#include <functional>

namespace oracle {

/// Classical RK4 for dx/dt = c(x) with a fixed number of steps.
inline double rk4_flow(const std::function<double(double)>& c, double x0, double t, int steps = 20000) {
    const double h = t / steps;
    double x = x0;
    for (int i = 0; i < steps; ++i) {
        const double k1 = c(x);
        const double k2 = c(x + 0.5 * h * k1);
        const double k3 = c(x + 0.5 * h * k2);
        const double k4 = c(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Two-sample Kolmogorov-Smirnov statistic.
template <class V>
double ks_statistic(V a, V b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

/// KS critical value at level alpha = 0.001 for samples of sizes n and m.
inline double ks_critical(std::size_t n, std::size_t m) {
    return 1.949 * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

}  // namespace oracle
