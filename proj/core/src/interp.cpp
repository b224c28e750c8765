#include "gfrag/interp.hpp"

#include <algorithm>
#include <cmath>

#include "gfrag/errors.hpp"

namespace gfrag {

MonotoneCubic::MonotoneCubic(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    const std::size_t n = knots_.size();
    if (n == 0 || values_.size() != n) throw DomainError("MonotoneCubic: knots and values must be non-empty and of equal size");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(knots_[i] > knots_[i - 1])) throw DomainError("MonotoneCubic: knots must be strictly increasing");
    }
    slopes_.assign(n, 0.0);
    if (n == 1) return;

    std::vector<double> secant(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        secant[i] = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
    }
    slopes_[0] = secant[0];
    slopes_[n - 1] = secant[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d0 = secant[i - 1];
        const double d1 = secant[i];
        if (d0 * d1 <= 0.0) {
            slopes_[i] = 0.0;
            continue;
        }
        // weighted harmonic mean (Fritsch-Butland form used by PCHIP)
        const double h0 = knots_[i] - knots_[i - 1];
        const double h1 = knots_[i + 1] - knots_[i];
        const double w0 = 2.0 * h1 + h0;
        const double w1 = h1 + 2.0 * h0;
        slopes_[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
    }
    // one-sided end slopes must not reverse the secant or exceed 3x it
    for (std::size_t end : {std::size_t{0}, n - 1}) {
        const double d = end == 0 ? secant[0] : secant[n - 2];
        if (slopes_[end] * d <= 0.0) slopes_[end] = 0.0;
        else if (std::abs(slopes_[end]) > 3.0 * std::abs(d)) slopes_[end] = 3.0 * d;
    }
}

double MonotoneCubic::operator()(double x) const {
    const std::size_t n = knots_.size();
    if (x <= knots_.front()) return values_.front();
    if (x >= knots_.back()) return values_.back();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    (void)n;
    const double h = knots_[i + 1] - knots_[i];
    const double t = (x - knots_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * values_[i] + h10 * h * slopes_[i] + h01 * values_[i + 1] + h11 * h * slopes_[i + 1];
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw DomainError("log_grid: need 0 < lo <= hi and count >= 1");
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = lo;
        return grid;
    }
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i) {
        grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

}  // namespace gfrag
