#pragma once

#include <span>
#include <vector>

namespace gfrag {

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes (PCHIP).
/// Monotone on every interval where the data are, never overshoots the
/// data range, and is held constant beyond the first and last knots.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> knots, std::vector<double> values);

    double operator()(double x) const;

    bool empty() const noexcept { return knots_.empty(); }
    std::span<const double> knots() const noexcept { return knots_; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

/// `count` points log-spaced on [lo, hi] inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

}  // namespace gfrag
