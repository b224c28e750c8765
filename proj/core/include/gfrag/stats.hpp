#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace gfrag {

struct MeanStderr {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Two-pass sample mean and standard error of the mean, in index order.
inline MeanStderr mean_stderr(std::span<const double> xs) {
    MeanStderr out;
    out.n = xs.size();
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    return out;
}

inline double combined_stderr(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace gfrag
