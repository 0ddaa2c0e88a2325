#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace iontrap {

/// Welford accumulator. Feed samples in a fixed order for bit-stable output.
class RunningStats {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_of_mean() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double max_abs_residual = 0.0;
};

/// Ordinary least squares y = intercept + slope t.
inline LinearFit fit_line(std::span<const double> t, std::span<const double> y) {
    if (t.size() != y.size() || t.size() < 2) {
        throw std::invalid_argument("fit_line: need >= 2 paired samples");
    }
    const double n = static_cast<double>(t.size());
    double st = 0, sy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
    }
    const double tm = st / n, ym = sy / n;
    double stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
    }
    LinearFit f;
    f.slope = sty / stt;
    f.intercept = ym - f.slope * tm;
    for (std::size_t i = 0; i < t.size(); ++i) {
        f.max_abs_residual =
            std::fmax(f.max_abs_residual, std::abs(y[i] - (f.intercept + f.slope * t[i])));
    }
    return f;
}

}  // namespace iontrap
