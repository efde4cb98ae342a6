#include "recollide/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recollide/errors.hpp"

namespace recollide::stats {

void Accumulator::add(double x) {
    n_ += 1;
    double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void Accumulator::merge(const Accumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    double na = static_cast<double>(n_);
    double nb = static_cast<double>(other.n_);
    double delta = other.mean_ - mean_;
    double nt = na + nb;
    mean_ += delta * nb / nt;
    m2_ += other.m2_ + delta * delta * na * nb / nt;
    n_ += other.n_;
}

double Accumulator::mean() const {
    if (n_ == 0) throw TooFewPointsError("mean of empty accumulator");
    return mean_;
}

double Accumulator::variance() const {
    if (n_ < 2) return 0.0;
    return m2_ / static_cast<double>(n_ - 1);
}

double Accumulator::stderr_mean() const {
    if (n_ == 0) throw TooFewPointsError("stderr of empty accumulator");
    if (n_ < 2) return std::numeric_limits<double>::infinity();
    return std::sqrt(variance() / static_cast<double>(n_));
}

LineFit wls_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() != w.size()) {
        throw PreconditionError("wls_line: mismatched lengths");
    }
    if (x.size() < 2) throw TooFewPointsError("wls_line needs at least 2 points");
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(w[i] > 0.0)) throw PreconditionError("wls_line: weights must be positive");
        sw += w[i];
        swx += w[i] * x[i];
        swy += w[i] * y[i];
        swxx += w[i] * x[i] * x[i];
        swxy += w[i] * x[i] * y[i];
    }
    double det = sw * swxx - swx * swx;
    if (!(std::abs(det) > 1e-300)) throw PreconditionError("wls_line: degenerate x values");
    LineFit fit;
    fit.slope = (sw * swxy - swx * swy) / det;
    fit.intercept = (swxx * swy - swx * swxy) / det;
    fit.slope_stderr = std::sqrt(sw / det);
    return fit;
}

LineFit loglog_slope(const std::vector<double>& s, const std::vector<double>& value,
                     const std::vector<double>& stderr_value) {
    if (s.size() != value.size() || s.size() != stderr_value.size()) {
        throw PreconditionError("loglog_slope: mismatched lengths");
    }
    std::vector<double> x, y, w;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(value[i] > 0.0) || !(s[i] > 0.0)) continue;
        double rel = stderr_value[i] / value[i];
        rel = std::max(rel, 1e-15);
        x.push_back(std::log(s[i]));
        y.push_back(std::log(value[i]));
        w.push_back(1.0 / (rel * rel));
    }
    if (x.size() < 2) throw TooFewPointsError("loglog_slope needs 2 positive points");
    return wls_line(x, y, w);
}

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16 * std::abs(sum) || term < 1e-300) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.size() < 5) throw TooFewPointsError("ks_test needs at least 5 samples");
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(f - lo, hi - f));
    }
    double sn = std::sqrt(n);
    double lambda = d * (sn + 0.12 + 0.11 / sn);
    return KsResult{d, kolmogorov_q(lambda)};
}

namespace {

// Lower series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x), valid for x >= a + 1 (Lentz).
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw BadRangeError("gamma_p needs a > 0");
    if (x < 0.0) throw BadRangeError("gamma_p needs x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw BadRangeError("gamma_q needs a > 0");
    if (x < 0.0) throw BadRangeError("gamma_q needs x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

ChiSquareResult chi_square_uniform(const std::vector<std::uint64_t>& counts) {
    if (counts.size() < 2) throw TooFewPointsError("chi_square_uniform needs 2 cells");
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw NonPositiveMassError("chi_square_uniform: no observations");
    double expect = static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (auto c : counts) {
        double d = static_cast<double>(c) - expect;
        stat += d * d / expect;
    }
    ChiSquareResult res;
    res.statistic = stat;
    res.dof = counts.size() - 1;
    res.p_value = gamma_q(static_cast<double>(res.dof) / 2.0, stat / 2.0);
    return res;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace recollide::stats
