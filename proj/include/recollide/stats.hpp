#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace recollide::stats {

// Streaming mean/variance accumulator (Welford). merge() combines two
// accumulators exactly as if the right-hand samples were appended, so a
// left-to-right fold over fixed chunks gives thread-count-independent
// results.
class Accumulator {
  public:
    void add(double x);
    void merge(const Accumulator& other);

    std::uint64_t count() const { return n_; }
    double mean() const;
    double variance() const;  // unbiased; 0 when n < 2
    double stderr_mean() const;

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// Weighted least squares fit of y = alpha + beta * x.
// weights are inverse-variance weights; zero or negative weights are
// rejected. Returns the slope, intercept, and the slope's standard error
// from the weighted normal equations.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

LineFit wls_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& w);

// Log-log slope of (s_i, value_i) where each value carries a standard
// error. Points with value <= 0 are dropped; rel_err below 1e-15 is
// clamped. Needs at least two surviving points.
LineFit loglog_slope(const std::vector<double>& s, const std::vector<double>& value,
                     const std::vector<double>& stderr_value);

// One-sample Kolmogorov-Smirnov test against a continuous CDF.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

// Asymptotic Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
double kolmogorov_q(double lambda);

// Chi-square goodness of fit for observed counts against uniform cell
// probabilities. Returns the statistic and the upper-tail p-value with
// (cells - 1) degrees of freedom.
struct ChiSquareResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t dof = 0;
};

ChiSquareResult chi_square_uniform(const std::vector<std::uint64_t>& counts);

// Regularized lower incomplete gamma P(a, x); Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Standard normal CDF.
double normal_cdf(double z);

}  // namespace recollide::stats
