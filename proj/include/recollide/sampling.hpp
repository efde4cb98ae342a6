#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "recollide/bounce.hpp"
#include "recollide/geom.hpp"
#include "recollide/rng.hpp"

namespace recollide::sampling {

using geom::UnitVec3;
using geom::Vec3;

// Uniform direction on the unit sphere (z uniform on [-1,1], azimuth uniform).
UnitVec3 sample_unit_sphere(rng::Stream& s);

// Unit-rate exponential conditioned to (0,1]: inverse CDF of
// F(x) = (1 - e^{-x})/(1 - e^{-1}). Density e^{1-x}/(e-1), mean (e-2)/(e-1).
double sample_exp_unit_conditioned(rng::Stream& s);

double exp_unit_conditioned_cdf(double x);
double exp_unit_conditioned_mean();

// One draw from mu = Uni(S^2) x EXP(1|1) x Uni(S^2) at radius r.
bounce::RecollisionEvent sample_mu(rng::Stream& s, double r);

// Uniform direction in the spherical cap of the given half-angle around
// axis. cap_weight is the cap's probability mass under the uniform law on
// the sphere, (1 - cos(half_angle))/2, for importance reweighting.
struct ConeSample {
    UnitVec3 dir;
    double cap_weight;
};

ConeSample sample_cone(rng::Stream& s, const UnitVec3& axis, double half_angle);

// Flight-time stratification for the (infinite) lambda measure
// Uni x Leb(R+) x Uni, restricted to [h_min, h_max].
//
// grid: log-spaced nodes with trapezoid weights, so
//   sum_i weight_i * f(h_i) ~ integral of f over [h_min, h_max].
// importance: h drawn from the density proportional to min(1, (2/h)^2)
//   restricted to the range; weight = 1/density, so
//   mean over draws of weight * f(h) is unbiased for the same integral.
// The proposal matches the ~(1/h)^2 solid-angle mass of the recollision
// cone, keeping weight * cap_weight bounded on the recollision set.
enum class StrataMode { grid, importance };

struct LambdaStratum {
    double h = 0.0;
    double weight = 0.0;
    std::vector<std::pair<UnitVec3, UnitVec3>> events;  // optional (u,v) batch
};

std::vector<LambdaStratum> lambda_strata(double h_min, double h_max, StrataMode mode,
                                         std::size_t n, rng::Stream* s);

// Density and normalizer of the importance proposal on [h_min, h_max].
double lambda_importance_density(double h, double h_min, double h_max);

// One draw from the importance proposal (inverse CDF).
double sample_lambda_h(rng::Stream& s, double h_min, double h_max);

// Fill a stratum with n iid uniform (u, v) pairs.
void fill_stratum_events(LambdaStratum& st, std::size_t n, rng::Stream& s);

// Decomposition of (u,v) into w = (u x v)/|u x v| and theta = |u x v|.
// For iid uniform u, v: w is uniform on S^2, theta has CDF 1 - sqrt(1-t^2)
// on [0,1], and the two are independent. Throws ParallelVectorsError when
// |u x v| <= 1e-12.
struct CrossDecomposition {
    UnitVec3 w;
    double theta;
};

CrossDecomposition cross_decomposition(const UnitVec3& u, const UnitVec3& v);

double cross_theta_cdf(double t);

}  // namespace recollide::sampling
