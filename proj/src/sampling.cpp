#include "recollide/sampling.hpp"

#include <cmath>

#include "recollide/errors.hpp"

namespace recollide::sampling {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Orthonormal pair spanning the plane perpendicular to axis.
void tangent_frame(const Vec3& axis, Vec3& t1, Vec3& t2) {
    Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    t1 = geom::normalize(geom::cross(axis, helper));
    t2 = geom::cross(axis, t1);
}

}  // namespace

UnitVec3 sample_unit_sphere(rng::Stream& s) {
    double z = 2.0 * s.next_double() - 1.0;
    double phi = 2.0 * kPi * s.next_double();
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    return UnitVec3(rho * std::cos(phi), rho * std::sin(phi), z);
}

double sample_exp_unit_conditioned(rng::Stream& s) {
    double p = s.next_double();
    double x = -std::log1p(-p * (1.0 - std::exp(-1.0)));
    return std::min(x, 1.0);
}

double exp_unit_conditioned_cdf(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return -std::expm1(-x) / (1.0 - std::exp(-1.0));
}

double exp_unit_conditioned_mean() {
    double e = std::exp(1.0);
    return (e - 2.0) / (e - 1.0);
}

bounce::RecollisionEvent sample_mu(rng::Stream& s, double r) {
    bounce::RecollisionEvent ev;
    ev.u = sample_unit_sphere(s);
    ev.xi = sample_exp_unit_conditioned(s);
    ev.v = sample_unit_sphere(s);
    ev.r = r;
    ev.validate();
    return ev;
}

ConeSample sample_cone(rng::Stream& s, const UnitVec3& axis, double half_angle) {
    if (!(half_angle > 0.0) || half_angle > kPi + 1e-12) {
        throw BadAngleError("cone half-angle must lie in (0, pi]");
    }
    half_angle = std::min(half_angle, kPi);
    double cos_min = std::cos(half_angle);
    double c = cos_min + (1.0 - cos_min) * s.next_double();
    double phi = 2.0 * kPi * s.next_double();
    double rho = std::sqrt(std::max(0.0, 1.0 - c * c));
    Vec3 t1, t2;
    tangent_frame(axis.vec(), t1, t2);
    Vec3 d = c * axis.vec() + rho * (std::cos(phi) * t1 + std::sin(phi) * t2);
    return ConeSample{UnitVec3(d), (1.0 - cos_min) / 2.0};
}

double lambda_importance_density(double h, double h_min, double h_max) {
    if (!(h_min > 0.0) || !(h_max > h_min)) {
        throw BadRangeError("importance range needs 0 < h_min < h_max");
    }
    if (h < h_min || h > h_max) return 0.0;
    // Unnormalized g(h) = min(1, (2/h)^2); mass of g over [h_min, h_max].
    double lo = h_min, hi = h_max;
    double mass = 0.0;
    if (lo < 2.0) {
        double flat_hi = std::min(hi, 2.0);
        mass += flat_hi - lo;
        lo = flat_hi;
    }
    if (hi > lo) mass += 4.0 * (1.0 / lo - 1.0 / hi);
    double g = h <= 2.0 ? 1.0 : 4.0 / (h * h);
    return g / mass;
}

double sample_lambda_h(rng::Stream& s, double h_min, double h_max) {
    if (!(h_min > 0.0) || !(h_max > h_min)) {
        throw BadRangeError("importance range needs 0 < h_min < h_max");
    }
    // Inverse CDF of the density above: flat piece on [h_min, min(h_max,2)],
    // 4/h^2 tail beyond.
    double lo = h_min, hi = h_max;
    double flat_mass = 0.0, tail_mass = 0.0;
    double flat_hi = lo;
    if (lo < 2.0) {
        flat_hi = std::min(hi, 2.0);
        flat_mass = flat_hi - lo;
    }
    double tail_lo = std::max(lo, 2.0);
    if (hi > tail_lo) tail_mass = 4.0 * (1.0 / tail_lo - 1.0 / hi);
    double total = flat_mass + tail_mass;
    double p = s.next_double() * total;
    if (p < flat_mass) return lo + p;
    p -= flat_mass;
    // Solve 4(1/tail_lo - 1/h) = p.
    return 1.0 / (1.0 / tail_lo - p / 4.0);
}

std::vector<LambdaStratum> lambda_strata(double h_min, double h_max, StrataMode mode,
                                         std::size_t n, rng::Stream* s) {
    if (!(h_min > 0.0) || !(h_max > h_min)) {
        throw BadRangeError("lambda_strata needs 0 < h_min < h_max");
    }
    if (n < 2) throw BadRangeError("lambda_strata needs n >= 2");
    std::vector<LambdaStratum> out;
    out.reserve(n);
    if (mode == StrataMode::grid) {
        double llo = std::log(h_min), lhi = std::log(h_max);
        double step = (lhi - llo) / static_cast<double>(n - 1);
        std::vector<double> nodes(n);
        for (std::size_t i = 0; i < n; ++i) {
            nodes[i] = std::exp(llo + step * static_cast<double>(i));
        }
        nodes.front() = h_min;
        nodes.back() = h_max;
        for (std::size_t i = 0; i < n; ++i) {
            double left = i == 0 ? nodes[0] : nodes[i - 1];
            double right = i + 1 == n ? nodes[n - 1] : nodes[i + 1];
            out.push_back(LambdaStratum{nodes[i], (right - left) / 2.0, {}});
        }
    } else {
        if (s == nullptr) throw PreconditionError("importance mode needs a stream");
        for (std::size_t i = 0; i < n; ++i) {
            double h = sample_lambda_h(*s, h_min, h_max);
            double dens = lambda_importance_density(h, h_min, h_max);
            out.push_back(LambdaStratum{h, 1.0 / (dens * static_cast<double>(n)), {}});
        }
    }
    return out;
}

void fill_stratum_events(LambdaStratum& st, std::size_t n, rng::Stream& s) {
    st.events.clear();
    st.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        UnitVec3 u = sample_unit_sphere(s);
        UnitVec3 v = sample_unit_sphere(s);
        st.events.emplace_back(u, v);
    }
}

CrossDecomposition cross_decomposition(const UnitVec3& u, const UnitVec3& v) {
    Vec3 c = geom::cross(u.vec(), v.vec());
    double t = geom::norm(c);
    if (t <= 1e-12) throw ParallelVectorsError("u and v are (anti)parallel");
    return CrossDecomposition{UnitVec3(c), std::min(t, 1.0)};
}

double cross_theta_cdf(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return 1.0 - std::sqrt(1.0 - t * t);
}

}  // namespace recollide::sampling
