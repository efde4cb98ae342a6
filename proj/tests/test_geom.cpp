#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <optional>
#include <random>
#include "doctest.h"
#include "recollide/errors.hpp"
#include "recollide/geom.hpp"

using namespace recollide;
using geom::Ray;
using geom::Rotation;
using geom::Sphere;
using geom::UnitVec3;
using geom::Vec3;

namespace {

// Independent oracle: walk the signed surface function f(t) = |o + t d - c| - r
// in small steps until the first sign change past t_min, then bisect.
std::optional<double> first_hit_by_scan(const Ray& ray, const Sphere& s, double t_min,
                                        double t_max) {
    auto f = [&](double t) {
        return geom::norm(ray.origin + t * ray.dir.vec() - s.center) - s.radius;
    };
    const double step = 1e-4 * std::max(1.0, s.radius);
    double lo = t_min;
    double flo = f(lo);
    if (flo <= 0.0) return std::nullopt;  // oracle only handles outside starts
    for (double hi = lo + step; hi <= t_max; hi += step) {
        const double fhi = f(hi);
        if (fhi <= 0.0) {
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (lo + hi);
                (f(mid) > 0.0 ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        lo = hi;
    }
    return std::nullopt;
}

Vec3 random_dir(std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    while (true) {
        Vec3 v{nd(g), nd(g), nd(g)};
        if (geom::norm(v) > 1e-3) return v;
    }
}

}  // namespace

TEST_CASE("ray sphere first hit matches bisection scan on random scenes") {
    std::mt19937_64 g(2024);
    std::uniform_real_distribution<double> ur(-5.0, 5.0);
    std::uniform_real_distribution<double> rr(0.1, 3.0);
    int hits = 0, misses = 0;
    for (int i = 0; i < 4000; ++i) {
        Sphere s{{ur(g), ur(g), ur(g)}, rr(g)};
        Vec3 origin{ur(g), ur(g), ur(g)};
        if (geom::norm(origin - s.center) < s.radius * 1.001) continue;
        // Half the rays are aimed near the sphere so the hit branch gets real
        // coverage; the rest stay fully random for the miss branch.
        Vec3 dir = random_dir(g);
        if (i % 2 == 0) dir = s.center + 0.9 * s.radius * geom::normalize(random_dir(g)) - origin;
        Ray ray{origin, UnitVec3(dir)};
        const double t_min = (i % 3 == 0) ? 0.5 : 0.0;
        std::optional<double> got;
        try {
            got = geom::ray_sphere_first_hit(ray, s, t_min);
        } catch (const InsideSphereError&) {
            continue;
        }
        const auto want = first_hit_by_scan(ray, s, t_min, 40.0);
        if (want) {
            // Scan found a crossing: the solver must agree to high accuracy,
            // except within its documented grazing dead-band.
            const double b = 2.0 * geom::dot(ray.dir.vec(), ray.origin - s.center);
            const double c = geom::norm2(ray.origin - s.center) - s.radius * s.radius;
            const double disc = b * b - 4.0 * c;
            if (disc <= 1e-13 * (b * b + std::fabs(4.0 * c))) continue;
            REQUIRE(got.has_value());
            CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
            ++hits;
        } else {
            CHECK(!got.has_value());
            ++misses;
        }
    }
    // Both branches must actually be exercised.
    CHECK(hits > 500);
    CHECK(misses > 500);
}

TEST_CASE("ray sphere hit point lies on the surface and is entering") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> ur(-4.0, 4.0);
    for (int i = 0; i < 2000; ++i) {
        Sphere s{{ur(g), ur(g), ur(g)}, 1.0};
        Vec3 origin{ur(g), ur(g), ur(g)};
        if (geom::norm(origin - s.center) < 1.01) continue;
        // Aim near the sphere so a decent fraction hits.
        Vec3 target = s.center + 0.8 * random_dir(g) * (1.0 / geom::norm(random_dir(g)));
        Ray ray{origin, UnitVec3(target - origin)};
        auto t = geom::ray_sphere_first_hit(ray, s, 0.0);
        if (!t) continue;
        const Vec3 p = ray.origin + *t * ray.dir.vec();
        CHECK(std::fabs(geom::norm(p - s.center) - s.radius) < 1e-9 * (1.0 + *t));
        // Entering: moving inward at the contact.
        CHECK(geom::dot(p - s.center, ray.dir.vec()) < 0.0);
    }
}

TEST_CASE("ray sphere treats on-surface and marginally inside starts as departures") {
    const Sphere s{{0, 0, 0}, 1.0};
    // Exactly on the surface, any direction: no self-hit.
    CHECK(!geom::ray_sphere_first_hit({{1, 0, 0}, UnitVec3(1, 0, 0)}, s, 0.0));
    CHECK(!geom::ray_sphere_first_hit({{1, 0, 0}, UnitVec3(-1, 0.5, 0)}, s, 0.0));
    // A touch inside (rounding-scale penetration): still a departure, and in
    // particular the exit crossing is not reported as a contact.
    const Vec3 just_inside{1.0 - 1e-12, 0.0, 0.0};
    CHECK(!geom::ray_sphere_first_hit({just_inside, UnitVec3(1, 0, 0)}, s, 0.0));
    CHECK(!geom::ray_sphere_first_hit({just_inside, UnitVec3(0.01, 1, 0)}, s, 1e-9));
    // Genuinely inside: an error, not a silent answer.
    CHECK_THROWS_AS(geom::ray_sphere_first_hit({{0.5, 0, 0}, UnitVec3(1, 0, 0)}, s, 0.0),
                    InsideSphereError);
    CHECK_THROWS_AS(geom::ray_sphere_first_hit({{1.0 - 1e-6, 0, 0}, UnitVec3(1, 0, 0)}, s, 0.0),
                    InsideSphereError);
}

TEST_CASE("ray sphere respects t_min and reports no grazing contact") {
    const Sphere s{{0, 0, 0}, 1.0};
    const Ray through{{-3, 0, 0}, UnitVec3(1, 0, 0)};
    auto t = geom::ray_sphere_first_hit(through, s, 0.0);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(2.0).epsilon(1e-12));
    // t_min past the entering root: the exit root is not a contact.
    CHECK(!geom::ray_sphere_first_hit(through, s, 2.5));
    // Exact tangent line: no hit.
    CHECK(!geom::ray_sphere_first_hit({{-3, 1, 0}, UnitVec3(1, 0, 0)}, s, 0.0));
    // Far miss.
    CHECK(!geom::ray_sphere_first_hit({{-3, 1.5, 0}, UnitVec3(1, 0, 0)}, s, 0.0));
    // Sphere behind the origin.
    CHECK(!geom::ray_sphere_first_hit({{3, 0, 0}, UnitVec3(1, 0, 0)}, s, 0.0));
}

TEST_CASE("point to segment distance matches dense minimization") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> ur(-3.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p{ur(g), ur(g), ur(g)}, a{ur(g), ur(g), ur(g)}, b{ur(g), ur(g), ur(g)};
        // Oracle: coarse scan of |p - (a + t(b-a))| over [0,1] plus local refine.
        double best = geom::norm(p - a);
        double tbest = 0.0;
        for (int k = 0; k <= 2000; ++k) {
            const double t = k / 2000.0;
            const double d = geom::norm(p - (a + t * (b - a)));
            if (d < best) { best = d; tbest = t; }
        }
        double lo = std::max(0.0, tbest - 1e-3), hi = std::min(1.0, tbest + 1e-3);
        for (int k = 0; k < 100; ++k) {
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            const double d1 = geom::norm(p - (a + m1 * (b - a)));
            const double d2 = geom::norm(p - (a + m2 * (b - a)));
            (d1 < d2 ? hi : lo) = (d1 < d2 ? m2 : m1);
        }
        best = std::min(best, geom::norm(p - (a + 0.5 * (lo + hi) * (b - a))));
        CHECK(geom::point_segment_distance(p, a, b) == doctest::Approx(best).epsilon(1e-9));
    }
    // Degenerate segment.
    CHECK(geom::point_segment_distance({1, 2, 2}, {0, 0, 0}, {0, 0, 0}) ==
          doctest::Approx(3.0));
}

TEST_CASE("point to line and ray distances") {
    // Projection identity: dist^2 + (p.d)^2 = |p|^2 for the line through 0.
    std::mt19937_64 g(13);
    std::uniform_real_distribution<double> ur(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 p{ur(g), ur(g), ur(g)};
        const UnitVec3 d(random_dir(g));
        const double dl = geom::point_line_distance(p, d);
        CHECK(dl * dl + geom::dot(p, d.vec()) * geom::dot(p, d.vec()) ==
              doctest::Approx(geom::norm2(p)).epsilon(1e-9));
        CHECK(geom::point_ray_distance(p, d) >= dl - 1e-12);
    }
    // Behind the ray start the distance is to the origin itself.
    CHECK(geom::point_ray_distance({-2, 1, 0}, UnitVec3(1, 0, 0)) ==
          doctest::Approx(std::sqrt(5.0)));
    CHECK(geom::point_line_distance({-2, 1, 0}, UnitVec3(1, 0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("reflection preserves tangential part and flips the normal part") {
    std::mt19937_64 g(17);
    for (int i = 0; i < 1000; ++i) {
        const UnitVec3 n(random_dir(g));
        UnitVec3 w(random_dir(g));
        if (geom::dot(n.vec(), w.vec()) >= 0.0) w = UnitVec3(-w.vec());
        if (geom::dot(n.vec(), w.vec()) > -1e-9) continue;
        const UnitVec3 w2 = geom::reflect(w, n);
        CHECK(geom::norm(w2.vec()) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(geom::dot(n.vec(), w2.vec()) ==
              doctest::Approx(-geom::dot(n.vec(), w.vec())).epsilon(1e-9));
        const Vec3 tan_in = w.vec() - geom::dot(n.vec(), w.vec()) * n.vec();
        const Vec3 tan_out = w2.vec() - geom::dot(n.vec(), w2.vec()) * n.vec();
        CHECK(geom::norm(tan_in - tan_out) < 1e-9);
    }
    CHECK_THROWS_AS(geom::reflect(UnitVec3(1, 0, 0), UnitVec3(1, 0, 0)), NonIncomingError);
    CHECK_THROWS_AS(geom::reflect(UnitVec3(0, 1, 0), UnitVec3(1, 0, 0)), NonIncomingError);
}

TEST_CASE("rotation align maps from to to and is a proper rotation") {
    std::mt19937_64 g(19);
    for (int i = 0; i < 1000; ++i) {
        const UnitVec3 f(random_dir(g));
        UnitVec3 t(random_dir(g));
        if (i % 7 == 0) t = UnitVec3(-f.vec());          // antipodal branch
        if (i % 11 == 0) t = f;                           // identity branch
        const Rotation r = Rotation::align(f, t);
        CHECK(geom::norm(r.apply(f.vec()) - t.vec()) < 1e-9);
        // Orthogonality: apply then apply_transpose is the identity.
        const Vec3 probe = random_dir(g);
        CHECK(geom::norm(r.apply_transpose(r.apply(probe)) - probe) < 1e-9 * geom::norm(probe));
        // Proper (det +1): rows form a right-handed frame.
        const Vec3 r0{r.m[0], r.m[1], r.m[2]}, r1{r.m[3], r.m[4], r.m[5]},
            r2{r.m[6], r.m[7], r.m[8]};
        CHECK(geom::dot(geom::cross(r0, r1), r2) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("angle between is well conditioned at tiny and straight angles") {
    CHECK(geom::angle_between({1, 0, 0}, {0, 1, 0}) == doctest::Approx(M_PI / 2));
    CHECK(geom::angle_between({1, 0, 0}, {1, 0, 0}) == doctest::Approx(0.0));
    CHECK(geom::angle_between({1, 0, 0}, {-1, 0, 0}) == doctest::Approx(M_PI));
    // acos-based formulas lose these digits entirely.
    CHECK(geom::angle_between({1, 0, 0}, {1, 1e-9, 0}) ==
          doctest::Approx(1e-9).epsilon(1e-6));
    CHECK(geom::angle_between({1, 0, 0}, {-1, 1e-9, 0}) ==
          doctest::Approx(M_PI - 1e-9).epsilon(1e-12));
}

TEST_CASE("normalize rejects the zero vector and unit vectors are unit") {
    CHECK_THROWS_AS(geom::normalize(Vec3{0, 0, 0}), ZeroVectorError);
    CHECK_THROWS_AS(UnitVec3(Vec3{0, 0, 0}), ZeroVectorError);
    const UnitVec3 u(3, 4, 0);
    CHECK(u.x() == doctest::Approx(0.6));
    CHECK(geom::norm(u.vec()) == doctest::Approx(1.0).epsilon(1e-15));
}
