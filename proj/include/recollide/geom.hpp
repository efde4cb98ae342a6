#pragma once

#include <cmath>
#include <optional>

#include "recollide/errors.hpp"

namespace recollide::geom {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }

inline Vec3 normalize(const Vec3& v, double eps = 1e-12) {
    double n = norm(v);
    if (n < eps) throw ZeroVectorError("cannot normalize near-zero vector");
    return v / n;
}

// Unit vector with the invariant |v| = 1 maintained to ~1e-12 (construction
// renormalizes, so downstream arithmetic can trust unit length).
class UnitVec3 {
  public:
    UnitVec3() : v_{1.0, 0.0, 0.0} {}
    explicit UnitVec3(const Vec3& v) : v_(normalize(v)) {}
    UnitVec3(double x, double y, double z) : v_(normalize(Vec3{x, y, z})) {}

    const Vec3& vec() const { return v_; }
    operator const Vec3&() const { return v_; }
    double x() const { return v_.x; }
    double y() const { return v_.y; }
    double z() const { return v_.z; }

  private:
    Vec3 v_;
};

// Angle in [0, pi] via atan2; well conditioned near 0 and pi, unlike acos.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(norm(cross(a, b)), dot(a, b));
}

struct Ray {
    Vec3 origin;
    UnitVec3 dir;
};

struct Sphere {
    Vec3 center;
    double radius = 1.0;
};

// Distance from p to the line {t*dir : t in R} through the origin.
inline double point_line_distance(const Vec3& p, const UnitVec3& dir) {
    return norm(cross(p, dir.vec()));
}

// Distance from p to the half-line {t*dir : t >= 0}.
inline double point_ray_distance(const Vec3& p, const UnitVec3& dir) {
    double t = dot(p, dir.vec());
    if (t <= 0.0) return norm(p);
    return norm(p - t * dir.vec());
}

// Distance from p to the segment [a, b].
inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = norm2(ab);
    if (len2 == 0.0) return norm(p - a);
    double t = dot(p - a, ab) / len2;
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    return norm(p - (a + t * ab));
}

// First intersection parameter t > t_min of a ray with a sphere surface.
//
// Uses the cancellation-stable quadratic: q = -(b + sign(b)*sqrt(disc))/2,
// roots q/a and c/q. Grazing contacts (discriminant below 1e-14 of its
// natural scale b^2 + |4ac|) report no hit. Throws InsideSphereError when
// the origin is strictly inside, distance < radius * (1 - 1e-9): the slack
// is relative because a computed collision point after a flight of length L
// carries O(L * eps) rounding and may land marginally below the surface.
// Such a point is treated as on the surface; its tiny exit root falls under
// the caller's departure t_min.
inline std::optional<double> ray_sphere_first_hit(const Ray& ray, const Sphere& s,
                                                  double t_min = 0.0) {
    const Vec3 oc = ray.origin - s.center;
    const double c = norm2(oc) - s.radius * s.radius;
    if (norm(oc) < s.radius * (1.0 - 1e-9))
        throw InsideSphereError("ray origin strictly inside sphere");
    // On-surface (or fp-noise inside) starts are departures: the only root
    // ahead is the exit crossing, which is not a collision.
    if (c <= 0.0) return std::nullopt;

    const double a = norm2(ray.dir.vec());  // == 1 up to rounding
    const double b = 2.0 * dot(ray.dir.vec(), oc);
    const double disc = b * b - 4.0 * a * c;
    const double scale = b * b + std::fabs(4.0 * a * c);
    if (disc <= 1e-14 * scale) return std::nullopt;  // miss or grazing

    const double sq = std::sqrt(disc);
    const double q = (b >= 0.0) ? -0.5 * (b + sq) : -0.5 * (b - sq);
    double t0 = q / a;
    double t1 = (q != 0.0) ? c / q : t0;
    if (t0 > t1) std::swap(t0, t1);
    // Only the entering root counts: a contact is a crossing from outside.
    if (t0 > t_min) return t0;
    return std::nullopt;
}

// Elastic reflection w' = w - 2 (V.w) V for an incoming velocity (V.w < 0).
inline UnitVec3 reflect(const UnitVec3& w, const UnitVec3& v_normal) {
    const double vw = dot(v_normal.vec(), w.vec());
    if (vw >= 0.0) throw NonIncomingError("reflect: velocity not incoming (V.w >= 0)");
    return UnitVec3(w.vec() - 2.0 * vw * v_normal.vec());
}

// Rotation matrix (row-major 3x3). apply_transpose is the inverse rotation.
struct Rotation {
    double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Vec3 apply_transpose(const Vec3& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
                m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }

    // Rotation taking `from` to `to` (Rodrigues; stable for the antipodal case).
    static Rotation align(const UnitVec3& from, const UnitVec3& to) {
        const Vec3 f = from.vec(), t = to.vec();
        const Vec3 ax = cross(f, t);
        const double c = dot(f, t);
        Rotation r;
        if (c < -1.0 + 1e-12) {
            // 180 degrees about any axis perpendicular to f.
            Vec3 p = std::fabs(f.x) < 0.9 ? cross(f, Vec3{1, 0, 0}) : cross(f, Vec3{0, 1, 0});
            p = normalize(p);
            const double px = p.x, py = p.y, pz = p.z;
            r.m[0] = 2 * px * px - 1; r.m[1] = 2 * px * py;     r.m[2] = 2 * px * pz;
            r.m[3] = 2 * px * py;     r.m[4] = 2 * py * py - 1; r.m[5] = 2 * py * pz;
            r.m[6] = 2 * px * pz;     r.m[7] = 2 * py * pz;     r.m[8] = 2 * pz * pz - 1;
            return r;
        }
        const double k = 1.0 / (1.0 + c);
        r.m[0] = ax.x * ax.x * k + c;    r.m[1] = ax.x * ax.y * k - ax.z; r.m[2] = ax.x * ax.z * k + ax.y;
        r.m[3] = ax.y * ax.x * k + ax.z; r.m[4] = ax.y * ax.y * k + c;    r.m[5] = ax.y * ax.z * k - ax.x;
        r.m[6] = ax.z * ax.x * k - ax.y; r.m[7] = ax.z * ax.y * k + ax.x; r.m[8] = ax.z * ax.z * k + c;
        return r;
    }
};

}  // namespace recollide::geom
