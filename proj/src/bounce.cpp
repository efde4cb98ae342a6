#include "recollide/bounce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recollide/errors.hpp"

namespace recollide::bounce {

namespace {

constexpr double kAngularTol = 1e-12;
// Departure guard: after a reflection the same sphere reports a spurious
// root at t ~ rounding noise; skip it without masking genuine short flights
// against the other sphere.
constexpr double kDepartEps = 1e-9;

}  // namespace

void RecollisionEvent::validate() const {
    if (!(xi > 0.0)) throw BadRangeError("event: xi must be positive");
    if (!(r > 0.0)) throw BadRangeError("event: r must be positive");
    if (geom::angle_between(u.vec(), kE1) < kAngularTol)
        throw DegenerateEventError("event: u coincides with e");
    if (geom::angle_between(u.vec(), v.vec()) < kAngularTol)
        throw DegenerateEventError("event: u coincides with v");
}

Centers build_centers(const RecollisionEvent& ev) {
    ev.validate();
    const Vec3 eu = kE1 - ev.u.vec();
    const Vec3 uv = ev.u.vec() - ev.v.vec();
    return {ev.r * geom::normalize(eu), ev.xi * ev.u.vec() + ev.r * geom::normalize(uv)};
}

void simulate_bounce(const RecollisionEvent& ev, BounceTrace& tr, int n_max) {
    const Centers c = build_centers(ev);
    const Sphere sa{c.a, ev.r}, sb{c.b, ev.r};

    // Both start states lie on one sphere and outside the other by
    // construction (u.a <= 0, u.(b - xi u) >= 0); guard the contract anyway.
    if (geom::norm(Vec3{0, 0, 0} - c.b) < ev.r - 1e-12)
        throw MechanicallyInconsistentError("bounce: origin strictly inside second ball");
    if (geom::norm(ev.xi * ev.u.vec() - c.a) < ev.r - 1e-12)
        throw MechanicallyInconsistentError("bounce: second collision point strictly inside first ball");

    tr.a = c.a;
    tr.b = c.b;
    tr.truncated = false;
    tr.tau.clear();
    tr.points.clear();
    tr.w.clear();
    tr.sphere_id.clear();
    tr.tau.insert(tr.tau.end(), {0.0, ev.xi});
    tr.points.insert(tr.points.end(), {Vec3{0, 0, 0}, ev.xi * ev.u.vec()});
    tr.w.insert(tr.w.end(), {UnitVec3(kE1), ev.u, ev.v});
    tr.sphere_id.insert(tr.sphere_id.end(), {0, 1});

    Vec3 pos = ev.xi * ev.u.vec();
    UnitVec3 vel = ev.v;
    double t = ev.xi;
    int cur = 1;  // sphere the particle is currently touching

    while (static_cast<int>(tr.tau.size()) < n_max) {
        // First hit against either sphere; skip the departure root on the
        // sphere we are sitting on.
        std::optional<double> ta = geom::ray_sphere_first_hit(
            {pos, vel}, sa, cur == 0 ? kDepartEps : 0.0);
        std::optional<double> tb = geom::ray_sphere_first_hit(
            {pos, vel}, sb, cur == 1 ? kDepartEps : 0.0);
        int hit;
        double dt;
        if (ta && (!tb || *ta <= *tb)) {
            hit = 0;
            dt = *ta;
        } else if (tb) {
            hit = 1;
            dt = *tb;
        } else {
            break;  // escaped
        }
        pos += dt * vel.vec();
        t += dt;
        const Vec3 center = hit == 0 ? c.a : c.b;
        const UnitVec3 n(pos - center);
        vel = geom::reflect(vel, n);
        tr.tau.push_back(t);
        tr.points.push_back(pos);
        tr.w.push_back(vel);
        tr.sphere_id.push_back(hit);
        cur = hit;
    }
    if (static_cast<int>(tr.tau.size()) >= n_max) tr.truncated = true;

    tr.n_collisions = static_cast<int>(tr.tau.size());
    tr.beta = tr.tau.back();
    tr.w_exit = tr.w.back();
}

BounceTrace simulate_bounce(const RecollisionEvent& ev, int n_max) {
    BounceTrace tr;
    simulate_bounce(ev, tr, n_max);
    return tr;
}

bool classify_shadowing(const RecollisionEvent& ev, LineMode mode) {
    const Centers c = build_centers(ev);
    const UnitVec3 e(kE1);
    if (mode == LineMode::full_line) return geom::point_line_distance(c.b, e) < ev.r;
    // Incoming half-line {t*e : t <= 0} = ray from the origin along -e.
    return geom::point_ray_distance(c.b, UnitVec3(-kE1)) < ev.r;
}

bool classify_recollision(const RecollisionEvent& ev, LineMode mode) {
    const Centers c = build_centers(ev);
    const Vec3 start = ev.xi * ev.u.vec();
    if (mode == LineMode::full_line)
        return geom::point_line_distance(start - c.a, ev.v) < ev.r;
    return geom::ray_sphere_first_hit({start, ev.v}, Sphere{c.a, ev.r}, 0.0).has_value();
}

bool classify_prime(const RecollisionEvent& ev) {
    ev.validate();
    const double theta = geom::angle_between(ev.u.vec(), ev.v.vec());
    const double line_angle = std::min(theta, M_PI - theta);
    return line_angle <= 2.0 * ev.r / ev.xi;
}

NormalFrame normal_frame(const BounceTrace& trace) {
    const Vec3 axb = geom::cross(trace.a, trace.b);
    if (geom::norm(axb) <= 1e-10 * geom::norm(trace.a) * geom::norm(trace.b))
        throw CollinearFrameError("normal_frame: centers are collinear with the origin");
    Vec3 n = geom::normalize(axb);
    if (geom::dot(n, trace.w[1].vec()) < 0.0) n = -n;  // sign convention n_1 >= 0

    NormalFrame f{UnitVec3(n), {}, {}};
    f.n_seq.reserve(trace.w.size());
    for (const auto& wk : trace.w) f.n_seq.push_back(geom::dot(wk.vec(), n));
    f.h_seq.reserve(trace.points.size() + 1);
    f.h_seq.push_back(0.0);
    for (const auto& p : trace.points) f.h_seq.push_back(geom::dot(p, n));
    return f;
}

DispersiveReport check_dispersive(const RecollisionEvent& ev, const BounceTrace& trace,
                                  const NormalFrame& frame) {
    if (std::fabs(ev.r - 1.0) > 1e-12)
        throw PreconditionError("check_dispersive: requires r = 1");
    if (ev.xi < 10.0) throw PreconditionError("check_dispersive: requires xi >= 10");
    if (frame.n_seq[1] < 0.0)
        throw PreconditionError("check_dispersive: requires n_1 >= 0");

    DispersiveReport rep;
    const int n = trace.n_collisions;
    if (n < 3) return rep;
    for (int k = 1; k + 1 <= n; ++k) {
        // h_seq slot k holds the height at collision k.
        rep.height_margin.push_back(frame.h_seq[k + 1] -
                                    (frame.h_seq[k] + 0.5 * ev.xi * frame.n_seq[k]));
        const double proof = frame.n_seq[k + 1] - (frame.n_seq[k] + 0.5 * frame.h_seq[k]);
        const double display = frame.n_seq[k + 1] - (frame.n_seq[k] + 0.5 * frame.h_seq[k + 1]);
        if (k + 1 < n) {
            rep.slope_proof_margin.push_back(proof);
            rep.slope_display_margin.push_back(display);
        } else {
            rep.last_slope_proof = proof;
            rep.last_slope_display = display;
        }
    }
    const double vert = std::fabs(geom::dot(kE1, geom::cross(ev.u.vec(), ev.v.vec())));
    for (int l = 2; l <= n; ++l) {
        const double m = frame.n_seq[l] - std::pow(ev.xi / 4.0, l - 2) * vert;
        if (l == 2)
            rep.first_chained = m;
        else if (l == n)
            rep.last_chained = m;
        else
            rep.chained_margin.push_back(m);
    }
    return rep;
}

BasicReport check_lemma_basic(const RecollisionEvent& ev, const BounceTrace& trace,
                              const NormalFrame& frame) {
    BasicReport rep;
    const int n = trace.n_collisions;
    for (int k = 1; k <= n; ++k)
        rep.monotone_margin.push_back(frame.n_seq[k] - frame.n_seq[k - 1]);
    for (int j = 0; j <= n; ++j) {
        const double a1 = geom::angle_between(-kE1, trace.w[j].vec());
        const double a2 = geom::angle_between(frame.n.vec(), trace.w[j].vec());
        rep.angle_margin.push_back(a1 - (M_PI / 2.0 - a2));
    }
    const double vert = std::fabs(geom::dot(kE1, geom::cross(ev.u.vec(), ev.v.vec())));
    rep.vertical_margin = std::fabs(frame.n_seq[2]) - 0.5 * vert;
    rep.beta_unit_margin = (ev.xi + 1.0) - trace.beta;
    const double n1 = frame.n_seq[1];
    rep.beta_n1_margin = n1 > 0.0 ? (ev.xi + 1.0 / n1) - trace.beta
                                  : std::numeric_limits<double>::infinity();
    return rep;
}

RecollisionEvent rescale(const RecollisionEvent& ev, double factor) {
    if (!(factor > 0.0)) throw BadRangeError("rescale: factor must be positive");
    return {ev.u, ev.xi / factor, ev.v, ev.r / factor};
}

double exit_angle(const BounceTrace& trace) {
    return geom::angle_between(-kE1, trace.w_exit.vec());
}

}  // namespace recollide::bounce
