#pragma once

#include <cstdint>
#include <vector>

#include "recollide/geom.hpp"

// Two-scatterer bounce process. The canonical frame has the incoming
// velocity e = (1,0,0), the first collision at the origin on the sphere
// around a = r(e-u)/|e-u|, and the second at xi*u on the sphere around
// b = xi*u + r(u-v)/|u-v|. Overlapping scatterers are allowed.
namespace recollide::bounce {

using geom::Ray;
using geom::Sphere;
using geom::UnitVec3;
using geom::Vec3;

inline const Vec3 kE1{1.0, 0.0, 0.0};

struct RecollisionEvent {
    UnitVec3 u;      // outgoing velocity after the first collision
    double xi = 1.0; // flight time between the two collisions
    UnitVec3 v;      // outgoing velocity after the second collision
    double r = 1.0;  // scatterer radius

    // Throws DegenerateEventError (u ~ e or u ~ v within 1e-12 angular
    // tolerance) or BadRangeError (xi or r not positive).
    void validate() const;
};

struct Centers {
    Vec3 a;  // first scatterer
    Vec3 b;  // second scatterer
};

Centers build_centers(const RecollisionEvent& ev);

struct BounceTrace {
    Vec3 a, b;
    std::vector<double> tau;        // collision times, tau[0]=0, tau[1]=xi, size N
    std::vector<Vec3> points;       // collision positions, size N
    std::vector<UnitVec3> w;        // velocities w[0]=e .. w[N], size N+1
    std::vector<int> sphere_id;     // 0 = sphere a, 1 = sphere b, size N
    int n_collisions = 0;           // N
    double beta = 0.0;              // last collision time
    UnitVec3 w_exit;                // w[N]
    bool truncated = false;         // hit the collision cap
};

// Full mechanical trajectory by repeated first-hit queries against the two
// spheres. The trace starts with the two known collisions and follows the
// exit dynamics until neither sphere is hit again (or n_max collisions).
BounceTrace simulate_bounce(const RecollisionEvent& ev, int n_max = 10000);

// Same, writing into an existing trace: contents are replaced, storage is
// reused across calls (the Monte Carlo drivers run >1e8 of these).
void simulate_bounce(const RecollisionEvent& ev, BounceTrace& out, int n_max = 10000);

// Membership variants for the classifier infima: the literal definitions
// range over the whole line, the physical ones over the relevant half-line.
enum class LineMode { full_line, forward_ray };

// Shadowing: the second scatterer blocks the incoming e-line. Literal
// default tests the full line; forward_ray restricts to the incoming
// half-line {t*(-e) : t >= 0} seen from the first collision point.
bool classify_shadowing(const RecollisionEvent& ev, LineMode mode = LineMode::full_line);

// Recollision: the post-second-collision motion re-enters the first ball.
// Physical default tests the forward ray from xi*u with direction v;
// full_line tests the whole line.
bool classify_recollision(const RecollisionEvent& ev, LineMode mode = LineMode::forward_ray);

// Cone superset of the recollision set: the angle between the lines spanned
// by u and v is at most 2r/xi. (Forward recollisions have v ~ -u; the line
// angle covers both orientations, and the inclusion is exact:
// line-angle(u,v) <= 2*arctan(r/xi) <= 2r/xi.)
bool classify_prime(const RecollisionEvent& ev);

// Frame normal to the plane of the two centers, n = (a x b)/|a x b|, with
// the sign fixed so that u.n >= 0. n_seq[k] = w_k.n for k = 0..N;
// h_seq[k] = Z(tau_k).n with h_seq[0] = h_seq[1] = 0 by construction.
struct NormalFrame {
    UnitVec3 n;
    std::vector<double> n_seq;  // size N+1
    std::vector<double> h_seq;  // size N+1 (slot 0 duplicates the origin)
};

NormalFrame normal_frame(const BounceTrace& trace);

// Margins for the dispersive recursions under the preconditions r = 1,
// xi >= 10 (u.n >= 0 holds by the frame sign convention). Empty when N < 3.
//
// Both slope recursions rest on the impact at collision k+1 being near
// head-on, which is forced by the return flight that follows it: the flight
// into the collision and the flight out of it connect two points on the
// same sphere, so their vector sum is short while each is long. The final
// collision has no outgoing return flight and can be arbitrarily grazing,
// so the slope step across the last transition is not guaranteed; it is
// reported separately and never asserted. The height step needs only the
// flight-time lower bound and holds across the final transition too.
//
// Vectors hold the guaranteed instances (flag entries below -1e-9):
//   height_margin[k-1]:        h_{k+1} - (h_k + xi/2 * n_k),     k = 1..N-1
//   slope_proof_margin[k-1]:   n_{k+1} - (n_k + 1/2 * h_k),      k = 1..N-2
//   slope_display_margin[k-1]: n_{k+1} - (n_k + 1/2 * h_{k+1}),  k = 1..N-2
//   chained_margin[l-3]:       n_l - (xi/4)^(l-2) * |e.(u x v)|, l = 3..N-1
// Boundary instances (diagnostic only):
//   last_slope_proof / last_slope_display: the k = N-1 slope steps
//   first_chained: the l = 2 chained bound, which concedes the factor 1/2
//     of the vertical bound |n_2| >= |e.(u x v)|/2
//   last_chained:  the l = N chained bound, which crosses the final
//     (possibly grazing) transition
struct DispersiveReport {
    std::vector<double> height_margin;
    std::vector<double> slope_proof_margin;
    std::vector<double> slope_display_margin;
    std::vector<double> chained_margin;
    double last_slope_proof = 0.0;
    double last_slope_display = 0.0;
    double first_chained = 0.0;
    double last_chained = 0.0;
};

DispersiveReport check_dispersive(const RecollisionEvent& ev, const BounceTrace& trace,
                                  const NormalFrame& frame);

// Margins for the unconditional geometric facts:
//   monotone[k-1]: n_k - n_{k-1}, k = 1..N (>= 0 when u.n >= 0)
//   angle[j]: angle(-e, w_j) - (pi/2 - angle(n, w_j)), j = 0..N (> 0)
//   vertical: |n_2| - |e.(u x v)|/2 (>= 0), meaningful for N >= 2
//   beta_unit / beta_n1: diagnostic margins of the two readings of the
//   trapping-time bound, (xi + 1) - beta and (xi + 1/n_1) - beta. Both are
//   reported, never asserted.
struct BasicReport {
    std::vector<double> monotone_margin;
    std::vector<double> angle_margin;
    double vertical_margin = 0.0;
    double beta_unit_margin = 0.0;
    double beta_n1_margin = 0.0;
};

BasicReport check_lemma_basic(const RecollisionEvent& ev, const BounceTrace& trace,
                              const NormalFrame& frame);

// Scaling map (u, xi, v, r) -> (u, xi/f, v, r/f); trajectories scale by 1/f.
RecollisionEvent rescale(const RecollisionEvent& ev, double factor);

// Exit angle relative to the backward direction, angle(-e, w_exit) in [0, pi].
double exit_angle(const BounceTrace& trace);

}  // namespace recollide::bounce
