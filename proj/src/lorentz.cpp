#include "recollide/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "recollide/errors.hpp"
#include "recollide/estimators.hpp"
#include "recollide/parallel.hpp"
#include "recollide/sampling.hpp"
#include "recollide/stats.hpp"

namespace recollide::lorentz {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Departure guard: after a reflection the departed sphere reports a spurious
// root at t ~ rounding noise.
constexpr double kDepartEps = 1e-9;
constexpr int kChainMax = 10000;
constexpr double kMismatchTol = 1e-9;
constexpr double kDegenerateTol = 1e-12;

bool capsule_near(const Capsule& c, const Vec3& p, double eps) {
    if (p.x < c.lo.x || p.x > c.hi.x || p.y < c.lo.y || p.y > c.hi.y || p.z < c.lo.z ||
        p.z > c.hi.z)
        return false;
    return geom::point_segment_distance(p, c.a, c.b) < eps;
}

bool near_any_capsule(const std::vector<Capsule>& caps, const Vec3& p, double eps) {
    for (const auto& c : caps)
        if (capsule_near(c, p, eps)) return true;
    return false;
}

struct PlacedHit {
    double t = 0.0;
    int idx = -1;
};

// First deterministic contact with a revealed sphere at t < t_max. depart
// gets the departure guard; skip1/skip2 are excluded outright. A start point
// driven marginally inside a sphere by grazing roundoff is skipped rather
// than treated as trapped.
std::optional<PlacedHit> first_placed_hit(const std::vector<Vec3>& placed, double eps,
                                          const Vec3& pos, const UnitVec3& vel, double t_max,
                                          int depart, int skip1, int skip2) {
    std::optional<PlacedHit> best;
    for (int i = 0; i < static_cast<int>(placed.size()); ++i) {
        if (i == skip1 || i == skip2) continue;
        std::optional<double> t;
        try {
            t = geom::ray_sphere_first_hit({pos, vel}, {placed[static_cast<std::size_t>(i)], eps},
                                           i == depart ? kDepartEps : 0.0);
        } catch (const InsideSphereError&) {
            continue;
        }
        if (t && *t < t_max && (!best || *t < best->t)) best = PlacedHit{*t, i};
    }
    return best;
}

// Scatterer center that turns incoming w into outgoing omega at contact
// point q; empty when the deflection degenerates (omega ~ w).
std::optional<Vec3> deflection_center(const Vec3& q, const UnitVec3& w, const UnitVec3& omega,
                                      double eps) {
    const Vec3 diff = w.vec() - omega.vec();
    const double dn = geom::norm(diff);
    if (dn < kDegenerateTol) return std::nullopt;
    return q + (eps / dn) * diff;
}

// ---- two-sphere chain, shared by Z and the coupled X ----

struct ChainEvent {
    double t = 0.0;  // offset from the chain's start
    Vec3 pos{};
    UnitVec3 vel{};  // post-reflection
};

struct SegInterrupt {
    double t = 0.0;
    Divergence why = Divergence::none;
    int placed = -1;
};

struct ChainResult {
    std::vector<std::pair<Vec3, Vec3>> segments;  // traversed straight pieces
    std::vector<ChainEvent> events;
    Vec3 end_pos{};
    UnitVec3 end_vel{};
    double duration = 0.0;  // chain start to last collision
    int collisions = 0;
    int last = -1;  // 0 = remembered sphere, 1 = fresh sphere
    bool truncated = false;
    bool interrupted = false;
    Divergence reason = Divergence::none;
    double stop_t = 0.0;
    Vec3 stop_pos{};
    int hit_placed = -1;
};

// Mechanical bounce between the remembered and the fresh sphere, starting on
// the fresh one. hook(pos, vel, t_seg) may cut a segment short (the coupled
// X's old spheres and fresh interrupts); the arithmetic of uninterrupted
// segments does not depend on the hook, so Z's chain and X's chain agree
// bitwise until an interrupt actually fires.
template <class Hook>
ChainResult run_chain(const Vec3& start, const UnitVec3& v0, const Vec3& c_old, const Vec3& c_new,
                      double eps, Hook&& hook) {
    ChainResult r;
    Vec3 pos = start;
    UnitVec3 w = v0;
    int cur = 1;
    double clock = 0.0;
    for (;;) {
        const std::optional<double> ta =
            geom::ray_sphere_first_hit({pos, w}, {c_old, eps}, cur == 0 ? kDepartEps : 0.0);
        const std::optional<double> tb =
            geom::ray_sphere_first_hit({pos, w}, {c_new, eps}, cur == 1 ? kDepartEps : 0.0);
        int nxt;
        double t_seg;
        if (ta && (!tb || *ta <= *tb)) {
            nxt = 0;
            t_seg = *ta;
        } else if (tb) {
            nxt = 1;
            t_seg = *tb;
        } else {
            r.end_pos = pos;
            r.end_vel = w;
            return r;
        }
        if (auto stop = hook(pos, w, t_seg)) {
            r.interrupted = true;
            r.reason = stop->why;
            r.hit_placed = stop->placed;
            r.stop_t = clock + stop->t;
            r.stop_pos = pos + stop->t * w.vec();
            r.segments.emplace_back(pos, r.stop_pos);
            r.end_pos = r.stop_pos;
            r.end_vel = w;
            return r;
        }
        if (r.collisions >= kChainMax) {
            r.truncated = true;
            r.end_pos = pos;
            r.end_vel = w;
            return r;
        }
        const Vec3 hitp = pos + t_seg * w.vec();
        r.segments.emplace_back(pos, hitp);
        clock += t_seg;
        w = geom::reflect(w, UnitVec3(hitp - (nxt == 0 ? c_old : c_new)));
        pos = hitp;
        cur = nxt;
        ++r.collisions;
        r.duration = clock;
        r.last = nxt;
        r.events.push_back({clock, pos, w});
    }
}

struct NoHook {
    std::optional<SegInterrupt> operator()(const Vec3&, const UnitVec3&, double) const {
        return std::nullopt;
    }
};

// ---- Z leg ----

struct ZLegObs {
    bool degenerate = false;
    bool shadow = false;
    bool recollision = false;
    Vec3 q_new{};
    Vec3 c_new{};
    double t_contact = 0.0;
    double beta = 0.0;
    int chain_collisions = 0;
    std::vector<ChainEvent> chain_events;
};

// One Z leg from given draws; obs captures the verdicts (shared with the
// coupled X) and the chain events for trace recording.
void z_leg_core(ZMemoryState& st, double xi, const UnitVec3& omega, ZLegObs& obs) {
    const Vec3 q_new = st.pos + xi * st.vel.vec();
    const double t_new = st.t + xi;
    obs.q_new = q_new;
    obs.t_contact = t_new;
    const std::optional<Vec3> c_new = deflection_center(q_new, st.vel, omega, st.eps);
    if (!c_new) {
        obs.degenerate = true;
        st.pos = q_new;
        st.t = t_new;
        return;
    }
    obs.c_new = *c_new;
    if (st.has_prev && geom::point_segment_distance(*c_new, st.prev_a, st.prev_b) < st.eps) {
        // the scatterer would have blocked the previous leg, so it cannot be
        // there: void the contact, keep flying
        obs.shadow = true;
        st.pos = q_new;
        st.t = t_new;
        return;
    }
    const bool recoll =
        st.has_memory &&
        geom::ray_sphere_first_hit({q_new, omega}, {st.memory, st.eps}, 0.0).has_value();
    if (!recoll) {
        st.prev_a = st.flight_start;
        st.prev_b = q_new;
        st.has_prev = true;
        st.memory = *c_new;
        st.has_memory = true;
        st.pos = q_new;
        st.vel = omega;
        st.t = t_new;
        st.flight_start = q_new;
        st.flight_start_t = t_new;
        return;
    }
    obs.recollision = true;
    ChainResult ch = run_chain(q_new, omega, st.memory, *c_new, st.eps, NoHook{});
    obs.beta = (t_new - st.flight_start_t) + ch.duration;
    obs.chain_collisions = 2 + ch.collisions;
    if (ch.last == 1) st.memory = *c_new;  // else the remembered sphere was hit last
    st.prev_a = ch.segments.back().first;
    st.prev_b = ch.segments.back().second;
    st.has_prev = true;
    st.pos = ch.end_pos;
    st.vel = ch.end_vel;
    st.t = t_new + ch.duration;
    st.flight_start = ch.end_pos;
    st.flight_start_t = st.t;
    obs.chain_events = std::move(ch.events);
}

// ---- standalone X step (also X's post-divergence evolution) ----

XEvent x_step_impl(ExplorationState& st, rng::Stream& s) {
    const double xi = s.next_exp() / st.rate;
    const UnitVec3 omega = sampling::sample_unit_sphere(s);
    const auto hit =
        first_placed_hit(st.placed, st.eps, st.pos, st.vel, xi, st.current_sphere, -1, -1);
    if (hit) {
        const Vec3 hitp = st.pos + hit->t * st.vel.vec();
        st.capsules.push_back(make_capsule(st.flight_start, hitp, st.eps));
        st.vel = geom::reflect(st.vel, UnitVec3(hitp - st.placed[static_cast<std::size_t>(hit->idx)]));
        st.t += hit->t;
        st.pos = hitp;
        st.current_sphere = hit->idx;
        st.flight_start = hitp;
        return {XEventKind::placed_collision, st.t, st.pos};
    }
    const Vec3 q_new = st.pos + xi * st.vel.vec();
    st.t += xi;
    const std::optional<Vec3> c = deflection_center(q_new, st.vel, omega, st.eps);
    if (!c) {
        st.pos = q_new;
        return {XEventKind::degenerate_void, st.t, st.pos};
    }
    if (near_any_capsule(st.capsules, *c, st.eps)) {
        // the scatterer would sit inside already-explored territory: the
        // contact is void and the flight continues (memoryless restart)
        st.pos = q_new;
        return {XEventKind::capsule_void, st.t, st.pos};
    }
    const std::size_t cap_count = st.capsules.size();
    st.capsules.push_back(make_capsule(st.flight_start, q_new, st.eps));
    if (near_any_capsule(st.capsules, *c, st.eps * (1.0 - 1e-9)))
        throw CapsuleInconsistencyError("exploration: accepted center inside recorded past");
    st.placed.push_back(*c);
    st.placed_caps.push_back(cap_count);
    st.pos = q_new;
    st.vel = omega;
    st.current_sphere = static_cast<int>(st.placed.size()) - 1;
    st.flight_start = q_new;
    return {XEventKind::fresh_collision, st.t, st.pos};
}

void x_run_to_horizon(ExplorationState& x, rng::Stream& aux, double horizon, CoupledPaths& out) {
    while (x.t < horizon) {
        const XEvent ev = x_step_impl(x, aux);
        if (ev.kind == XEventKind::fresh_collision || ev.kind == XEventKind::placed_collision)
            out.x_trace.push_back({ev.t, ev.pos, x.vel.vec()});
        else if (ev.kind == XEventKind::capsule_void)
            ++out.capsule_rejects;
    }
}

// One coupled X leg from the shared draws; Z's verdicts arrive via obs.
// Returns the divergence class (none while X and Z stay glued).
Divergence x_leg_coupled(ExplorationState& x, const ZLegObs& obs, double xi,
                         const UnitVec3& omega, rng::Stream& aux, CoupledPaths& out) {
    const auto hit =
        first_placed_hit(x.placed, x.eps, x.pos, x.vel, xi, x.current_sphere, -1, -1);
    if (hit) {
        // an old sphere the memoryless process has forgotten blocks the flight
        const Vec3 hitp = x.pos + hit->t * x.vel.vec();
        x.capsules.push_back(make_capsule(x.flight_start, hitp, x.eps));
        x.vel = geom::reflect(x.vel, UnitVec3(hitp - x.placed[static_cast<std::size_t>(hit->idx)]));
        x.t += hit->t;
        x.pos = hitp;
        x.current_sphere = hit->idx;
        x.flight_start = hitp;
        out.x_trace.push_back({x.t, x.pos, x.vel.vec()});
        return Divergence::placed_hit;
    }
    const Vec3 q_new = x.pos + xi * x.vel.vec();
    const double t_new = x.t + xi;
    if (obs.degenerate) {
        x.pos = q_new;
        x.t = t_new;
        return Divergence::none;
    }
    if (obs.shadow) {
        // rejected by the newest capsule, identically on both sides
        ++out.capsule_rejects;
        x.pos = q_new;
        x.t = t_new;
        return Divergence::none;
    }
    if (near_any_capsule(x.capsules, obs.c_new, x.eps)) {
        // an older capsule vetoes a scatterer Z happily adopts
        ++out.capsule_rejects;
        x.pos = q_new;
        x.t = t_new;
        return Divergence::old_capsule;
    }
    const std::size_t cap_count = x.capsules.size();
    x.capsules.push_back(make_capsule(x.flight_start, q_new, x.eps));
    if (near_any_capsule(x.capsules, obs.c_new, x.eps * (1.0 - 1e-9)))
        throw CapsuleInconsistencyError("exploration: accepted center inside recorded past");
    const int idx_new = static_cast<int>(x.placed.size());
    const int idx_old = x.current_sphere;
    x.placed.push_back(obs.c_new);
    x.placed_caps.push_back(cap_count);
    out.x_trace.push_back({t_new, q_new, omega.vec()});
    if (!obs.recollision) {
        x.pos = q_new;
        x.vel = omega;
        x.t = t_new;
        x.current_sphere = idx_new;
        x.flight_start = q_new;
        return Divergence::none;
    }
    // the coupled chain; X additionally watches old spheres and fresh
    // contacts (one auxiliary exponential per segment, always consumed)
    auto hook = [&](const Vec3& p, const UnitVec3& w, double t_seg) -> std::optional<SegInterrupt> {
        const double t_int = aux.next_exp() / x.rate;
        const auto ph = first_placed_hit(x.placed, x.eps, p, w, t_seg, -1, idx_old, idx_new);
        if (ph && (t_int >= t_seg || ph->t < t_int))
            return SegInterrupt{ph->t, Divergence::placed_hit, ph->idx};
        if (t_int < t_seg) return SegInterrupt{t_int, Divergence::bounce_interrupt, -1};
        return std::nullopt;
    };
    ChainResult ch = run_chain(q_new, omega, x.placed[static_cast<std::size_t>(idx_old)],
                               obs.c_new, x.eps, hook);
    for (const auto& seg : ch.segments)
        x.capsules.push_back(make_capsule(seg.first, seg.second, x.eps));
    for (const auto& ev : ch.events) out.x_trace.push_back({t_new + ev.t, ev.pos, ev.vel.vec()});
    if (!ch.interrupted) {
        x.pos = ch.end_pos;
        x.vel = ch.end_vel;
        x.t = t_new + ch.duration;
        x.current_sphere = ch.last == 0 ? idx_old : idx_new;
        x.flight_start = x.pos;
        return Divergence::none;
    }
    x.t = t_new + ch.stop_t;
    x.pos = ch.stop_pos;
    x.vel = ch.end_vel;
    x.flight_start = x.pos;
    if (ch.reason == Divergence::placed_hit) {
        x.vel = geom::reflect(x.vel, UnitVec3(x.pos - x.placed[static_cast<std::size_t>(ch.hit_placed)]));
        x.current_sphere = ch.hit_placed;
        out.x_trace.push_back({x.t, x.pos, x.vel.vec()});
        return Divergence::placed_hit;
    }
    // a fresh scatterer interrupts the bounce; settle the contact on aux draws
    const UnitVec3 omega2 = sampling::sample_unit_sphere(aux);
    const std::optional<Vec3> c2 = deflection_center(x.pos, x.vel, omega2, x.eps);
    if (c2) {
        if (near_any_capsule(x.capsules, *c2, x.eps)) {
            ++out.capsule_rejects;
        } else {
            x.placed.push_back(*c2);
            x.placed_caps.push_back(x.capsules.size());
            x.vel = omega2;
            x.current_sphere = static_cast<int>(x.placed.size()) - 1;
            out.x_trace.push_back({x.t, x.pos, x.vel.vec()});
        }
    }
    return Divergence::bounce_interrupt;
}

// Revealed centers must clear every capsule recorded before their reveal.
void audit_exploration(const ExplorationState& st) {
    for (std::size_t i = 0; i < st.placed.size(); ++i)
        for (std::size_t j = 0; j < st.placed_caps[i]; ++j)
            if (capsule_near(st.capsules[j], st.placed[i], st.eps * (1.0 - 1e-9)))
                throw CapsuleInconsistencyError("exploration: center inside prior capsule");
}

// First time two piecewise-linear paths separate by more than tol.
std::optional<double> first_divergence_time(const std::vector<TracePoint>& xa,
                                            const std::vector<TracePoint>& xb, double tol) {
    if (xa.empty() || xb.empty()) return std::nullopt;
    std::vector<double> ts;
    ts.reserve(xa.size() + xb.size());
    for (const auto& p : xa) ts.push_back(p.t);
    for (const auto& p : xb) ts.push_back(p.t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const double t0 = ts[i], t1 = ts[i + 1];
        const Vec3 d0 = position_at(xa, t0) - position_at(xb, t0);
        if (geom::norm(d0) > tol) return t0;
        const Vec3 d1 = position_at(xa, t1) - position_at(xb, t1);
        if (!(geom::norm(d1) > tol)) continue;
        const Vec3 dd = d1 - d0;
        const double a = geom::norm2(dd);
        if (a <= 0.0) continue;
        const double b = 2.0 * geom::dot(d0, dd);
        const double c = geom::norm2(d0) - tol * tol;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) continue;
        const double s = (-b + std::sqrt(disc)) / (2.0 * a);
        if (s >= 0.0 && s <= 1.0) return t0 + s * (t1 - t0);
    }
    return std::nullopt;
}

enum class Which { y_only, z_and_y, all };

CoupledPaths run_processes(const GasConfig& cfg, std::uint64_t path_id, Which which) {
    cfg.validate();
    const double eps = cfg.eps;
    const double rate = cfg.contact_rate();
    const double T = cfg.horizon;
    rng::Stream shared(cfg.seed, rng::tag_salt("lorentz/shared") ^ path_id);
    rng::Stream aux(cfg.seed, rng::tag_salt("lorentz/aux") ^ path_id);
    rng::Stream init(cfg.seed, rng::tag_salt("lorentz/init") ^ path_id);

    CoupledPaths out;
    const Vec3 origin{0.0, 0.0, 0.0};
    // An isotropic start: a fixed initial direction would leave a persistent
    // O(1) mean drift in the endpoint law that no horizon washes out.
    const UnitVec3 v0 = sampling::sample_unit_sphere(init);
    const bool do_z = which != Which::y_only;
    const bool do_x = which == Which::all;

    Vec3 y_pos = origin;
    UnitVec3 y_vel = v0;
    double y_t = 0.0;
    out.y_trace.push_back({0.0, origin, v0.vec()});

    ZMemoryState z;
    z.eps = eps;
    z.vel = v0;
    if (do_z) out.z_trace.push_back({0.0, origin, v0.vec()});

    ExplorationState x;
    x.eps = eps;
    x.rate = rate;
    x.vel = v0;
    bool x_diverged = false;
    if (do_x) out.x_trace.push_back({0.0, origin, v0.vec()});

    for (std::uint64_t leg = 0;; ++leg) {
        const bool need_y = y_t < T;
        const bool need_z = do_z && z.t < T;
        const bool need_x = do_x && !x_diverged && x.t < T;
        if (!need_y && !need_z && !need_x) break;
        shared.skip_to(4 * leg);
        const double xi_raw = shared.next_exp();
        const UnitVec3 omega = sampling::sample_unit_sphere(shared);
        const double xi = xi_raw / rate;

        if (need_y) {
            y_pos += xi_raw * y_vel.vec();
            y_t += xi_raw;
            y_vel = omega;
            out.y_trace.push_back({y_t, y_pos, y_vel.vec()});
        }
        if (!cfg.interactions) {
            // no scatterer memory anywhere: all three processes walk in step
            if (need_z) {
                z.pos += xi * z.vel.vec();
                z.t += xi;
                z.vel = omega;
                out.z_trace.push_back({z.t, z.pos, z.vel.vec()});
                out.leg_flags.push_back({});
            }
            if (need_x) {
                x.pos += xi * x.vel.vec();
                x.t += xi;
                x.vel = omega;
                out.x_trace.push_back({x.t, x.pos, x.vel.vec()});
                ++out.coupled_legs;
            }
            continue;
        }
        ZLegObs obs;
        if (need_z) {
            z_leg_core(z, xi, omega, obs);
            out.leg_flags.push_back({obs.shadow, obs.recollision});
            if (obs.degenerate) ++out.degenerate;
            if (!obs.degenerate && !obs.shadow) {
                out.z_trace.push_back({obs.t_contact, obs.q_new, omega.vec()});
                for (const auto& ev : obs.chain_events)
                    out.z_trace.push_back({obs.t_contact + ev.t, ev.pos, ev.vel.vec()});
            }
            if (obs.recollision) {
                out.z_trap_times.push_back(obs.beta);
                out.z_chain_collisions.push_back(obs.chain_collisions);
            }
        }
        if (need_x) {
            const Divergence d = x_leg_coupled(x, obs, xi, omega, aux, out);
            if (d == Divergence::none) {
                ++out.coupled_legs;
            } else {
                x_diverged = true;
                out.divergence = d;
                out.divergence_leg = leg;
                x_run_to_horizon(x, aux, T, out);
            }
        }
    }
    out.legs = out.leg_flags.size();
    if (do_x) {
        audit_exploration(x);
        out.mismatch_time = first_divergence_time(out.x_trace, out.z_trace, kMismatchTol);
    }
    return out;
}

double component(const Vec3& v, int c) { return c == 0 ? v.x : c == 1 ? v.y : v.z; }

Which which_for(Process p) {
    return p == Process::X ? Which::all : p == Process::Z ? Which::z_and_y : Which::y_only;
}

const std::vector<TracePoint>& trace_for(const CoupledPaths& run, Process p) {
    return p == Process::X ? run.x_trace : p == Process::Z ? run.z_trace : run.y_trace;
}

}  // namespace

void GasConfig::validate() const {
    if (!(eps > 0.0) || !(eps < 0.5)) throw PreconditionError("gas: eps must lie in (0, 0.5)");
    if (!(horizon > 0.0)) throw PreconditionError("gas: horizon must be positive");
    if (!(rho >= 0.0)) throw PreconditionError("gas: rho must be nonnegative");
    if (n_paths == 0) throw PreconditionError("gas: n_paths must be positive");
}

double GasConfig::contact_rate() const {
    // rho = 0 selects the reference intensity 1/(pi eps^2); its contact rate
    // is pinned to exactly 1 so shared flights match Y's bitwise.
    return rho == 0.0 ? 1.0 : rho * kPi * eps * eps;
}

Capsule make_capsule(const Vec3& a, const Vec3& b, double eps) {
    Capsule c;
    c.a = a;
    c.b = b;
    c.lo = {std::min(a.x, b.x) - eps, std::min(a.y, b.y) - eps, std::min(a.z, b.z) - eps};
    c.hi = {std::max(a.x, b.x) + eps, std::max(a.y, b.y) + eps, std::max(a.z, b.z) + eps};
    return c;
}

Vec3 position_at(const std::vector<TracePoint>& trace, double t) {
    if (trace.empty()) throw PreconditionError("position_at: empty trace");
    if (t <= trace.front().t) return trace.front().pos;
    auto it = std::upper_bound(trace.begin(), trace.end(), t,
                               [](double v, const TracePoint& p) { return v < p.t; });
    const TracePoint& p = *(it - 1);
    return p.pos + (t - p.t) * p.vel;
}

CoupledPaths run_coupled(const GasConfig& cfg, std::uint64_t path_id) {
    return run_processes(cfg, path_id, Which::all);
}

YStep y_step(rng::Stream& s) {
    const double xi = s.next_exp();
    return {xi, sampling::sample_unit_sphere(s)};
}

XEvent x_step(ExplorationState& st, rng::Stream& s) {
    if (!(st.eps > 0.0)) throw PreconditionError("x_step: eps must be positive");
    if (!(st.rate > 0.0)) throw PreconditionError("x_step: rate must be positive");
    if (st.placed.size() != st.placed_caps.size())
        throw PreconditionError("x_step: placed/placed_caps out of sync");
    if (st.current_sphere < -1 || st.current_sphere >= static_cast<int>(st.placed.size()))
        throw PreconditionError("x_step: current_sphere out of range");
    return x_step_impl(st, s);
}

ZLegOutcome z_step(ZMemoryState& st, rng::Stream& s) {
    if (!(st.eps > 0.0)) throw PreconditionError("z_step: eps must be positive");
    const double xi = s.next_exp();
    const UnitVec3 omega = sampling::sample_unit_sphere(s);
    ZLegObs obs;
    z_leg_core(st, xi, omega, obs);
    return {obs.shadow, obs.recollision, obs.degenerate, obs.beta, obs.chain_collisions};
}

KernelCheck scattering_kernel_check(std::uint64_t budget, std::uint64_t seed) {
    if (budget < 1000) throw PreconditionError("kernel check: budget must be at least 1000");
    rng::Stream s(seed, rng::tag_salt("lorentz/kernel"));
    const UnitVec3 w(0.0, 0.0, 1.0);
    int nz = 0, naz = 0;
    estimators::equal_area_bins(48, nz, naz);
    std::vector<std::uint64_t> counts(48, 0);
    std::vector<double> azimuth, transfer;
    azimuth.reserve(budget);
    transfer.reserve(budget);
    for (std::uint64_t i = 0; i < budget; ++i) {
        // cosine-weighted impact normal on the hemisphere facing the motion
        const double c = std::sqrt(s.next_double());
        const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
        const double phi = 2.0 * kPi * s.next_double();
        const UnitVec3 n(Vec3{sn * std::cos(phi), sn * std::sin(phi), -c});
        const UnitVec3 out = geom::reflect(w, n);
        const int bin = estimators::equal_area_bin_index(out.vec(), nz, naz);
        ++counts[static_cast<std::size_t>(bin)];
        azimuth.push_back(std::atan2(out.y(), out.x()));
        transfer.push_back(geom::angle_between(out.vec() - w.vec(), -w.vec()));
    }
    KernelCheck r;
    r.budget = budget;
    r.chi2_p = stats::chi_square_uniform(counts).p_value;
    r.azimuth_ks_p =
        stats::ks_test(std::move(azimuth), [](double v) { return (v + kPi) / (2.0 * kPi); })
            .p_value;
    r.transfer_ks_p = stats::ks_test(std::move(transfer), [](double a) {
                          const double sa = std::sin(std::clamp(a, 0.0, kPi / 2.0));
                          return sa * sa;
                      }).p_value;
    return r;
}

double y_msd_exact(double t) {
    if (!(t >= 0.0)) throw PreconditionError("y_msd_exact: t must be nonnegative");
    return 2.0 * (t - 1.0 + std::exp(-t));
}

std::vector<MsdPoint> msd_curve(Process process, const std::vector<double>& t_grid,
                                std::uint64_t n_paths, const GasConfig& cfg) {
    cfg.validate();
    if (t_grid.empty()) throw PreconditionError("msd: grid must be nonempty");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] >= 0.0) || !(t_grid[i] <= cfg.horizon))
            throw PreconditionError("msd: grid times must lie in [0, horizon]");
        if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
            throw PreconditionError("msd: grid must be strictly increasing");
    }
    if (n_paths == 0) throw PreconditionError("msd: n_paths must be positive");
    const Which which = which_for(process);
    const std::uint64_t chunk = process == Process::Y ? 512 : 16;
    const std::uint64_t n_chunks = (n_paths + chunk - 1) / chunk;
    using Acc = std::vector<stats::Accumulator>;
    const Acc total = parallel::run_chunked<Acc>(
        n_chunks, cfg.threads,
        [&](std::uint64_t ci) {
            Acc acc(t_grid.size());
            const std::uint64_t lo = ci * chunk;
            const std::uint64_t hi = std::min(n_paths, lo + chunk);
            for (std::uint64_t p = lo; p < hi; ++p) {
                const CoupledPaths run = run_processes(cfg, p, which);
                const auto& tr = trace_for(run, process);
                for (std::size_t k = 0; k < t_grid.size(); ++k)
                    acc[k].add(geom::norm2(position_at(tr, t_grid[k])));
            }
            return acc;
        },
        [](Acc& a, const Acc& b) {
            if (a.empty()) {
                a = b;
                return;
            }
            for (std::size_t k = 0; k < a.size(); ++k) a[k].merge(b[k]);
        });
    std::vector<MsdPoint> out;
    out.reserve(t_grid.size());
    for (std::size_t k = 0; k < t_grid.size(); ++k)
        out.push_back({t_grid[k], total[k].mean(), total[k].stderr_mean()});
    return out;
}

GaussianityCheck increment_gaussianity(Process process, double T, std::uint64_t n_paths,
                                       const GasConfig& cfg) {
    cfg.validate();
    if (!(T >= 100.0)) throw PreconditionError("gaussianity: requires T >= 100");
    if (n_paths < 100) throw PreconditionError("gaussianity: requires at least 100 paths");
    GasConfig run_cfg = cfg;
    run_cfg.horizon = T;
    const Which which = which_for(process);
    const std::uint64_t chunk = process == Process::Y ? 512 : 16;
    const std::uint64_t n_chunks = (n_paths + chunk - 1) / chunk;
    using Ends = std::vector<Vec3>;
    const Ends ends = parallel::run_chunked<Ends>(
        n_chunks, run_cfg.threads,
        [&](std::uint64_t ci) {
            Ends part;
            const std::uint64_t lo = ci * chunk;
            const std::uint64_t hi = std::min(n_paths, lo + chunk);
            part.reserve(static_cast<std::size_t>(hi - lo));
            for (std::uint64_t p = lo; p < hi; ++p) {
                const CoupledPaths run = run_processes(run_cfg, p, which);
                part.push_back(position_at(trace_for(run, process), T));
            }
            return part;
        },
        [](Ends& a, const Ends& b) { a.insert(a.end(), b.begin(), b.end()); });

    GaussianityCheck g;
    g.n_paths = n_paths;
    stats::Accumulator r2;
    for (const auto& e : ends) r2.add(geom::norm2(e));
    g.msd = r2.mean();
    const double scale = std::sqrt(g.msd / 3.0);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> zc;
        zc.reserve(ends.size());
        for (const auto& e : ends) zc.push_back(component(e, c) / scale);
        const auto ks = stats::ks_test(std::move(zc), [](double v) { return stats::normal_cdf(v); });
        g.ks[static_cast<std::size_t>(c)] = ks.statistic;
        g.ks_p[static_cast<std::size_t>(c)] = ks.p_value;
    }
    const double n = static_cast<double>(ends.size());
    std::array<double, 3> mean{};
    for (const auto& e : ends)
        for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += component(e, c) / n;
    std::array<double, 3> var{};
    std::array<double, 3> cov{};  // xy, xz, yz
    for (const auto& e : ends) {
        const double dx = e.x - mean[0], dy = e.y - mean[1], dz = e.z - mean[2];
        var[0] += dx * dx / n;
        var[1] += dy * dy / n;
        var[2] += dz * dz / n;
        cov[0] += dx * dy / n;
        cov[1] += dx * dz / n;
        cov[2] += dy * dz / n;
    }
    g.corr[0] = cov[0] / std::sqrt(var[0] * var[1]);
    g.corr[1] = cov[1] / std::sqrt(var[0] * var[2]);
    g.corr[2] = cov[2] / std::sqrt(var[1] * var[2]);
    g.corr_se = 1.0 / std::sqrt(n);
    return g;
}

MismatchStats mismatch_stats(const GasConfig& cfg) {
    cfg.validate();
    struct Part {
        std::uint64_t trials = 0, div = 0, placed = 0, oldc = 0, binter = 0;
        std::uint64_t shadow = 0, recoll = 0, rejects = 0, degen = 0, paths = 0;
    };
    const Part tot = parallel::run_chunked<Part>(
        cfg.n_paths, cfg.threads,
        [&](std::uint64_t p) {
            const CoupledPaths run = run_processes(cfg, p, Which::all);
            Part pt;
            pt.paths = 1;
            const bool div = run.divergence != Divergence::none;
            pt.trials = run.coupled_legs + (div ? 1 : 0);  // legs at risk
            if (div) {
                pt.div = 1;
                if (run.divergence == Divergence::placed_hit) pt.placed = 1;
                if (run.divergence == Divergence::old_capsule) pt.oldc = 1;
                if (run.divergence == Divergence::bounce_interrupt) pt.binter = 1;
            }
            for (const auto& f : run.leg_flags) {
                if (f.shadow) ++pt.shadow;
                if (f.recollision) ++pt.recoll;
            }
            pt.rejects = run.capsule_rejects;
            pt.degen = run.degenerate;
            return pt;
        },
        [](Part& a, const Part& b) {
            a.trials += b.trials;
            a.div += b.div;
            a.placed += b.placed;
            a.oldc += b.oldc;
            a.binter += b.binter;
            a.shadow += b.shadow;
            a.recoll += b.recoll;
            a.rejects += b.rejects;
            a.degen += b.degen;
            a.paths += b.paths;
        });
    MismatchStats m;
    m.coupled_legs = tot.trials;
    m.divergences = tot.div;
    m.placed_hit = tot.placed;
    m.old_capsule = tot.oldc;
    m.bounce_interrupt = tot.binter;
    m.shadow_legs = tot.shadow;
    m.recollision_legs = tot.recoll;
    m.capsule_rejects = tot.rejects;
    m.degenerate = tot.degen;
    m.paths = tot.paths;
    if (tot.trials > 0) {
        m.per_leg_rate = static_cast<double>(tot.div) / static_cast<double>(tot.trials);
        m.std_err = std::sqrt(std::max(0.0, m.per_leg_rate * (1.0 - m.per_leg_rate) /
                                                static_cast<double>(tot.trials)));
    }
    return m;
}

}  // namespace recollide::lorentz
