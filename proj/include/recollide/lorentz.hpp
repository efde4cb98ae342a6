#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "recollide/geom.hpp"
#include "recollide/rng.hpp"

// The three gas processes on shared randomness: the exploration process X
// (Poisson scatterers revealed on the fly, consistency with the explored
// past enforced by capsule rejection), the Markovian flight process Y, and
// the single-scatterer-memory process Z (shadowing voids the new scatterer,
// direct recollisions run the two-sphere bounce). X and Z consume identical
// draws and stay bit-identical until a genuinely semantic difference (an
// old sphere or capsule, or a fresh interrupt inside a bounce) splits them.
namespace recollide::lorentz {

using geom::UnitVec3;
using geom::Vec3;

struct GasConfig {
    double eps = 0.05;      // obstacle radius
    double rho = 0.0;       // scatterer intensity; 0 selects 1/(pi eps^2),
                            // which makes the fresh-contact rate exactly 1
                            // (bit-compatible with Y's unit-rate flights)
    double horizon = 100.0;
    std::uint64_t seed = 12345;
    std::uint64_t n_paths = 1;
    int threads = 0;
    bool interactions = true;  // false: no scatterer memory at all; X = Y = Z

    void validate() const;       // PreconditionError on bad fields
    double contact_rate() const;
};

struct TracePoint {
    double t = 0.0;
    Vec3 pos{0.0, 0.0, 0.0};
    Vec3 vel{0.0, 0.0, 1.0};
};

// Piecewise-linear position lookup (clamped to the trace's time range).
Vec3 position_at(const std::vector<TracePoint>& trace, double t);

struct LegFlags {
    bool shadow = false;       // new scatterer would have blocked the previous leg
    bool recollision = false;  // outgoing ray returns to the remembered scatterer
};

enum class Divergence { none, placed_hit, old_capsule, bounce_interrupt };

struct CoupledPaths {
    std::vector<TracePoint> x_trace, y_trace, z_trace;
    std::vector<LegFlags> leg_flags;           // per Z leg
    std::optional<double> mismatch_time;       // first |X(t) - Z(t)| > 1e-9
    Divergence divergence = Divergence::none;
    std::uint64_t divergence_leg = 0;
    std::uint64_t legs = 0;                    // Z legs to the horizon
    std::uint64_t coupled_legs = 0;            // legs completed before divergence
    std::uint64_t degenerate = 0;              // omega ~ velocity draws, voided
    std::uint64_t capsule_rejects = 0;         // X proposals rejected by any capsule
    std::vector<double> z_trap_times;          // bounce time per recollision leg
    std::vector<int> z_chain_collisions;       // collision count per recollision leg
};

// One coupled path. Draw slots are indexed by leg (4 per leg: flight, two
// direction uniforms, one spare), so all three processes read the same
// randomness regardless of which events fire; X's bounce-internal interrupt
// checks come from a separate auxiliary stream, and X runs on that stream
// alone once diverged. Throws CapsuleInconsistencyError if a revealed
// scatterer ever contradicts the recorded past (must not happen).
CoupledPaths run_coupled(const GasConfig& cfg, std::uint64_t path_id = 0);

struct YStep {
    double xi = 0.0;
    UnitVec3 w{0.0, 0.0, 1.0};
};

// Unit-rate flight and fresh uniform direction.
YStep y_step(rng::Stream& s);

// Uniformity of the reflected direction under cosine-weighted impact
// normals: chi-square on equal-area bins of the outgoing direction, KS of
// its azimuth around the incoming axis, KS of the momentum-transfer polar
// angle against the cosine-hemisphere law sin^2.
struct KernelCheck {
    double chi2_p = 0.0;
    double azimuth_ks_p = 0.0;
    double transfer_ks_p = 0.0;
    std::uint64_t budget = 0;
};

KernelCheck scattering_kernel_check(std::uint64_t budget, std::uint64_t seed);

// Exploration-process state for the standalone stepper: capsules are the
// eps-tubes around every completed flight segment, placed holds revealed
// centers, placed_caps the capsule count at each center's reveal.
struct Capsule {
    Vec3 a, b;    // segment endpoints
    Vec3 lo, hi;  // eps-padded bounding box
};

Capsule make_capsule(const Vec3& a, const Vec3& b, double eps);

struct ExplorationState {
    Vec3 pos{0.0, 0.0, 0.0};
    UnitVec3 vel{0.0, 0.0, 1.0};
    double t = 0.0;
    Vec3 flight_start{0.0, 0.0, 0.0};
    std::vector<Capsule> capsules;
    std::vector<Vec3> placed;
    std::vector<std::size_t> placed_caps;
    int current_sphere = -1;  // placed index the tracer departs, -1 if none
    double eps = 0.05;
    double rate = 1.0;  // fresh-contact rate rho * pi * eps^2
};

enum class XEventKind { fresh_collision, placed_collision, capsule_void, degenerate_void };

struct XEvent {
    XEventKind kind = XEventKind::fresh_collision;
    double t = 0.0;
    Vec3 pos{0.0, 0.0, 0.0};
};

// One thinning step: deterministic first hit among placed scatterers
// preempts the proposed fresh contact; accepted fresh centers are rejected
// against every recorded capsule (a rejected proposal voids the contact and
// the flight continues by memorylessness). Throws CapsuleInconsistencyError
// if an accepted center sits strictly inside the recorded past.
XEvent x_step(ExplorationState& st, rng::Stream& s);

// Z-process state: last scatterer center plus the previous completed leg.
struct ZMemoryState {
    Vec3 pos{0.0, 0.0, 0.0};
    UnitVec3 vel{0.0, 0.0, 1.0};
    double t = 0.0;
    Vec3 flight_start{0.0, 0.0, 0.0};  // last collision point; voids extend the flight
    double flight_start_t = 0.0;
    bool has_memory = false;
    Vec3 memory{0.0, 0.0, 0.0};
    bool has_prev = false;
    Vec3 prev_a{0.0, 0.0, 0.0}, prev_b{0.0, 0.0, 0.0};
    double eps = 0.05;
};

struct ZLegOutcome {
    bool shadow = false;
    bool recollision = false;
    bool degenerate = false;
    double beta = 0.0;         // flight + bounce time when recollision fired
    int chain_collisions = 0;  // total collisions of the two-sphere chain
};

// One Z leg on sequentially drawn (flight, direction) randomness: shadowing
// voids the new scatterer (velocity kept), a direct recollision runs the
// mechanical bounce between the remembered and the new sphere, otherwise a
// plain Markov step. Degenerate direction draws (omega ~ velocity) void the
// leg and are flagged.
ZLegOutcome z_step(ZMemoryState& st, rng::Stream& s);

enum class Process { X, Y, Z };

struct MsdPoint {
    double t = 0.0;
    double msd = 0.0;
    double std_err = 0.0;
};

std::vector<MsdPoint> msd_curve(Process process, const std::vector<double>& t_grid,
                                std::uint64_t n_paths, const GasConfig& cfg);

// Exact Y mean squared displacement 2(t - 1 + e^{-t}) from the e^{-s}
// velocity autocorrelation of unit-rate flights.
double y_msd_exact(double t);

struct GaussianityCheck {
    std::array<double, 3> ks{};
    std::array<double, 3> ks_p{};
    std::array<double, 3> corr{};  // xy, xz, yz component correlations
    double corr_se = 0.0;
    double msd = 0.0;
    std::uint64_t n_paths = 0;
};

// Components of the diffusively rescaled endpoint against the standard
// normal law. Requires T >= 100.
GaussianityCheck increment_gaussianity(Process process, double T, std::uint64_t n_paths,
                                       const GasConfig& cfg);

struct MismatchStats {
    double per_leg_rate = 0.0;
    double std_err = 0.0;
    std::uint64_t coupled_legs = 0;
    std::uint64_t divergences = 0;
    std::uint64_t placed_hit = 0;
    std::uint64_t old_capsule = 0;
    std::uint64_t bounce_interrupt = 0;
    std::uint64_t shadow_legs = 0;
    std::uint64_t recollision_legs = 0;
    std::uint64_t capsule_rejects = 0;
    std::uint64_t degenerate = 0;
    std::uint64_t paths = 0;
};

// Per-leg X/Z divergence hazard over cfg.n_paths coupled paths.
MismatchStats mismatch_stats(const GasConfig& cfg);

}  // namespace recollide::lorentz
