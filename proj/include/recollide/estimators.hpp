#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recollide/geom.hpp"

// Monte Carlo estimators for the recollision geometry: tail masses of the
// bounce process under the lambda and mu measures, exit-distribution
// uniformity in total variation, and the indirect-return probability, each
// with standard errors and log-log slope fits.
namespace recollide::estimators {

using geom::UnitVec3;
using geom::Vec3;

// Conditioning regimes. "short" limits the flight to h <= 10 (any number of
// collisions); the long regimes require h >= 10 and split on N; the trap
// regimes threshold the last collision time and split on N.
enum class Regime { short_any, long_n3, long_n4plus, trap_n3, trap_n4plus };

const char* regime_name(Regime regime);

struct TailConfig {
    std::uint64_t budget = 1000000;  // number of conditioned draws
    std::uint64_t seed = 12345;
    int threads = 0;                 // 0 = hardware concurrency
    double h_min = 0.0;              // 0 = regime default
    double h_max = 0.0;              // 0 = regime default
    std::uint64_t min_hits = 100;    // points below this are dropped from the fit
    bool lebesgue_weight = false;    // mu suite: reweight the flight density
                                     // to Lebesgue so masses scale exactly
                                     // linearly in r (used by the ratio and
                                     // cross-measure consistency checks)
};

struct TailEstimate {
    std::vector<double> s_values;
    std::vector<double> p_hat;
    std::vector<double> std_err;
    std::vector<std::uint64_t> n_effective;  // draws landing in the event, per s
    std::vector<std::size_t> dropped;        // indices excluded from the fit
    double slope = 0.0;
    double slope_ci_lo = 0.0;
    double slope_ci_hi = 0.0;
    std::string regime;
    std::uint64_t budget = 0;
    std::uint64_t seed = 0;
    std::uint64_t degenerate = 0;  // draws discarded as geometrically degenerate
};

// Mass of {recollision, exit angle(-e, w_exit) < 1/s, regime} under
// Uni x Leb x Uni at r = 1, restricted to the regime's h-range. The flight
// time is importance-sampled against the ~h^-2 solid angle of the
// recollision cone and the exit direction is drawn inside that cone exactly,
// so every draw is a recollision and only the regime/threshold cuts remain.
// s = 0 means no angle cut. Slope is fitted when the grid has >= 4 usable
// points; with a shorter grid the fit fields stay NaN.
TailEstimate estimate_angle_tail(Regime regime, const std::vector<double>& s_grid,
                                 const TailConfig& cfg);

// Mass of {recollision, last collision time > s, N filter}; regime must be
// one of the trap regimes.
TailEstimate estimate_trap_tail(Regime regime, const std::vector<double>& s_grid,
                                const TailConfig& cfg);

// Same events under mu = Uni x EXP(1|1) x Uni at radius r in (0, 0.1]. The
// regime h-cuts sit at 10r and trap thresholds are r*s, matching the r = 1
// suite under the rescaling map. With cfg.lebesgue_weight the flight density
// is divided out, making the estimate exactly r times the lambda mass of the
// rescaled event over h in (0, 1/r].
TailEstimate estimate_mu_tails(double r, Regime regime, const std::vector<double>& s_grid,
                               const TailConfig& cfg);

// Linearity of the mu masses in the radius: short-regime recollision mass at
// r versus r/2 on independent streams, Lebesgue-weighted so the expected
// ratio is exactly 2. std_err of the ratio is by the delta method.
struct RatioCheck {
    double r = 0.0;
    double p_r = 0.0, se_r = 0.0;
    double p_half = 0.0, se_half = 0.0;
    double ratio = 0.0, se_ratio = 0.0;
    std::uint64_t budget = 0;
};

RatioCheck mu_ratio_check(double r, std::uint64_t budget, std::uint64_t seed, int threads = 0);

// Weighted least squares of log p on log s, weights (p/std_err)^2. Needs at
// least 4 points, all strictly positive. The interval is the +-1.96 sigma
// normal band of the slope.
struct SlopeFit {
    double slope = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

SlopeFit fit_loglog_slope(const std::vector<double>& s_values, const std::vector<double>& p_hat,
                          const std::vector<double>& std_err);

struct TvConfig {
    std::uint64_t budget = 4000000;  // cone draws before conditioning
    std::uint64_t seed = 12345;
    int threads = 0;
    int bins = 192;                     // equal-area bin count (nz x naz, nz:naz = 3:4)
    std::uint64_t min_conditioned = 10000;
    std::uint64_t ks_cap = 20000;       // KS subsample size (see estimate_exit_tv)
};

struct TvEstimate {
    double R = 0.0;
    double tv_hat = 0.0;        // binned empirical TV against uniform
    double tv_corrected = 0.0;  // sqrt(max(tv_hat^2 - bias^2, 0))
    double bias = 0.0;          // small-sample plug-in sqrt(bins/(2 pi n))
    double std_err = 0.0;
    int bins = 0;
    double ks_costheta = 0.0;   // KS statistic of w_exit . nu against U[-1,1]
    double ks_p = 0.0;
    std::uint64_t ks_n = 0;
    std::uint64_t n_conditioned = 0;
    std::uint64_t n_total = 0;
};

// Exit-direction uniformity at flight time R >= 10 with incoming direction
// nu: v is drawn uniformly in the cone of half-angle 2/R around -nu (a
// superset of the recollision directions), events are conditioned on N = 3,
// and w_exit is binned on an equal-area partition after rotating nu to the
// pole. The KS statistic is computed on a deterministic subsample of at most
// ks_cap cosines: the conditional law deviates from uniform at the 1/R scale
// by construction, so the KS scale is fixed by sample size, not budget.
TvEstimate estimate_exit_tv(double R, const UnitVec3& nu, const TvConfig& cfg);

// Equal-area partition helpers (nz latitude bands uniform in z, naz azimuth
// sectors); exposed for the synthetic null tests.
void equal_area_bins(int bins, int& nz, int& naz);
int equal_area_bin_index(const Vec3& w, int nz, int naz);

// Probability that a three-flight chain (Exp(1) lengths, uniform directions)
// returns to the eps-ball around its start: "endpoint" is |Y1 + Y2| <= eps,
// "entry" is the third flight segment meeting the ball (endpoint implies
// entry). Endpoint scales as eps^2, entry as eps^2 |log eps|.
enum class IndirectEvent { endpoint, entry };

struct IndirectEstimate {
    double eps = 0.0;
    double p_endpoint = 0.0, se_endpoint = 0.0;
    double p_entry = 0.0, se_entry = 0.0;
    std::uint64_t budget = 0;
};

// Both event probabilities from common draws.
IndirectEstimate indirect_prob_mc(double eps, std::uint64_t budget, std::uint64_t seed,
                                  int threads = 0);

// Deterministic counterpart by nested adaptive quadrature (relative
// tolerance ~1e-10). endpoint integrates the conditional sphere-overlap
// formula against e^{-xi1-xi2}; entry integrates the ball-entry probability
// of the third flight against the analytic density of |Y1 + Y2|.
double indirect_prob_quadrature(double eps, IndirectEvent event = IndirectEvent::entry);

}  // namespace recollide::estimators
