#include "recollide/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "recollide/bounce.hpp"
#include "recollide/errors.hpp"
#include "recollide/parallel.hpp"
#include "recollide/rng.hpp"
#include "recollide/sampling.hpp"
#include "recollide/stats.hpp"

namespace recollide::estimators {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kChunk = 65536;
// The h -> infinity mass of the recollision set decays like h^-2; the cap
// keeps the importance proposal proper while truncating ~1e-5 of it. The
// floor keeps the proposal density well defined; the (0, floor) sliver
// carries O(floor) of the short-regime mass.
constexpr double kHFloor = 1e-6;
constexpr double kHCap = 1e5;

using bounce::BounceTrace;
using bounce::RecollisionEvent;
using bounce::kE1;

bool is_trap(Regime r) { return r == Regime::trap_n3 || r == Regime::trap_n4plus; }

bool n_matches(Regime r, int n) {
    switch (r) {
        case Regime::short_any: return n >= 3;
        case Regime::long_n3:
        case Regime::trap_n3: return n == 3;
        case Regime::long_n4plus:
        case Regime::trap_n4plus: return n >= 4;
    }
    return false;
}

void default_h_range(Regime r, double& h_min, double& h_max) {
    switch (r) {
        case Regime::short_any:
            h_min = kHFloor;
            h_max = 10.0;
            break;
        case Regime::long_n3:
        case Regime::long_n4plus:
            h_min = 10.0;
            h_max = kHCap;
            break;
        default:
            h_min = kHFloor;
            h_max = kHCap;
            break;
    }
}

std::uint64_t mix_bits(std::uint64_t salt, double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof b);
    b ^= salt;
    b *= 0xBF58476D1CE4E5B9ULL;
    b ^= b >> 31;
    return b;
}

struct TailSums {
    std::vector<double> sum, sum2;
    std::vector<std::uint64_t> hits;
    std::uint64_t n = 0;
    std::uint64_t degenerate = 0;

    void init(std::size_t k) {
        sum.assign(k, 0.0);
        sum2.assign(k, 0.0);
        hits.assign(k, 0);
    }
    void merge(const TailSums& o) {
        if (sum.empty()) init(o.sum.size());
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += o.sum[i];
            sum2[i] += o.sum2[i];
            hits[i] += o.hits[i];
        }
        n += o.n;
        degenerate += o.degenerate;
    }
};

struct TailParams {
    Regime regime = Regime::short_any;
    std::vector<double> s;
    double r = 1.0;
    bool mu = false;       // flight from EXP(1|1) at radius r; else importance h at r = 1
    bool lebesgue = false;
    double h_min = 0.0, h_max = 0.0;
    std::uint64_t budget = 0, seed = 0, salt = 0;
    int threads = 0;
    std::uint64_t min_hits = 100;
};

TailSums tail_chunk(const TailParams& P, std::uint64_t chunk_idx, std::uint64_t n_draws) {
    rng::Stream st(P.seed, P.salt ^ chunk_idx);
    TailSums out;
    out.init(P.s.size());
    BounceTrace tr;
    const double e_minus_1 = std::exp(1.0) - 1.0;
    for (std::uint64_t i = 0; i < n_draws; ++i) {
        ++out.n;
        try {
            const UnitVec3 u = sampling::sample_unit_sphere(st);
            double xi, base;
            if (P.mu) {
                xi = sampling::sample_exp_unit_conditioned(st);
                base = P.lebesgue ? e_minus_1 * std::exp(xi - 1.0) : 1.0;
            } else {
                xi = sampling::sample_lambda_h(st, P.h_min, P.h_max);
                base = 1.0 / sampling::lambda_importance_density(xi, P.h_min, P.h_max);
            }
            // Exact direction cone that re-enters the first ball from the
            // second collision point: every draw below is a recollision.
            const Vec3 a = P.r * geom::normalize(kE1 - u.vec());
            const Vec3 axis = a - xi * u.vec();
            const double dist = geom::norm(axis);
            const double half = std::asin(std::min(1.0, P.r / dist));
            const auto cone = sampling::sample_cone(st, UnitVec3(axis), half);
            const double w = base * cone.cap_weight;

            RecollisionEvent ev{u, xi, cone.dir, P.r};
            bounce::simulate_bounce(ev, tr);
            if (!n_matches(P.regime, tr.n_collisions)) continue;
            const double h_units = xi / P.r;  // mu regime boundary sits at 10r
            if (P.mu && P.regime == Regime::short_any && h_units > 10.0) continue;
            if (P.mu && !is_trap(P.regime) && P.regime != Regime::short_any && h_units < 10.0)
                continue;
            // trap thresholds are r*s, so compare beta/r against s
            const double stat = is_trap(P.regime) ? tr.beta / P.r : bounce::exit_angle(tr);
            for (std::size_t j = 0; j < P.s.size(); ++j) {
                const bool in = is_trap(P.regime) ? stat > P.s[j]
                                                  : (P.s[j] <= 0.0 || stat < 1.0 / P.s[j]);
                if (in) {
                    out.sum[j] += w;
                    out.sum2[j] += w * w;
                    ++out.hits[j];
                }
            }
        } catch (const Error&) {
            ++out.degenerate;
        }
    }
    return out;
}

void check_tail_pre(const std::vector<double>& s_grid, std::uint64_t budget) {
    if (s_grid.empty()) throw PreconditionError("tail estimate: empty threshold grid");
    for (std::size_t i = 1; i < s_grid.size(); ++i) {
        if (!(s_grid[i] > s_grid[i - 1]))
            throw PreconditionError("tail estimate: thresholds must be strictly increasing");
    }
    if (budget < 100000) throw PreconditionError("tail estimate: budget must be >= 1e5");
}

TailEstimate run_tail(TailParams P) {
    const std::uint64_t n_chunks = (P.budget + kChunk - 1) / kChunk;
    auto per = [&P](std::uint64_t i) {
        const std::uint64_t lo = i * kChunk;
        const std::uint64_t hi = std::min(P.budget, lo + kChunk);
        return tail_chunk(P, i, hi - lo);
    };
    TailSums total = parallel::run_chunked<TailSums>(
        n_chunks, P.threads, per, [](TailSums& acc, const TailSums& r) { acc.merge(r); });

    TailEstimate est;
    est.s_values = P.s;
    est.regime = regime_name(P.regime);
    est.budget = P.budget;
    est.seed = P.seed;
    est.degenerate = total.degenerate;
    const double n = static_cast<double>(total.n);
    for (std::size_t j = 0; j < P.s.size(); ++j) {
        const double mean = total.sum[j] / n;
        const double var = std::max(0.0, total.sum2[j] - n * mean * mean) / (n - 1.0);
        est.p_hat.push_back(mean);
        est.std_err.push_back(std::sqrt(var / n));
        est.n_effective.push_back(total.hits[j]);
    }

    std::vector<double> fs, fp, fe;
    std::size_t positive_s = 0;
    for (std::size_t j = 0; j < P.s.size(); ++j) {
        const bool fittable = P.s[j] > 0.0;
        positive_s += fittable;
        if (fittable && total.hits[j] >= P.min_hits) {
            fs.push_back(P.s[j]);
            fp.push_back(est.p_hat[j]);
            fe.push_back(est.std_err[j]);
        } else {
            est.dropped.push_back(j);
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    est.slope = est.slope_ci_lo = est.slope_ci_hi = nan;
    if (positive_s >= 4) {
        if (fs.size() < 4)
            throw TooFewPointsError("tail estimate: fewer than 4 thresholds kept enough hits");
        const SlopeFit fit = fit_loglog_slope(fs, fp, fe);
        est.slope = fit.slope;
        est.slope_ci_lo = fit.ci_lo;
        est.slope_ci_hi = fit.ci_hi;
    }
    return est;
}

}  // namespace

const char* regime_name(Regime regime) {
    switch (regime) {
        case Regime::short_any: return "short";
        case Regime::long_n3: return "long-N3";
        case Regime::long_n4plus: return "long-N4plus";
        case Regime::trap_n3: return "trap-N3";
        case Regime::trap_n4plus: return "trap-N4plus";
    }
    return "unknown";
}

TailEstimate estimate_angle_tail(Regime regime, const std::vector<double>& s_grid,
                                 const TailConfig& cfg) {
    if (is_trap(regime))
        throw PreconditionError("estimate_angle_tail: expected an angle regime");
    check_tail_pre(s_grid, cfg.budget);
    TailParams P;
    P.regime = regime;
    P.s = s_grid;
    default_h_range(regime, P.h_min, P.h_max);
    if (cfg.h_min > 0.0) P.h_min = cfg.h_min;
    if (cfg.h_max > 0.0) P.h_max = cfg.h_max;
    P.budget = cfg.budget;
    P.seed = cfg.seed;
    P.threads = cfg.threads;
    P.min_hits = cfg.min_hits;
    P.salt = rng::tag_salt("tail/angle") ^ rng::tag_salt(regime_name(regime));
    return run_tail(std::move(P));
}

TailEstimate estimate_trap_tail(Regime regime, const std::vector<double>& s_grid,
                                const TailConfig& cfg) {
    if (!is_trap(regime))
        throw PreconditionError("estimate_trap_tail: expected a trap regime");
    check_tail_pre(s_grid, cfg.budget);
    TailParams P;
    P.regime = regime;
    P.s = s_grid;
    default_h_range(regime, P.h_min, P.h_max);
    if (cfg.h_min > 0.0) P.h_min = cfg.h_min;
    if (cfg.h_max > 0.0) P.h_max = cfg.h_max;
    P.budget = cfg.budget;
    P.seed = cfg.seed;
    P.threads = cfg.threads;
    P.min_hits = cfg.min_hits;
    P.salt = rng::tag_salt("tail/trap") ^ rng::tag_salt(regime_name(regime));
    return run_tail(std::move(P));
}

TailEstimate estimate_mu_tails(double r, Regime regime, const std::vector<double>& s_grid,
                               const TailConfig& cfg) {
    if (!(r > 0.0) || r > 0.1)
        throw PreconditionError("estimate_mu_tails: r must lie in (0, 0.1]");
    check_tail_pre(s_grid, cfg.budget);
    TailParams P;
    P.regime = regime;
    P.s = s_grid;
    P.r = r;
    P.mu = true;
    P.lebesgue = cfg.lebesgue_weight;
    P.budget = cfg.budget;
    P.seed = cfg.seed;
    P.threads = cfg.threads;
    P.min_hits = cfg.min_hits;
    P.salt = mix_bits(rng::tag_salt("tail/mu") ^ rng::tag_salt(regime_name(regime)), r);
    return run_tail(std::move(P));
}

RatioCheck mu_ratio_check(double r, std::uint64_t budget, std::uint64_t seed, int threads) {
    TailConfig cfg;
    cfg.budget = budget;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.lebesgue_weight = true;
    const std::vector<double> grid{0.0};
    // distinct salts (mixed from r) make the two radii independent; common
    // randomness would collapse the ratio's variance to zero artificially
    const TailEstimate full = estimate_mu_tails(r, Regime::short_any, grid, cfg);
    const TailEstimate half = estimate_mu_tails(r / 2.0, Regime::short_any, grid, cfg);
    if (full.n_effective[0] < cfg.min_hits || half.n_effective[0] < cfg.min_hits)
        throw InsufficientHitsError("mu_ratio_check: too few recollision draws");

    RatioCheck out;
    out.r = r;
    out.budget = budget;
    out.p_r = full.p_hat[0];
    out.se_r = full.std_err[0];
    out.p_half = half.p_hat[0];
    out.se_half = half.std_err[0];
    out.ratio = out.p_r / out.p_half;
    const double rel2 = (out.se_r / out.p_r) * (out.se_r / out.p_r) +
                        (out.se_half / out.p_half) * (out.se_half / out.p_half);
    out.se_ratio = out.ratio * std::sqrt(rel2);
    return out;
}

SlopeFit fit_loglog_slope(const std::vector<double>& s_values, const std::vector<double>& p_hat,
                          const std::vector<double>& std_err) {
    if (s_values.size() != p_hat.size() || p_hat.size() != std_err.size())
        throw PreconditionError("fit_loglog_slope: mismatched lengths");
    if (s_values.size() < 4) throw TooFewPointsError("fit_loglog_slope: needs >= 4 points");
    for (double s : s_values) {
        if (!(s > 0.0)) throw PreconditionError("fit_loglog_slope: thresholds must be positive");
    }
    for (double p : p_hat) {
        if (!(p > 0.0)) throw NonPositiveMassError("fit_loglog_slope: masses must be positive");
    }
    const stats::LineFit lf = stats::loglog_slope(s_values, p_hat, std_err);
    return SlopeFit{lf.slope, lf.slope - 1.96 * lf.slope_stderr, lf.slope + 1.96 * lf.slope_stderr};
}

void equal_area_bins(int bins, int& nz, int& naz) {
    if (bins < 8) throw PreconditionError("equal_area_bins: needs >= 8 bins");
    nz = static_cast<int>(std::lround(std::sqrt(3.0 * bins) / 2.0));
    if (nz < 1) nz = 1;
    while (nz > 1 && bins % nz != 0) --nz;  // nearest divisor below the 3:4 shape
    naz = bins / nz;
}

int equal_area_bin_index(const Vec3& w, int nz, int naz) {
    const double z = std::clamp(w.z, -1.0, 1.0);
    int iz = static_cast<int>((z + 1.0) * 0.5 * nz);
    iz = std::clamp(iz, 0, nz - 1);
    const double f = (std::atan2(w.y, w.x) + kPi) / (2.0 * kPi);
    int ia = static_cast<int>(f * naz);
    ia = std::clamp(ia, 0, naz - 1);
    return iz * naz + ia;
}

namespace {

struct TvChunk {
    std::vector<std::uint64_t> counts;
    std::vector<double> cosines;
    std::uint64_t n_cond = 0, n = 0;

    void merge(const TvChunk& o) {
        if (counts.empty()) counts.assign(o.counts.size(), 0);
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
        cosines.insert(cosines.end(), o.cosines.begin(), o.cosines.end());
        n_cond += o.n_cond;
        n += o.n;
    }
};

}  // namespace

TvEstimate estimate_exit_tv(double R, const UnitVec3& nu, const TvConfig& cfg) {
    if (!(R >= 10.0)) throw PreconditionError("estimate_exit_tv: R must be >= 10");
    int nz = 0, naz = 0;
    equal_area_bins(cfg.bins, nz, naz);
    const geom::Rotation rot = geom::Rotation::align(nu, UnitVec3(0.0, 0.0, 1.0));
    const std::uint64_t salt = mix_bits(rng::tag_salt("exit-tv"), R);
    const UnitVec3 anti(-nu.vec());

    const std::uint64_t n_chunks = (cfg.budget + kChunk - 1) / kChunk;
    auto per = [&](std::uint64_t idx) {
        const std::uint64_t lo = idx * kChunk;
        const std::uint64_t hi = std::min(cfg.budget, lo + kChunk);
        rng::Stream st(cfg.seed, salt ^ idx);
        TvChunk out;
        out.counts.assign(static_cast<std::size_t>(nz) * naz, 0);
        BounceTrace tr;
        for (std::uint64_t i = lo; i < hi; ++i) {
            ++out.n;
            try {
                const auto cone = sampling::sample_cone(st, anti, 2.0 / R);
                RecollisionEvent ev{nu, R, cone.dir, 1.0};
                bounce::simulate_bounce(ev, tr);
                if (tr.n_collisions != 3) continue;
                const Vec3 w = tr.w_exit.vec();
                ++out.counts[static_cast<std::size_t>(equal_area_bin_index(rot.apply(w), nz, naz))];
                out.cosines.push_back(geom::dot(w, nu.vec()));
                ++out.n_cond;
            } catch (const Error&) {
            }
        }
        return out;
    };
    TvChunk total = parallel::run_chunked<TvChunk>(
        n_chunks, cfg.threads, per, [](TvChunk& acc, const TvChunk& r) { acc.merge(r); });

    if (total.n_cond < cfg.min_conditioned)
        throw InsufficientHitsError("estimate_exit_tv: fewer than the required conditioned events");

    TvEstimate est;
    est.R = R;
    est.bins = nz * naz;
    est.n_conditioned = total.n_cond;
    est.n_total = total.n;
    const double n = static_cast<double>(total.n_cond);
    const double uniform = 1.0 / est.bins;
    double tv = 0.0, signed_mass = 0.0;
    for (std::uint64_t c : total.counts) {
        const double p = static_cast<double>(c) / n;
        const double dev = p - uniform;
        tv += 0.5 * std::fabs(dev);
        signed_mass += dev > 0.0 ? p : (dev < 0.0 ? -p : 0.0);
    }
    est.tv_hat = tv;
    // delta-method error of the half L1 with the deviation signs frozen
    est.std_err = std::sqrt(std::max(0.0, 1.0 - signed_mass * signed_mass) / (4.0 * n));
    est.bias = std::sqrt(est.bins / (2.0 * kPi * n));
    est.tv_corrected = std::sqrt(std::max(0.0, tv * tv - est.bias * est.bias));

    const std::uint64_t n_sub = std::min<std::uint64_t>(cfg.ks_cap, total.n_cond);
    const std::uint64_t stride = total.n_cond / n_sub;
    std::vector<double> sub;
    sub.reserve(n_sub);
    for (std::uint64_t i = 0; i < n_sub; ++i) sub.push_back(total.cosines[i * stride]);
    const stats::KsResult ks = stats::ks_test(
        std::move(sub), [](double c) { return std::clamp((c + 1.0) / 2.0, 0.0, 1.0); });
    est.ks_costheta = ks.statistic;
    est.ks_p = ks.p_value;
    est.ks_n = n_sub;
    return est;
}

namespace {

struct IndirectChunk {
    std::uint64_t endpoint = 0, entry = 0, n = 0;
    void merge(const IndirectChunk& o) {
        endpoint += o.endpoint;
        entry += o.entry;
        n += o.n;
    }
};

}  // namespace

IndirectEstimate indirect_prob_mc(double eps, std::uint64_t budget, std::uint64_t seed,
                                  int threads) {
    if (!(eps >= 0.0) || eps > 1.0)
        throw PreconditionError("indirect_prob_mc: eps must lie in [0, 1]");
    const std::uint64_t salt = mix_bits(rng::tag_salt("indirect"), eps);
    const std::uint64_t n_chunks = (budget + kChunk - 1) / kChunk;
    auto per = [&](std::uint64_t idx) {
        const std::uint64_t lo = idx * kChunk;
        const std::uint64_t hi = std::min(budget, lo + kChunk);
        rng::Stream st(seed, salt ^ idx);
        IndirectChunk out;
        const Vec3 origin{0.0, 0.0, 0.0};
        for (std::uint64_t i = lo; i < hi; ++i) {
            ++out.n;
            const double x1 = st.next_exp();
            const UnitVec3 w1 = sampling::sample_unit_sphere(st);
            const double x2 = st.next_exp();
            const UnitVec3 w2 = sampling::sample_unit_sphere(st);
            const double x3 = st.next_exp();
            const UnitVec3 w3 = sampling::sample_unit_sphere(st);
            const Vec3 p2 = x1 * w1.vec() + x2 * w2.vec();
            if (geom::norm(p2) <= eps) {
                ++out.endpoint;
                ++out.entry;  // the third segment starts inside the ball
            } else if (geom::point_segment_distance(origin, p2, p2 + x3 * w3.vec()) <= eps) {
                ++out.entry;
            }
        }
        return out;
    };
    IndirectChunk total = parallel::run_chunked<IndirectChunk>(
        n_chunks, threads, per, [](IndirectChunk& acc, const IndirectChunk& r) { acc.merge(r); });

    IndirectEstimate est;
    est.eps = eps;
    est.budget = budget;
    const double n = static_cast<double>(total.n);
    est.p_endpoint = static_cast<double>(total.endpoint) / n;
    est.p_entry = static_cast<double>(total.entry) / n;
    est.se_endpoint = std::sqrt(est.p_endpoint * (1.0 - est.p_endpoint) / n);
    est.se_entry = std::sqrt(est.p_entry * (1.0 - est.p_entry) / n);
    return est;
}

namespace {

template <class F>
double simpson_adapt(const F& f, double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    // The rounding-noise stop keeps an unattainably small tol from forcing a
    // full-depth recursion tree.
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol ||
        std::fabs(delta) <= 4e-16 * (std::fabs(left) + std::fabs(right)))
        return left + right + delta / 15.0;
    return simpson_adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_adapt(f, a, b, fa, fm, fb, whole, tol, 30);
}

// P(the two-flight endpoint lies within eps | xi1 + xi2 and the angle):
// integrand of the literal 2D reduction over (xi1, xi2) with the uniform
// cosine law integrated analytically.
double endpoint_quadrature(double eps) {
    const double tol = std::max(1e-12, 1e-10 * eps * eps);
    const double tol_inner = std::max(1e-13, 0.1 * tol);
    auto inner = [&](double s) -> double {
        if (s <= 0.0) return -std::expm1(-eps);
        double acc = 0.0;
        if (eps > s) acc += -std::expm1(-(eps - s));  // both flights inside
        const double lo = std::fabs(eps - s), hi = s + eps;
        auto f = [&](double t) -> double {
            if (t <= 0.0) return s == eps ? 0.5 : 0.0;
            double q = (eps * eps - (s - t) * (s - t)) / (4.0 * s * t);
            q = std::clamp(q, 0.0, 1.0);
            return std::exp(-t) * q;
        };
        acc += integrate(f, lo, hi, tol_inner);
        return acc;
    };
    auto outer = [&](double s) { return std::exp(-s) * inner(s); };
    return integrate(outer, 0.0, eps, tol) + integrate(outer, eps, 60.0, tol);
}

// P(a fresh Exp(1) flight from distance x dips into the eps-ball): the
// direction cone that reaches the ball, weighted by reaching its entry
// point. Substituting sin(theta) = (eps/x) sin(phi) removes the square-root
// endpoint singularity.
double ball_entry_prob(double x, double eps, double tol) {
    if (x <= eps) return 1.0;
    const double k = eps / x;
    auto f = [&](double phi) {
        const double sp = std::sin(phi), cp = std::cos(phi);
        const double root = std::sqrt(1.0 - k * k * sp * sp);
        const double d = x * root - eps * cp;
        return 0.5 * k * k * std::exp(-d) * sp * cp / root;
    };
    return integrate(f, 0.0, 0.5 * kPi, tol);
}

// Density of the two-flight endpoint distance x = |Y1 + Y2|: the
// conditional band density x/(2 xi1 xi2) integrated against e^{-xi1-xi2}
// reduces to int_x^inf e^{-s} (2x/s) artanh(x/s) ds over the total length
// s; substituting s = x/tanh(w) gives a smooth integrand with exponential
// decay at both ends.
double endpoint_distance_density(double x, double tol) {
    auto f = [&](double w) {
        const double th = std::tanh(w);
        if (!(th > 0.0)) return 0.0;
        const double sech2 = 1.0 - th * th;
        return std::exp(-x / th) * 2.0 * x * w * sech2 / th;
    };
    return integrate(f, 0.0, 20.0, tol);
}

// P(the third flight segment meets the eps-ball around the start): the
// start distance is integrated against the fresh-flight entry probability,
// split where that probability saturates at 1. The inner integrands are
// bounded by 1 and their errors pass through the outer integral linearly,
// so fixed absolute tolerances keep the overall target without noise-floor
// recursion.
double entry_quadrature(double eps) {
    const double tol = std::max(1e-12, 1e-10 * eps * eps);
    const double tol_d = 1e-12;
    const double tol_g = 1e-12;
    auto inside = [&](double x) { return endpoint_distance_density(x, tol_d); };
    auto outside = [&](double x) {
        return endpoint_distance_density(x, tol_d) * ball_entry_prob(x, eps, tol_g);
    };
    return integrate(inside, 0.0, eps, tol) + integrate(outside, eps, 60.0, tol);
}

}  // namespace

double indirect_prob_quadrature(double eps, IndirectEvent event) {
    if (!(eps > 0.0)) throw PreconditionError("indirect_prob_quadrature: eps must be positive");
    return event == IndirectEvent::endpoint ? endpoint_quadrature(eps) : entry_quadrature(eps);
}

}  // namespace recollide::estimators
