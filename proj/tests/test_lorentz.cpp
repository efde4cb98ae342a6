#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "recollide/errors.hpp"
#include "recollide/geom.hpp"
#include "recollide/lorentz.hpp"
#include "recollide/rng.hpp"
#include "recollide/sampling.hpp"
#include "recollide/stats.hpp"

using namespace recollide;
using geom::UnitVec3;
using geom::Vec3;
using lorentz::CoupledPaths;
using lorentz::Divergence;
using lorentz::ExplorationState;
using lorentz::GasConfig;
using lorentz::Process;
using lorentz::TracePoint;
using lorentz::XEventKind;
using lorentz::ZMemoryState;

namespace {

template <class F>
double simpson(const F& f, double a, double b, int panels) {
    const double h = (b - a) / (2 * panels);
    double acc = f(a) + f(b);
    for (int i = 1; i < 2 * panels; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

ExplorationState fresh_exploration(double eps, double rate) {
    ExplorationState st;
    st.eps = eps;
    st.rate = rate;
    return st;
}

bool same_point(const TracePoint& a, const TracePoint& b) {
    return a.t == b.t && a.pos.x == b.pos.x && a.pos.y == b.pos.y && a.pos.z == b.pos.z &&
           a.vel.x == b.vel.x && a.vel.y == b.vel.y && a.vel.z == b.vel.z;
}

bool same_trace(const std::vector<TracePoint>& a, const std::vector<TracePoint>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_point(a[i], b[i])) return false;
    return true;
}

}  // namespace

TEST_CASE("gas config validates fields and pins the reference contact rate") {
    GasConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.contact_rate() == 1.0);
    cfg.eps = 0.3;
    CHECK(cfg.contact_rate() == 1.0);
    cfg.rho = 2.0;
    cfg.eps = 0.1;
    CHECK(cfg.contact_rate() == doctest::Approx(2.0 * 3.14159265358979324 * 0.01));

    GasConfig bad;
    bad.eps = 0.0;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad.eps = 0.5;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad = GasConfig{};
    bad.horizon = 0.0;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad = GasConfig{};
    bad.rho = -1.0;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad = GasConfig{};
    bad.n_paths = 0;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("flight steps use fixed draw slots and the unit-rate law") {
    rng::Stream s(7, 11);
    const std::uint64_t n = 20000;
    std::vector<double> xis;
    xis.reserve(n);
    Vec3 mean{0.0, 0.0, 0.0};
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto st = lorentz::y_step(s);
        CHECK(st.xi > 0.0);
        CHECK(std::fabs(geom::norm(st.w.vec()) - 1.0) < 1e-12);
        xis.push_back(st.xi);
        mean += st.w.vec();
    }
    // one exponential plus one direction per step, three uniforms total
    CHECK(s.counter() == 3 * n);
    const auto ks = stats::ks_test(xis, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(ks.p_value > 1e-4);
    mean = (1.0 / static_cast<double>(n)) * mean;
    const double se = std::sqrt(1.0 / (3.0 * static_cast<double>(n)));
    CHECK(std::fabs(mean.x) < 5.0 * se);
    CHECK(std::fabs(mean.y) < 5.0 * se);
    CHECK(std::fabs(mean.z) < 5.0 * se);
}

TEST_CASE("exploration steps place reachable scatterers and validate state") {
    SUBCASE("bad state is rejected") {
        rng::Stream s(1, 1);
        auto st = fresh_exploration(0.0, 1.0);
        CHECK_THROWS_AS(lorentz::x_step(st, s), PreconditionError);
        st = fresh_exploration(0.05, 0.0);
        CHECK_THROWS_AS(lorentz::x_step(st, s), PreconditionError);
        st = fresh_exploration(0.05, 1.0);
        st.placed.push_back({1.0, 0.0, 0.0});
        CHECK_THROWS_AS(lorentz::x_step(st, s), PreconditionError);
        st = fresh_exploration(0.05, 1.0);
        st.current_sphere = 3;
        CHECK_THROWS_AS(lorentz::x_step(st, s), PreconditionError);
    }

    SUBCASE("a first step places one scatterer at contact distance") {
        rng::Stream s(42, 5);
        auto st = fresh_exploration(0.05, 1.0);
        const UnitVec3 v_in = st.vel;
        const auto ev = lorentz::x_step(st, s);
        REQUIRE(ev.kind == XEventKind::fresh_collision);
        CHECK(ev.t > 0.0);
        CHECK(ev.t == st.t);
        CHECK(st.placed.size() == 1);
        CHECK(st.capsules.size() == 1);
        REQUIRE(st.placed_caps.size() == 1);
        CHECK(st.placed_caps[0] == 0);
        CHECK(st.current_sphere == 0);
        CHECK(geom::norm(st.flight_start - st.pos) == 0.0);
        CHECK(geom::norm(st.placed[0] - st.pos) == doctest::Approx(st.eps).epsilon(1e-9));
        // the placed center turns the incoming ray into the stored velocity
        const UnitVec3 normal(st.pos - st.placed[0]);
        const UnitVec3 refl = geom::reflect(v_in, normal);
        CHECK(geom::norm(refl.vec() - st.vel.vec()) < 1e-12);
    }

    SUBCASE("fresh contact times are exponential at the state's rate") {
        for (const double rate : {1.0, 2.5}) {
            std::vector<double> ts;
            ts.reserve(20000);
            for (std::uint64_t trial = 0; trial < 20000; ++trial) {
                rng::Stream s(909, trial);
                auto st = fresh_exploration(0.05, rate);
                const auto ev = lorentz::x_step(st, s);
                if (ev.kind == XEventKind::fresh_collision) ts.push_back(ev.t);
            }
            CHECK(ts.size() >= 19990);
            const auto ks =
                stats::ks_test(ts, [rate](double x) { return 1.0 - std::exp(-rate * x); });
            CHECK(ks.p_value > 1e-4);
        }
    }

    SUBCASE("a long walk keeps the revealed environment consistent") {
        rng::Stream s(2024, 77);
        auto st = fresh_exploration(0.15, 1.0);
        std::uint64_t fresh = 0, placed_hits = 0, voids = 0, degen = 0;
        double t_prev = 0.0;
        for (int i = 0; i < 3000; ++i) {
            const auto ev = lorentz::x_step(st, s);
            CHECK(st.t > t_prev);
            t_prev = st.t;
            switch (ev.kind) {
                case XEventKind::fresh_collision: ++fresh; break;
                case XEventKind::placed_collision: ++placed_hits; break;
                case XEventKind::capsule_void: ++voids; break;
                case XEventKind::degenerate_void: ++degen; break;
            }
            REQUIRE(st.current_sphere >= -1);
            REQUIRE(st.current_sphere < static_cast<int>(st.placed.size()));
        }
        CHECK(st.placed.size() == fresh);
        CHECK(st.capsules.size() == fresh + placed_hits);
        CHECK(st.placed_caps.size() == st.placed.size());
        CHECK(std::is_sorted(st.placed_caps.begin(), st.placed_caps.end()));
        CHECK(fresh > 2000);
        CHECK(voids > 10);
        CHECK(placed_hits > 0);
        CHECK(degen == 0);
    }
}

TEST_CASE("memory legs shadow, recollide, and replay deterministically") {
    SUBCASE("eps 0.3 produces both event kinds with mechanical bounces") {
        rng::Stream s(3, 9);
        ZMemoryState st;
        st.eps = 0.3;
        std::uint64_t shadows = 0, recolls = 0, degen = 0;
        int min_chain = 1 << 20;
        for (int leg = 0; leg < 20000; ++leg) {
            const ZMemoryState before = st;
            const auto out = lorentz::z_step(st, s);
            if (out.degenerate) {
                ++degen;
                continue;
            }
            if (out.shadow) {
                ++shadows;
                // a shadowed contact is void: direction and memory survive,
                // only the position advances along the same ray
                CHECK(st.vel.vec().x == before.vel.vec().x);
                CHECK(st.vel.vec().y == before.vel.vec().y);
                CHECK(st.vel.vec().z == before.vel.vec().z);
                CHECK(st.has_memory == before.has_memory);
                CHECK(geom::norm(st.memory - before.memory) == 0.0);
                CHECK(geom::norm(st.flight_start - before.flight_start) == 0.0);
                CHECK(st.flight_start_t == before.flight_start_t);
                const Vec3 along =
                    before.pos + (st.t - before.t) * before.vel.vec();
                CHECK(geom::norm(st.pos - along) < 1e-9 * (1.0 + st.t));
                continue;
            }
            if (out.recollision) {
                ++recolls;
                CHECK(out.beta > 0.0);
                min_chain = std::min(min_chain, out.chain_collisions);
                CHECK(out.chain_collisions >= 2);
            }
            CHECK(st.has_memory);
            CHECK(geom::norm(st.memory - st.pos) == doctest::Approx(st.eps).epsilon(1e-6));
            CHECK(geom::norm(st.flight_start - st.pos) < 1e-12);
        }
        CHECK(shadows > 500);
        CHECK(recolls > 500);
        CHECK(min_chain >= 2);
        CHECK(degen < 5);
    }

    SUBCASE("eps 0.05 events are rarer but present") {
        rng::Stream s(3, 10);
        ZMemoryState st;
        st.eps = 0.05;
        std::uint64_t shadows = 0, recolls = 0;
        for (int leg = 0; leg < 10000; ++leg) {
            const auto out = lorentz::z_step(st, s);
            shadows += out.shadow ? 1 : 0;
            recolls += out.recollision ? 1 : 0;
        }
        CHECK(shadows > 50);
        CHECK(recolls > 50);
    }

    SUBCASE("identical streams replay identical legs") {
        rng::Stream sa(11, 4), sb(11, 4);
        ZMemoryState a, b;
        a.eps = b.eps = 0.2;
        for (int leg = 0; leg < 500; ++leg) {
            const auto oa = lorentz::z_step(a, sa);
            const auto ob = lorentz::z_step(b, sb);
            CHECK(oa.shadow == ob.shadow);
            CHECK(oa.recollision == ob.recollision);
            CHECK(oa.beta == ob.beta);
            CHECK(oa.chain_collisions == ob.chain_collisions);
        }
        CHECK(a.t == b.t);
        CHECK(geom::norm(a.pos - b.pos) == 0.0);
    }

    SUBCASE("bad state is rejected") {
        rng::Stream s(1, 1);
        ZMemoryState st;
        st.eps = 0.0;
        CHECK_THROWS_AS(lorentz::z_step(st, s), PreconditionError);
    }
}

TEST_CASE("interaction-free runs keep the three processes identical") {
    GasConfig cfg;
    cfg.eps = 0.05;
    cfg.horizon = 50.0;
    cfg.interactions = false;
    const CoupledPaths run = lorentz::run_coupled(cfg, 3);
    CHECK(same_trace(run.x_trace, run.y_trace));
    CHECK(same_trace(run.x_trace, run.z_trace));
    CHECK(run.divergence == Divergence::none);
    CHECK(!run.mismatch_time.has_value());
    CHECK(run.legs == run.leg_flags.size());
    CHECK(run.coupled_legs == run.legs);
    CHECK(run.capsule_rejects == 0);
    CHECK(run.degenerate == 0);
    CHECK(run.z_trap_times.empty());
    CHECK(run.z_chain_collisions.empty());
    for (const auto& f : run.leg_flags) {
        CHECK(!f.shadow);
        CHECK(!f.recollision);
    }
}

TEST_CASE("coupled runs stay glued until the mismatch time and account divergences") {
    GasConfig cfg;
    cfg.eps = 0.05;
    cfg.horizon = 100.0;
    std::uint64_t diverged = 0, mismatched = 0, placed = 0, oldc = 0, binter = 0;
    std::uint64_t shadows = 0, recolls = 0, rejects = 0;
    for (std::uint64_t p = 0; p < 100; ++p) {
        const CoupledPaths run = lorentz::run_coupled(cfg, p);
        REQUIRE(!run.x_trace.empty());
        REQUIRE(!run.y_trace.empty());
        REQUIRE(!run.z_trace.empty());
        for (const auto* tr : {&run.x_trace, &run.y_trace, &run.z_trace}) {
            CHECK(tr->front().t == 0.0);
            CHECK(geom::norm(tr->front().pos) == 0.0);
            CHECK(std::is_sorted(tr->begin(), tr->end(),
                                 [](const TracePoint& a, const TracePoint& b) {
                                     return a.t < b.t;
                                 }));
        }
        // all three processes launch with one shared direction
        CHECK(geom::norm(run.x_trace.front().vel - run.y_trace.front().vel) == 0.0);
        CHECK(geom::norm(run.z_trace.front().vel - run.y_trace.front().vel) == 0.0);

        CHECK(run.legs == run.leg_flags.size());
        std::uint64_t flag_recolls = 0;
        for (const auto& f : run.leg_flags) {
            shadows += f.shadow ? 1 : 0;
            flag_recolls += f.recollision ? 1 : 0;
        }
        recolls += flag_recolls;
        rejects += run.capsule_rejects;
        CHECK(run.z_trap_times.size() == flag_recolls);
        CHECK(run.z_chain_collisions.size() == flag_recolls);
        for (const double beta : run.z_trap_times) CHECK(beta > 0.0);
        for (const int c : run.z_chain_collisions) CHECK(c >= 2);

        const bool div = run.divergence != Divergence::none;
        if (run.mismatch_time.has_value()) CHECK(div);
        if (div) {
            ++diverged;
            mismatched += run.mismatch_time.has_value() ? 1 : 0;
            placed += run.divergence == Divergence::placed_hit ? 1 : 0;
            oldc += run.divergence == Divergence::old_capsule ? 1 : 0;
            binter += run.divergence == Divergence::bounce_interrupt ? 1 : 0;
            CHECK(run.coupled_legs == run.divergence_leg);
            CHECK(run.divergence_leg < run.legs);
            if (run.mismatch_time.has_value()) {
                const double tm = *run.mismatch_time;
                CHECK(tm > 0.0);
                for (int k = 1; k <= 8; ++k) {
                    const double t = tm * (static_cast<double>(k) / 9.0);
                    const Vec3 gap = lorentz::position_at(run.x_trace, t) -
                                     lorentz::position_at(run.z_trace, t);
                    CHECK(geom::norm(gap) <= 2e-9);
                }
            }
        } else {
            CHECK(run.coupled_legs == run.legs);
            CHECK(same_trace(run.x_trace, run.z_trace));
        }
    }
    CHECK(diverged > 25);
    CHECK(diverged < 80);
    // a divergence firing right at the horizon may leave no visible gap, but
    // nearly every one separates the traces past the coupling tolerance
    CHECK(mismatched + 3 >= diverged);
    CHECK(placed + oldc + binter == diverged);
    CHECK(shadows > 60);
    CHECK(recolls > 60);
    CHECK(rejects > 80);

    const CoupledPaths a = lorentz::run_coupled(cfg, 7);
    const CoupledPaths b = lorentz::run_coupled(cfg, 7);
    CHECK(same_trace(a.x_trace, b.x_trace));
    CHECK(same_trace(a.y_trace, b.y_trace));
    CHECK(same_trace(a.z_trace, b.z_trace));
    CHECK(a.divergence == b.divergence);
    CHECK(a.mismatch_time == b.mismatch_time);
    CHECK(a.capsule_rejects == b.capsule_rejects);
}

TEST_CASE("trace interpolation clamps the front and extends the back") {
    std::vector<TracePoint> trace;
    CHECK_THROWS_AS(lorentz::position_at(trace, 0.0), PreconditionError);
    trace.push_back({0.0, {0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
    trace.push_back({2.0, {0.0, 0.0, 2.0}, {1.0, 0.0, 0.0}});
    trace.push_back({3.0, {1.0, 0.0, 2.0}, {0.0, 1.0, 0.0}});
    CHECK(geom::norm(lorentz::position_at(trace, -1.0)) == 0.0);
    CHECK(geom::norm(lorentz::position_at(trace, 1.0) - Vec3{0.0, 0.0, 1.0}) == 0.0);
    CHECK(geom::norm(lorentz::position_at(trace, 2.5) - Vec3{0.5, 0.0, 2.0}) == 0.0);
    CHECK(geom::norm(lorentz::position_at(trace, 5.0) - Vec3{1.0, 2.0, 2.0}) == 0.0);
}

TEST_CASE("mean squared displacement matches the Markov closed form") {
    CHECK(lorentz::y_msd_exact(0.0) == 0.0);
    CHECK_THROWS_AS(lorentz::y_msd_exact(-1.0), PreconditionError);
    // the closed form is twice the integrated velocity autocorrelation
    for (const double t : {0.5, 3.0, 10.0}) {
        const double quad =
            2.0 * simpson([t](double s) { return (t - s) * std::exp(-s); }, 0.0, t, 4000);
        CHECK(lorentz::y_msd_exact(t) == doctest::Approx(quad).epsilon(1e-9));
    }

    GasConfig cfg;
    cfg.horizon = 100.0;
    const auto y = lorentz::msd_curve(Process::Y, {1.0, 10.0, 100.0}, 20000, cfg);
    REQUIRE(y.size() == 3);
    for (const auto& pt : y) {
        CHECK(pt.std_err > 0.0);
        CHECK(std::fabs(pt.msd - lorentz::y_msd_exact(pt.t)) < 3.5 * pt.std_err);
    }
    CHECK(y[0].t == 1.0);
    CHECK(y[2].t == 100.0);

    GasConfig gas;
    gas.eps = 0.05;
    gas.horizon = 20.0;
    const auto x = lorentz::msd_curve(Process::X, {20.0}, 2500, gas);
    REQUIRE(x.size() == 1);
    CHECK(std::fabs(x[0].msd - lorentz::y_msd_exact(20.0)) < 0.1 * lorentz::y_msd_exact(20.0));
    const auto z = lorentz::msd_curve(Process::Z, {20.0}, 2500, gas);
    REQUIRE(z.size() == 1);
    CHECK(z[0].msd > 0.0);
    CHECK(z[0].std_err > 0.0);
    CHECK(z[0].std_err < z[0].msd);

    GasConfig thr = cfg;
    thr.threads = 1;
    const auto m1 = lorentz::msd_curve(Process::Y, {1.0, 10.0}, 2000, thr);
    thr.threads = 3;
    const auto m3 = lorentz::msd_curve(Process::Y, {1.0, 10.0}, 2000, thr);
    REQUIRE(m1.size() == m3.size());
    for (std::size_t i = 0; i < m1.size(); ++i) {
        CHECK(m1[i].msd == m3[i].msd);
        CHECK(m1[i].std_err == m3[i].std_err);
    }

    CHECK_THROWS_AS(lorentz::msd_curve(Process::Y, {}, 100, cfg), PreconditionError);
    CHECK_THROWS_AS(lorentz::msd_curve(Process::Y, {1.0, 1.0}, 100, cfg), PreconditionError);
    CHECK_THROWS_AS(lorentz::msd_curve(Process::Y, {5.0, 200.0}, 100, cfg), PreconditionError);
    CHECK_THROWS_AS(lorentz::msd_curve(Process::Y, {1.0}, 0, cfg), PreconditionError);
    GasConfig bad = cfg;
    bad.eps = 0.6;
    CHECK_THROWS_AS(lorentz::msd_curve(Process::Y, {1.0}, 100, bad), PreconditionError);
}

TEST_CASE("scattering kernel and endpoint gaussianity diagnostics pass") {
    CHECK_THROWS_AS(lorentz::scattering_kernel_check(999, 1), PreconditionError);
    for (const std::uint64_t seed : {2024ull, 2025ull}) {
        const auto kc = lorentz::scattering_kernel_check(20000, seed);
        CHECK(kc.budget == 20000);
        CHECK(kc.chi2_p > 1e-4);
        CHECK(kc.azimuth_ks_p > 1e-4);
        CHECK(kc.transfer_ks_p > 1e-4);
    }
    const auto ka = lorentz::scattering_kernel_check(20000, 2024);
    const auto kb = lorentz::scattering_kernel_check(20000, 2024);
    CHECK(ka.chi2_p == kb.chi2_p);
    CHECK(ka.azimuth_ks_p == kb.azimuth_ks_p);
    CHECK(ka.transfer_ks_p == kb.transfer_ks_p);

    GasConfig cfg;
    cfg.horizon = 100.0;
    CHECK_THROWS_AS(lorentz::increment_gaussianity(Process::Y, 99.0, 20000, cfg),
                    PreconditionError);
    CHECK_THROWS_AS(lorentz::increment_gaussianity(Process::Y, 100.0, 99, cfg),
                    PreconditionError);
    const auto g = lorentz::increment_gaussianity(Process::Y, 100.0, 20000, cfg);
    CHECK(g.n_paths == 20000);
    CHECK(g.corr_se == doctest::Approx(1.0 / std::sqrt(20000.0)));
    for (int c = 0; c < 3; ++c) {
        CHECK(g.ks_p[c] > 1e-4);
        CHECK(std::fabs(g.corr[c]) < 4.5 * g.corr_se);
    }
    CHECK(std::fabs(g.msd - lorentz::y_msd_exact(100.0)) < 0.03 * lorentz::y_msd_exact(100.0));
}

TEST_CASE("per-leg divergence accounting is internally consistent") {
    GasConfig cfg;
    cfg.eps = 0.05;
    cfg.horizon = 100.0;
    cfg.n_paths = 100;
    const auto m = lorentz::mismatch_stats(cfg);
    CHECK(m.paths == 100);
    CHECK(m.divergences == m.placed_hit + m.old_capsule + m.bounce_interrupt);
    CHECK(m.divergences > 0);
    CHECK(m.coupled_legs > 3000);
    CHECK(m.shadow_legs > 60);
    CHECK(m.recollision_legs > 60);
    CHECK(m.capsule_rejects > 80);
    const double rate =
        static_cast<double>(m.divergences) / static_cast<double>(m.coupled_legs);
    CHECK(m.per_leg_rate == rate);
    CHECK(m.std_err ==
          std::sqrt(rate * (1.0 - rate) / static_cast<double>(m.coupled_legs)));
    CHECK(m.per_leg_rate > 0.001);
    CHECK(m.per_leg_rate < 0.05);

    GasConfig t1 = cfg;
    t1.threads = 1;
    GasConfig t2 = cfg;
    t2.threads = 2;
    const auto a = lorentz::mismatch_stats(t1);
    const auto b = lorentz::mismatch_stats(t2);
    CHECK(a.per_leg_rate == b.per_leg_rate);
    CHECK(a.divergences == b.divergences);
    CHECK(a.coupled_legs == b.coupled_legs);
    CHECK(a.shadow_legs == b.shadow_legs);
    CHECK(a.capsule_rejects == b.capsule_rejects);

    // the divergence hazard shrinks with the obstacle radius
    GasConfig wide = cfg;
    wide.eps = 0.1;
    GasConfig narrow = cfg;
    narrow.eps = 0.02;
    CHECK(lorentz::mismatch_stats(wide).per_leg_rate >
          lorentz::mismatch_stats(narrow).per_leg_rate);
}
