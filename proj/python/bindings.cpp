#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "recollide/bounce.hpp"
#include "recollide/errors.hpp"
#include "recollide/estimators.hpp"
#include "recollide/geom.hpp"
#include "recollide/lorentz.hpp"
#include "recollide/version.hpp"

namespace py = pybind11;

namespace {

using namespace recollide;
using geom::UnitVec3;
using geom::Vec3;

using Triple = std::array<double, 3>;

Triple to_triple(const Vec3& v) { return {v.x, v.y, v.z}; }

UnitVec3 to_unit(const Triple& t) { return UnitVec3(Vec3{t[0], t[1], t[2]}); }

estimators::Regime regime_from(const std::string& name) {
    if (name == "short-any") return estimators::Regime::short_any;
    if (name == "long-n3") return estimators::Regime::long_n3;
    if (name == "long-n4plus") return estimators::Regime::long_n4plus;
    if (name == "trap-n3") return estimators::Regime::trap_n3;
    if (name == "trap-n4plus") return estimators::Regime::trap_n4plus;
    throw std::invalid_argument("unknown regime '" + name + "'");
}

py::dict bounce_dict(const bounce::RecollisionEvent& ev, const bounce::BounceTrace& tr) {
    py::dict d;
    d["n_collisions"] = tr.n_collisions;
    d["beta"] = tr.beta;
    d["a"] = to_triple(tr.a);
    d["b"] = to_triple(tr.b);
    d["w_exit"] = to_triple(tr.w_exit.vec());
    d["exit_angle"] = bounce::exit_angle(tr);
    d["truncated"] = tr.truncated;
    d["tau"] = tr.tau;
    py::list pts;
    for (const auto& p : tr.points) pts.append(to_triple(p));
    d["points"] = std::move(pts);
    d["sphere_id"] = tr.sphere_id;
    d["shadowing"] = bounce::classify_shadowing(ev);
    d["recollision"] = bounce::classify_recollision(ev);
    d["prime"] = bounce::classify_prime(ev);
    return d;
}

py::dict tail_dict(const estimators::TailEstimate& est) {
    py::dict d;
    d["regime"] = est.regime;
    d["s_values"] = est.s_values;
    d["p_hat"] = est.p_hat;
    d["std_err"] = est.std_err;
    d["n_effective"] = est.n_effective;
    d["dropped"] = est.dropped;
    d["degenerate"] = est.degenerate;
    d["slope"] = est.slope;
    d["slope_ci"] = py::make_tuple(est.slope_ci_lo, est.slope_ci_hi);
    d["budget"] = est.budget;
    return d;
}

estimators::TailConfig tail_config(std::uint64_t budget, std::uint64_t seed, double h_min,
                                   double h_max, std::uint64_t min_hits, bool lebesgue,
                                   int threads) {
    estimators::TailConfig cfg;
    cfg.budget = budget;
    cfg.seed = seed;
    cfg.h_min = h_min;
    cfg.h_max = h_max;
    cfg.min_hits = min_hits;
    cfg.lebesgue_weight = lebesgue;
    cfg.threads = threads;
    return cfg;
}

lorentz::GasConfig gas_config(double eps, double rho, double horizon, std::uint64_t seed,
                              std::uint64_t n_paths, int threads, bool interactions) {
    lorentz::GasConfig cfg;
    cfg.eps = eps;
    cfg.rho = rho;
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.n_paths = n_paths;
    cfg.threads = threads;
    cfg.interactions = interactions;
    return cfg;
}

py::list trace_list(const std::vector<lorentz::TracePoint>& trace) {
    py::list out;
    for (const auto& p : trace) {
        py::dict row;
        row["t"] = p.t;
        row["pos"] = to_triple(p.pos);
        row["vel"] = to_triple(p.vel);
        out.append(std::move(row));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_recollide, m) {
    m.doc() = "recollision geometry of the dilute random Lorentz gas";
    m.attr("__version__") = recollide::kVersion;

    py::register_exception<recollide::Error>(m, "RecollideError");

    m.def(
        "simulate_bounce",
        [](const Triple& u, double xi, const Triple& v, double r, int n_max) {
            bounce::RecollisionEvent ev;
            ev.u = to_unit(u);
            ev.xi = xi;
            ev.v = to_unit(v);
            ev.r = r;
            ev.validate();
            const bounce::BounceTrace tr = bounce::simulate_bounce(ev, n_max);
            return bounce_dict(ev, tr);
        },
        py::arg("u"), py::arg("xi"), py::arg("v"), py::arg("r") = 1.0, py::arg("n_max") = 10000,
        "Run the two-scatterer bounce for the event (u, xi, v) at radius r.");

    m.def(
        "tail_masses",
        [](const std::string& regime, const std::vector<double>& s_grid, double r,
           std::uint64_t budget, std::uint64_t seed, double h_min, double h_max,
           std::uint64_t min_hits, bool lebesgue, int threads) {
            const auto cfg = tail_config(budget, seed, h_min, h_max, min_hits, lebesgue, threads);
            const estimators::Regime reg = regime_from(regime);
            estimators::TailEstimate est;
            if (r > 0.0)
                est = estimators::estimate_mu_tails(r, reg, s_grid, cfg);
            else if (reg == estimators::Regime::trap_n3 || reg == estimators::Regime::trap_n4plus)
                est = estimators::estimate_trap_tail(reg, s_grid, cfg);
            else
                est = estimators::estimate_angle_tail(reg, s_grid, cfg);
            return tail_dict(est);
        },
        py::arg("regime"), py::arg("s_grid"), py::arg("r") = 0.0, py::arg("budget") = 1000000,
        py::arg("seed") = 12345, py::arg("h_min") = 0.0, py::arg("h_max") = 0.0,
        py::arg("min_hits") = 100, py::arg("lebesgue") = false, py::arg("threads") = 0,
        "Tail masses of the bounce process; r = 0 runs the unit-radius suite, r > 0 the "
        "finite-radius suite.");

    m.def(
        "mu_ratio_check",
        [](double r, std::uint64_t budget, std::uint64_t seed, int threads) {
            const auto rc = estimators::mu_ratio_check(r, budget, seed, threads);
            py::dict d;
            d["r"] = rc.r;
            d["p_r"] = rc.p_r;
            d["se_r"] = rc.se_r;
            d["p_half"] = rc.p_half;
            d["se_half"] = rc.se_half;
            d["ratio"] = rc.ratio;
            d["se_ratio"] = rc.se_ratio;
            d["budget"] = rc.budget;
            return d;
        },
        py::arg("r"), py::arg("budget") = 200000, py::arg("seed") = 12345, py::arg("threads") = 0,
        "Linearity of the finite-radius recollision mass: estimate at r against r/2.");

    m.def(
        "exit_tv",
        [](double R, const Triple& nu, std::uint64_t budget, std::uint64_t seed, int bins,
           std::uint64_t min_conditioned, std::uint64_t ks_cap, int threads) {
            estimators::TvConfig cfg;
            cfg.budget = budget;
            cfg.seed = seed;
            cfg.bins = bins;
            cfg.min_conditioned = min_conditioned;
            cfg.ks_cap = ks_cap;
            cfg.threads = threads;
            const auto e = estimators::estimate_exit_tv(R, to_unit(nu), cfg);
            py::dict d;
            d["R"] = e.R;
            d["tv_hat"] = e.tv_hat;
            d["tv_corrected"] = e.tv_corrected;
            d["bias"] = e.bias;
            d["std_err"] = e.std_err;
            d["bins"] = e.bins;
            d["ks_costheta"] = e.ks_costheta;
            d["ks_p"] = e.ks_p;
            d["ks_n"] = e.ks_n;
            d["n_conditioned"] = e.n_conditioned;
            d["n_total"] = e.n_total;
            return d;
        },
        py::arg("R"), py::arg("nu") = Triple{0.0, 0.0, 1.0}, py::arg("budget") = 4000000,
        py::arg("seed") = 12345, py::arg("bins") = 192, py::arg("min_conditioned") = 10000,
        py::arg("ks_cap") = 20000, py::arg("threads") = 0,
        "Total-variation distance of the conditioned exit direction from uniform at flight "
        "time R.");

    m.def(
        "indirect_mc",
        [](double eps, std::uint64_t budget, std::uint64_t seed, int threads) {
            const auto e = estimators::indirect_prob_mc(eps, budget, seed, threads);
            py::dict d;
            d["eps"] = e.eps;
            d["p_endpoint"] = e.p_endpoint;
            d["se_endpoint"] = e.se_endpoint;
            d["p_entry"] = e.p_entry;
            d["se_entry"] = e.se_entry;
            d["budget"] = e.budget;
            return d;
        },
        py::arg("eps"), py::arg("budget") = 1000000, py::arg("seed") = 12345,
        py::arg("threads") = 0,
        "Monte Carlo probability that a three-flight chain returns to the eps-ball at its "
        "start.");

    m.def(
        "indirect_quadrature",
        [](double eps, const std::string& event) {
            if (event == "endpoint")
                return estimators::indirect_prob_quadrature(eps,
                                                            estimators::IndirectEvent::endpoint);
            if (event == "entry")
                return estimators::indirect_prob_quadrature(eps, estimators::IndirectEvent::entry);
            throw std::invalid_argument("event must be 'endpoint' or 'entry'");
        },
        py::arg("eps"), py::arg("event") = "entry",
        "Deterministic counterpart of indirect_mc by adaptive quadrature.");

    m.def(
        "fit_loglog_slope",
        [](const std::vector<double>& s, const std::vector<double>& p,
           const std::vector<double>& se) {
            const auto f = estimators::fit_loglog_slope(s, p, se);
            return py::make_tuple(f.slope, f.ci_lo, f.ci_hi);
        },
        py::arg("s_values"), py::arg("p_hat"), py::arg("std_err"),
        "Weighted log-log slope with a 95 percent interval, as (slope, lo, hi).");

    m.def("y_msd_exact", &lorentz::y_msd_exact, py::arg("t"),
          "Exact mean squared displacement 2(t - 1 + exp(-t)) of the Markov flight process.");

    m.def(
        "msd_curve",
        [](const std::string& process, const std::vector<double>& t_grid, std::uint64_t n_paths,
           double eps, double rho, double horizon, std::uint64_t seed, int threads,
           bool interactions) {
            lorentz::Process p = lorentz::Process::Y;
            if (process == "x") p = lorentz::Process::X;
            else if (process == "z") p = lorentz::Process::Z;
            else if (process != "y") throw std::invalid_argument("process must be x, y, or z");
            const auto cfg = gas_config(eps, rho, horizon, seed, n_paths, threads, interactions);
            const auto pts = lorentz::msd_curve(p, t_grid, n_paths, cfg);
            py::list out;
            for (const auto& pt : pts) {
                py::dict row;
                row["t"] = pt.t;
                row["msd"] = pt.msd;
                row["std_err"] = pt.std_err;
                out.append(std::move(row));
            }
            return out;
        },
        py::arg("process"), py::arg("t_grid"), py::arg("n_paths"), py::arg("eps") = 0.05,
        py::arg("rho") = 0.0, py::arg("horizon") = 100.0, py::arg("seed") = 12345,
        py::arg("threads") = 0, py::arg("interactions") = true,
        "Mean squared displacement of the chosen process on a time grid.");

    m.def(
        "increment_gaussianity",
        [](const std::string& process, double T, std::uint64_t n_paths, double eps, double rho,
           std::uint64_t seed, int threads) {
            lorentz::Process p = lorentz::Process::Y;
            if (process == "x") p = lorentz::Process::X;
            else if (process == "z") p = lorentz::Process::Z;
            else if (process != "y") throw std::invalid_argument("process must be x, y, or z");
            const auto cfg = gas_config(eps, rho, T, seed, n_paths, threads, true);
            const auto g = lorentz::increment_gaussianity(p, T, n_paths, cfg);
            py::dict d;
            d["ks"] = g.ks;
            d["ks_p"] = g.ks_p;
            d["corr"] = g.corr;
            d["corr_se"] = g.corr_se;
            d["msd"] = g.msd;
            d["n_paths"] = g.n_paths;
            return d;
        },
        py::arg("process"), py::arg("T"), py::arg("n_paths"), py::arg("eps") = 0.05,
        py::arg("rho") = 0.0, py::arg("seed") = 12345, py::arg("threads") = 0,
        "Componentwise normality of the diffusively rescaled endpoint.");

    m.def(
        "run_coupled",
        [](double eps, double rho, double horizon, std::uint64_t seed, std::uint64_t path_id,
           bool interactions) {
            const auto cfg = gas_config(eps, rho, horizon, seed, 1, 0, interactions);
            const auto run = lorentz::run_coupled(cfg, path_id);
            py::dict d;
            d["x_trace"] = trace_list(run.x_trace);
            d["y_trace"] = trace_list(run.y_trace);
            d["z_trace"] = trace_list(run.z_trace);
            d["legs"] = run.legs;
            d["coupled_legs"] = run.coupled_legs;
            switch (run.divergence) {
                case lorentz::Divergence::none: d["divergence"] = "none"; break;
                case lorentz::Divergence::placed_hit: d["divergence"] = "placed_hit"; break;
                case lorentz::Divergence::old_capsule: d["divergence"] = "old_capsule"; break;
                case lorentz::Divergence::bounce_interrupt:
                    d["divergence"] = "bounce_interrupt";
                    break;
            }
            d["divergence_leg"] = run.divergence_leg;
            if (run.mismatch_time)
                d["mismatch_time"] = *run.mismatch_time;
            else
                d["mismatch_time"] = py::none();
            d["capsule_rejects"] = run.capsule_rejects;
            d["degenerate"] = run.degenerate;
            d["z_trap_times"] = run.z_trap_times;
            d["z_chain_collisions"] = run.z_chain_collisions;
            py::list shadows, recolls;
            for (const auto& f : run.leg_flags) {
                shadows.append(f.shadow);
                recolls.append(f.recollision);
            }
            d["shadow_flags"] = std::move(shadows);
            d["recollision_flags"] = std::move(recolls);
            return d;
        },
        py::arg("eps") = 0.05, py::arg("rho") = 0.0, py::arg("horizon") = 100.0,
        py::arg("seed") = 12345, py::arg("path_id") = 0, py::arg("interactions") = true,
        "One coupled realization of the exploration, Markov, and single-memory processes.");

    m.def(
        "mismatch_stats",
        [](double eps, double rho, double horizon, std::uint64_t n_paths, std::uint64_t seed,
           int threads) {
            const auto cfg = gas_config(eps, rho, horizon, seed, n_paths, threads, true);
            const auto ms = lorentz::mismatch_stats(cfg);
            py::dict d;
            d["per_leg_rate"] = ms.per_leg_rate;
            d["std_err"] = ms.std_err;
            d["coupled_legs"] = ms.coupled_legs;
            d["divergences"] = ms.divergences;
            d["placed_hit"] = ms.placed_hit;
            d["old_capsule"] = ms.old_capsule;
            d["bounce_interrupt"] = ms.bounce_interrupt;
            d["shadow_legs"] = ms.shadow_legs;
            d["recollision_legs"] = ms.recollision_legs;
            d["capsule_rejects"] = ms.capsule_rejects;
            d["degenerate"] = ms.degenerate;
            d["paths"] = ms.paths;
            return d;
        },
        py::arg("eps") = 0.05, py::arg("rho") = 0.0, py::arg("horizon") = 100.0,
        py::arg("n_paths") = 1000, py::arg("seed") = 12345, py::arg("threads") = 0,
        "Per-leg divergence hazard of the coupled exploration/memory processes.");

    m.def(
        "scattering_kernel_check",
        [](std::uint64_t budget, std::uint64_t seed) {
            const auto k = lorentz::scattering_kernel_check(budget, seed);
            py::dict d;
            d["chi2_p"] = k.chi2_p;
            d["azimuth_ks_p"] = k.azimuth_ks_p;
            d["transfer_ks_p"] = k.transfer_ks_p;
            d["budget"] = k.budget;
            return d;
        },
        py::arg("budget") = 20000, py::arg("seed") = 12345,
        "Uniformity diagnostics of the specular scattering kernel.");
}
