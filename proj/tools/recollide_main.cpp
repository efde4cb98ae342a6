#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "recollide/bounce.hpp"
#include "recollide/errors.hpp"
#include "recollide/estimators.hpp"
#include "recollide/io.hpp"
#include "recollide/lorentz.hpp"
#include "recollide/rng.hpp"
#include "recollide/sampling.hpp"
#include "recollide/stats.hpp"
#include "recollide/version.hpp"

namespace {

using recollide::ConfigError;
using recollide::geom::UnitVec3;
using recollide::geom::Vec3;
namespace bounce = recollide::bounce;
namespace estimators = recollide::estimators;
namespace io = recollide::io;
namespace lorentz = recollide::lorentz;
namespace rng = recollide::rng;
namespace sampling = recollide::sampling;
namespace stats = recollide::stats;

struct GlobalOpts {
    std::uint64_t seed = 12345;
    int threads = 0;
    std::string out;
    std::string format = "json";
};

class Timer {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Comma-separated triple, renormalized with a warning when clearly off the
// sphere (a warning rather than an error: inputs are often rounded).
UnitVec3 parse_direction(const std::string& text, const char* flag) {
    std::vector<double> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find(',', pos);
        const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": expected a comma-separated triple, got '" +
                              text + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (parts.size() != 3)
        throw ConfigError(std::string(flag) + ": expected exactly three components");
    const Vec3 v{parts[0], parts[1], parts[2]};
    const double n = recollide::geom::norm(v);
    if (!(n > 0.0)) throw ConfigError(std::string(flag) + ": zero vector");
    if (std::abs(n - 1.0) > 1e-6)
        std::cerr << "warning: " << flag << " has norm " << n << ", renormalizing\n";
    return UnitVec3(v);
}

std::uint64_t as_count(double value, const char* flag) {
    if (!std::isfinite(value) || !(value >= 1.0) || value > 9e18)
        throw ConfigError(std::string(flag) + ": must be a positive finite count");
    return static_cast<std::uint64_t>(std::llround(value));
}

estimators::Regime parse_regime(const std::string& name) {
    if (name == "short-any") return estimators::Regime::short_any;
    if (name == "long-n3") return estimators::Regime::long_n3;
    if (name == "long-n4plus") return estimators::Regime::long_n4plus;
    if (name == "trap-n3") return estimators::Regime::trap_n3;
    if (name == "trap-n4plus") return estimators::Regime::trap_n4plus;
    throw ConfigError("unknown regime '" + name +
                      "' (expected short-any, long-n3, long-n4plus, trap-n3, trap-n4plus)");
}

io::Json vec_json(const Vec3& v) {
    io::Json a = io::Json::array();
    a.push(v.x);
    a.push(v.y);
    a.push(v.z);
    return a;
}

io::Json doubles_json(const std::vector<double>& xs) {
    io::Json a = io::Json::array();
    for (double x : xs) a.push(x);
    return a;
}

io::Json counts_json(const std::vector<std::uint64_t>& xs) {
    io::Json a = io::Json::array();
    for (std::uint64_t x : xs) a.push(io::Json::uinteger(x));
    return a;
}

// Seed and version ride along in every JSON artifact. The thread count is
// deliberately not echoed: output must be byte-identical across it.
io::Json artifact_root(const char* command, const GlobalOpts& g) {
    io::Json root = io::Json::object();
    root.set("command", command);
    root.set("version", recollide::kVersion);
    root.set("seed", g.seed);
    return root;
}

void emit(const GlobalOpts& g, const std::string& content) {
    if (g.out.empty()) {
        std::cout << content;
        if (content.empty() || content.back() != '\n') std::cout << '\n';
    } else {
        io::atomic_write_file(g.out, content);
    }
}

// CSV artifacts stay pure header+rows; the metadata echo travels on the
// terminal instead so data files keep a fixed column contract.
void echo_csv_meta(const GlobalOpts& g, const char* command, double wall_s) {
    io::Json meta = io::Json::object();
    meta.set("command", command);
    meta.set("version", recollide::kVersion);
    meta.set("seed", g.seed);
    meta.set("wall_time_s", wall_s);
    (g.out.empty() ? std::cerr : std::cout) << meta.dump() << "\n";
}

const std::vector<std::string> kEstimatorHeader = {"s_or_R", "estimate", "stderr", "n", "regime"};

// ---- bounce ----

int run_bounce(const GlobalOpts& g, const std::string& u_text, double xi,
               const std::string& v_text, double r, int n_max) {
    Timer timer;
    bounce::RecollisionEvent ev;
    ev.u = parse_direction(u_text, "--u");
    ev.v = parse_direction(v_text, "--v");
    ev.xi = xi;
    ev.r = r;
    ev.validate();
    const bounce::BounceTrace tr = bounce::simulate_bounce(ev, n_max);
    const bool shadowing = bounce::classify_shadowing(ev);
    const bool recollision = bounce::classify_recollision(ev);
    const bool prime = bounce::classify_prime(ev);

    if (g.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        for (int k = 0; k < tr.n_collisions; ++k) {
            const Vec3& p = tr.points[static_cast<std::size_t>(k)];
            const Vec3& w = tr.w[static_cast<std::size_t>(k) + 1].vec();
            rows.push_back({std::to_string(k), io::format_double(tr.tau[static_cast<std::size_t>(k)]),
                            io::format_double(p.x), io::format_double(p.y), io::format_double(p.z),
                            io::format_double(w.x), io::format_double(w.y), io::format_double(w.z),
                            std::to_string(tr.sphere_id[static_cast<std::size_t>(k)])});
        }
        emit(g, io::format_csv({"k", "tau", "x", "y", "z", "wx", "wy", "wz", "sphere_id"}, rows));
        echo_csv_meta(g, "bounce", timer.seconds());
        return 0;
    }

    io::Json root = artifact_root("bounce", g);
    io::Json event = io::Json::object();
    event.set("u", vec_json(ev.u.vec()));
    event.set("xi", ev.xi);
    event.set("v", vec_json(ev.v.vec()));
    event.set("r", ev.r);
    root.set("event", std::move(event));
    root.set("a", vec_json(tr.a));
    root.set("b", vec_json(tr.b));
    root.set("n_collisions", tr.n_collisions);
    root.set("beta", tr.beta);
    root.set("w_exit", vec_json(tr.w_exit.vec()));
    root.set("exit_angle", bounce::exit_angle(tr));
    root.set("truncated", tr.truncated);
    root.set("shadowing", shadowing);
    root.set("recollision", recollision);
    root.set("prime", prime);
    root.set("tau", doubles_json(tr.tau));
    io::Json pts = io::Json::array();
    for (const auto& p : tr.points) pts.push(vec_json(p));
    root.set("points", std::move(pts));
    io::Json ws = io::Json::array();
    for (const auto& w : tr.w) ws.push(vec_json(w.vec()));
    root.set("w", std::move(ws));
    io::Json ids = io::Json::array();
    for (int id : tr.sphere_id) ids.push(io::Json::integer(id));
    root.set("sphere_id", std::move(ids));
    root.set("wall_time_s", timer.seconds());
    emit(g, root.dump());
    return 0;
}

// ---- tails ----

int run_tails(const GlobalOpts& g, const std::string& regime_name, std::vector<double> s_grid,
              double budget, double r, double h_min, double h_max, double min_hits,
              bool lebesgue) {
    Timer timer;
    const estimators::Regime regime = parse_regime(regime_name);
    if (s_grid.empty()) throw ConfigError("--s: at least one threshold required");
    estimators::TailConfig cfg;
    cfg.budget = as_count(budget, "--budget");
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.h_min = h_min;
    cfg.h_max = h_max;
    cfg.min_hits = as_count(min_hits, "--min-hits");
    cfg.lebesgue_weight = lebesgue;

    estimators::TailEstimate est;
    if (r > 0.0) {
        est = estimators::estimate_mu_tails(r, regime, s_grid, cfg);
    } else if (regime == estimators::Regime::trap_n3 ||
               regime == estimators::Regime::trap_n4plus) {
        est = estimators::estimate_trap_tail(regime, s_grid, cfg);
    } else {
        est = estimators::estimate_angle_tail(regime, s_grid, cfg);
    }

    if (g.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < est.s_values.size(); ++i)
            rows.push_back({io::format_double(est.s_values[i]), io::format_double(est.p_hat[i]),
                            io::format_double(est.std_err[i]), std::to_string(est.n_effective[i]),
                            est.regime});
        emit(g, io::format_csv(kEstimatorHeader, rows));
        echo_csv_meta(g, "tails", timer.seconds());
        return 0;
    }

    io::Json root = artifact_root("tails", g);
    root.set("regime", est.regime);
    root.set("budget", io::Json::uinteger(est.budget));
    root.set("r", r);
    root.set("h_min", h_min);
    root.set("h_max", h_max);
    root.set("lebesgue_weight", lebesgue);
    root.set("s_values", doubles_json(est.s_values));
    root.set("p_hat", doubles_json(est.p_hat));
    root.set("std_err", doubles_json(est.std_err));
    root.set("n_effective", counts_json(est.n_effective));
    io::Json dropped = io::Json::array();
    for (std::size_t i : est.dropped) dropped.push(io::Json::uinteger(i));
    root.set("dropped", std::move(dropped));
    root.set("degenerate", io::Json::uinteger(est.degenerate));
    root.set("slope", est.slope);
    root.set("slope_ci_lo", est.slope_ci_lo);
    root.set("slope_ci_hi", est.slope_ci_hi);
    root.set("wall_time_s", timer.seconds());
    emit(g, root.dump());
    return 0;
}

// ---- exit-dist ----

int run_exit_dist(const GlobalOpts& g, std::vector<double> radii, double budget, int bins,
                  const std::string& nu_text, double min_conditioned, double ks_cap) {
    Timer timer;
    if (radii.empty()) throw ConfigError("--radii: at least one radius required");
    const UnitVec3 nu = parse_direction(nu_text, "--nu");
    estimators::TvConfig cfg;
    cfg.budget = as_count(budget, "--budget");
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.bins = bins;
    cfg.min_conditioned = as_count(min_conditioned, "--min-conditioned");
    cfg.ks_cap = as_count(ks_cap, "--ks-cap");

    std::vector<estimators::TvEstimate> ests;
    ests.reserve(radii.size());
    for (double R : radii) ests.push_back(estimators::estimate_exit_tv(R, nu, cfg));

    if (g.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        for (const auto& e : ests)
            rows.push_back({io::format_double(e.R), io::format_double(e.tv_corrected),
                            io::format_double(e.std_err), std::to_string(e.n_conditioned),
                            "exit_tv"});
        emit(g, io::format_csv(kEstimatorHeader, rows));
        echo_csv_meta(g, "exit-dist", timer.seconds());
        return 0;
    }

    io::Json root = artifact_root("exit-dist", g);
    root.set("nu", vec_json(nu.vec()));
    root.set("budget", io::Json::uinteger(cfg.budget));
    root.set("bins", bins);
    io::Json rows = io::Json::array();
    for (const auto& e : ests) {
        io::Json row = io::Json::object();
        row.set("R", e.R);
        row.set("tv_hat", e.tv_hat);
        row.set("tv_corrected", e.tv_corrected);
        row.set("bias", e.bias);
        row.set("std_err", e.std_err);
        row.set("ks_costheta", e.ks_costheta);
        row.set("ks_p", e.ks_p);
        row.set("ks_n", io::Json::uinteger(e.ks_n));
        row.set("n_conditioned", io::Json::uinteger(e.n_conditioned));
        row.set("n_total", io::Json::uinteger(e.n_total));
        rows.push(std::move(row));
    }
    root.set("estimates", std::move(rows));
    try {
        std::vector<double> rs, tv, se;
        for (const auto& e : ests) {
            rs.push_back(e.R);
            tv.push_back(e.tv_corrected);
            se.push_back(e.std_err);
        }
        const estimators::SlopeFit fit = estimators::fit_loglog_slope(rs, tv, se);
        root.set("slope", fit.slope);
        root.set("slope_ci_lo", fit.ci_lo);
        root.set("slope_ci_hi", fit.ci_hi);
    } catch (const recollide::Error&) {
        root.set("slope", io::Json::null());
        root.set("slope_ci_lo", io::Json::null());
        root.set("slope_ci_hi", io::Json::null());
    }
    root.set("wall_time_s", timer.seconds());
    emit(g, root.dump());
    return 0;
}

// ---- indirect ----

int run_indirect(const GlobalOpts& g, std::vector<double> eps_grid, double budget,
                 const std::string& mode) {
    Timer timer;
    if (eps_grid.empty()) throw ConfigError("--eps: at least one value required");
    if (mode != "mc" && mode != "quadrature" && mode != "both")
        throw ConfigError("--mode: expected mc, quadrature, or both");
    const bool do_mc = mode != "quadrature";
    const bool do_quad = mode != "mc";
    const std::uint64_t n = as_count(budget, "--budget");

    struct Row {
        double eps = 0.0;
        estimators::IndirectEstimate mc;
        double q_endpoint = 0.0, q_entry = 0.0;
    };
    std::vector<Row> rows;
    for (double eps : eps_grid) {
        Row row;
        row.eps = eps;
        if (do_mc) row.mc = estimators::indirect_prob_mc(eps, n, g.seed, g.threads);
        if (do_quad) {
            row.q_endpoint = estimators::indirect_prob_quadrature(eps, estimators::IndirectEvent::endpoint);
            row.q_entry = estimators::indirect_prob_quadrature(eps, estimators::IndirectEvent::entry);
        }
        rows.push_back(row);
    }

    if (g.format == "csv") {
        std::vector<std::vector<std::string>> csv;
        for (const auto& row : rows) {
            if (do_mc) {
                csv.push_back({io::format_double(row.eps), io::format_double(row.mc.p_entry),
                               io::format_double(row.mc.se_entry), std::to_string(n),
                               "indirect_entry_mc"});
                csv.push_back({io::format_double(row.eps), io::format_double(row.mc.p_endpoint),
                               io::format_double(row.mc.se_endpoint), std::to_string(n),
                               "indirect_endpoint_mc"});
            }
            if (do_quad) {
                csv.push_back({io::format_double(row.eps), io::format_double(row.q_entry), "0", "0",
                               "indirect_entry_quadrature"});
                csv.push_back({io::format_double(row.eps), io::format_double(row.q_endpoint), "0",
                               "0", "indirect_endpoint_quadrature"});
            }
        }
        emit(g, io::format_csv(kEstimatorHeader, csv));
        echo_csv_meta(g, "indirect", timer.seconds());
        return 0;
    }

    io::Json root = artifact_root("indirect", g);
    root.set("mode", mode);
    root.set("budget", io::Json::uinteger(do_mc ? n : 0));
    io::Json arr = io::Json::array();
    for (const auto& row : rows) {
        io::Json e = io::Json::object();
        e.set("eps", row.eps);
        if (do_mc) {
            e.set("p_endpoint_mc", row.mc.p_endpoint);
            e.set("se_endpoint_mc", row.mc.se_endpoint);
            e.set("p_entry_mc", row.mc.p_entry);
            e.set("se_entry_mc", row.mc.se_entry);
        }
        if (do_quad) {
            e.set("p_endpoint_quadrature", row.q_endpoint);
            e.set("p_entry_quadrature", row.q_entry);
        }
        if (do_mc && do_quad) {
            e.set("z_endpoint", row.mc.se_endpoint > 0.0
                                    ? (row.mc.p_endpoint - row.q_endpoint) / row.mc.se_endpoint
                                    : 0.0);
            e.set("z_entry",
                  row.mc.se_entry > 0.0 ? (row.mc.p_entry - row.q_entry) / row.mc.se_entry : 0.0);
        }
        arr.push(std::move(e));
    }
    root.set("estimates", std::move(arr));
    // log-factor evidence: entry mass over eps^2 between the extreme radii
    if (rows.size() >= 2) {
        const auto by_eps = [](const Row& a, const Row& b) { return a.eps < b.eps; };
        const Row& hi = *std::max_element(rows.begin(), rows.end(), by_eps);
        const Row& lo = *std::min_element(rows.begin(), rows.end(), by_eps);
        const double p_hi = do_quad ? hi.q_entry : hi.mc.p_entry;
        const double p_lo = do_quad ? lo.q_entry : lo.mc.p_entry;
        if (p_hi > 0.0 && hi.eps > 0.0 && lo.eps > 0.0) {
            root.set("entry_over_eps2_ratio",
                     (p_lo / (lo.eps * lo.eps)) / (p_hi / (hi.eps * hi.eps)));
        }
    }
    root.set("wall_time_s", timer.seconds());
    emit(g, root.dump());
    return 0;
}

// ---- gas ----

int run_gas(const GlobalOpts& g, double eps, double rho, double horizon, double n_paths,
            bool no_interactions, const std::string& dump_path, double dump_limit,
            std::vector<double> msd_grid, const std::string& process_name) {
    Timer timer;
    lorentz::GasConfig cfg;
    cfg.eps = eps;
    cfg.rho = rho;
    cfg.horizon = horizon;
    cfg.seed = g.seed;
    cfg.n_paths = as_count(n_paths, "--n-paths");
    cfg.threads = g.threads;
    cfg.interactions = !no_interactions;
    cfg.validate();

    lorentz::Process process = lorentz::Process::Y;
    if (process_name == "x") process = lorentz::Process::X;
    else if (process_name == "z") process = lorentz::Process::Z;
    else if (process_name != "y") throw ConfigError("--process: expected x, y, or z");

    const lorentz::MismatchStats ms = lorentz::mismatch_stats(cfg);

    std::vector<lorentz::MsdPoint> msd;
    if (!msd_grid.empty()) msd = lorentz::msd_curve(process, msd_grid, cfg.n_paths, cfg);

    if (!dump_path.empty()) {
        const std::uint64_t limit =
            std::min<std::uint64_t>(cfg.n_paths, as_count(dump_limit, "--dump-limit"));
        std::vector<std::vector<std::string>> rows;
        for (std::uint64_t p = 0; p < limit; ++p) {
            const lorentz::CoupledPaths run = lorentz::run_coupled(cfg, p);
            const std::pair<const char*, const std::vector<lorentz::TracePoint>*> traces[] = {
                {"x", &run.x_trace}, {"y", &run.y_trace}, {"z", &run.z_trace}};
            for (const auto& [name, trace] : traces)
                for (const auto& pt : *trace)
                    rows.push_back({std::to_string(p), name, io::format_double(pt.t),
                                    io::format_double(pt.pos.x), io::format_double(pt.pos.y),
                                    io::format_double(pt.pos.z)});
        }
        io::atomic_write_file(dump_path,
                              io::format_csv({"path_id", "process", "t", "x", "y", "z"}, rows));
    }

    if (g.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"per_leg", io::format_double(ms.per_leg_rate),
                        io::format_double(ms.std_err), std::to_string(ms.coupled_legs),
                        "gas_mismatch"});
        for (const auto& pt : msd)
            rows.push_back({io::format_double(pt.t), io::format_double(pt.msd),
                            io::format_double(pt.std_err), std::to_string(cfg.n_paths),
                            std::string("msd_") + process_name});
        emit(g, io::format_csv(kEstimatorHeader, rows));
        echo_csv_meta(g, "gas", timer.seconds());
        return 0;
    }

    io::Json root = artifact_root("gas", g);
    io::Json conf = io::Json::object();
    conf.set("eps", cfg.eps);
    conf.set("rho", cfg.rho);
    conf.set("contact_rate", cfg.contact_rate());
    conf.set("horizon", cfg.horizon);
    conf.set("n_paths", io::Json::uinteger(cfg.n_paths));
    conf.set("interactions", cfg.interactions);
    root.set("config", std::move(conf));
    io::Json mm = io::Json::object();
    mm.set("per_leg_rate", ms.per_leg_rate);
    mm.set("std_err", ms.std_err);
    mm.set("coupled_legs", io::Json::uinteger(ms.coupled_legs));
    mm.set("divergences", io::Json::uinteger(ms.divergences));
    mm.set("placed_hit", io::Json::uinteger(ms.placed_hit));
    mm.set("old_capsule", io::Json::uinteger(ms.old_capsule));
    mm.set("bounce_interrupt", io::Json::uinteger(ms.bounce_interrupt));
    root.set("mismatch", std::move(mm));
    io::Json flags = io::Json::object();
    flags.set("shadow_legs", io::Json::uinteger(ms.shadow_legs));
    flags.set("recollision_legs", io::Json::uinteger(ms.recollision_legs));
    flags.set("capsule_rejects", io::Json::uinteger(ms.capsule_rejects));
    flags.set("degenerate", io::Json::uinteger(ms.degenerate));
    root.set("leg_flags", std::move(flags));
    root.set("paths", io::Json::uinteger(ms.paths));
    if (!msd.empty()) {
        io::Json table = io::Json::array();
        for (const auto& pt : msd) {
            io::Json row = io::Json::object();
            row.set("t", pt.t);
            row.set("msd", pt.msd);
            row.set("std_err", pt.std_err);
            table.push(std::move(row));
        }
        root.set("msd_process", process_name);
        root.set("msd", std::move(table));
    }
    root.set("wall_time_s", timer.seconds());
    emit(g, root.dump());
    return 0;
}

// ---- selftest ----

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

void report(std::vector<Check>& checks, const std::string& name, bool pass,
            const std::string& detail) {
    checks.push_back({name, pass, detail});
    std::cerr << (pass ? "[ok]   " : "[FAIL] ") << name << ": " << detail << "\n";
}

int run_selftest(const GlobalOpts& g, double budget_flag) {
    Timer timer;
    const std::uint64_t budget = as_count(budget_flag, "--budget");
    std::vector<Check> checks;

    {
        // frozen two-collision example
        bounce::RecollisionEvent ev;
        ev.u = UnitVec3(0.0, 1.0, 0.0);
        ev.xi = 10.0;
        ev.v = UnitVec3(1.0, 0.0, 0.0);
        ev.r = 1.0;
        const bounce::BounceTrace tr = bounce::simulate_bounce(ev);
        const double s = 1.0 / std::sqrt(2.0);
        const bool pass = tr.n_collisions == 2 && std::abs(tr.beta - 10.0) < 1e-12 &&
                          std::abs(tr.a.x - s) < 1e-12 && std::abs(tr.a.y + s) < 1e-12 &&
                          std::abs(tr.b.x + s) < 1e-12 && std::abs(tr.b.y - 10.0 - s) < 1e-12;
        report(checks, "bounce_frozen_example", pass,
               "N=" + std::to_string(tr.n_collisions) + " beta=" + io::format_double(tr.beta));
    }
    {
        // recollision cap: every conditioned draw recollides and satisfies
        // the growth inequalities
        rng::Stream s(g.seed, rng::tag_salt("selftest/dispersive"));
        std::uint64_t bad_n = 0, bad_margin = 0;
        bounce::BounceTrace tr;
        const std::uint64_t n = std::max<std::uint64_t>(budget / 4, 1000);
        for (std::uint64_t i = 0; i < n; ++i) {
            bounce::RecollisionEvent ev;
            ev.u = sampling::sample_unit_sphere(s);
            ev.xi = 10.0 * std::exp(std::log(10.0) * s.next_double());
            ev.r = 1.0;
            const bounce::Centers c = bounce::build_centers(ev);
            const Vec3 axis = c.a - ev.xi * ev.u.vec();
            const double dist = recollide::geom::norm(axis);
            const auto cone =
                sampling::sample_cone(s, UnitVec3(axis), std::asin(std::min(1.0, ev.r / dist)));
            ev.v = cone.dir;
            try {
                ev.validate();
            } catch (const recollide::Error&) {
                continue;
            }
            bounce::simulate_bounce(ev, tr);
            if (tr.n_collisions < 3) {
                ++bad_n;
                continue;
            }
            const bounce::NormalFrame frame = bounce::normal_frame(tr);
            const bounce::DispersiveReport rep = bounce::check_dispersive(ev, tr, frame);
            const bounce::BasicReport basic = bounce::check_lemma_basic(ev, tr, frame);
            for (double m : rep.height_margin)
                if (m < -1e-9) ++bad_margin;
            for (double m : rep.slope_proof_margin)
                if (m < -1e-9) ++bad_margin;
            for (double m : rep.slope_display_margin)
                if (m < -1e-9) ++bad_margin;
            for (double m : rep.chained_margin)
                if (m < -1e-9) ++bad_margin;
            for (double m : basic.monotone_margin)
                if (m < -1e-9) ++bad_margin;
            if (basic.vertical_margin < -1e-9) ++bad_margin;
        }
        report(checks, "dispersive_margins", bad_n == 0 && bad_margin == 0,
               "cap_misses=" + std::to_string(bad_n) +
                   " margin_violations=" + std::to_string(bad_margin));
    }
    {
        // classifier agrees with the simulator; recollision implies prime
        rng::Stream s(g.seed, rng::tag_salt("selftest/classifier"));
        std::uint64_t disagree = 0, not_prime = 0, used = 0;
        bounce::BounceTrace tr;
        for (std::uint64_t i = 0; i < budget; ++i) {
            bounce::RecollisionEvent ev;
            ev.u = sampling::sample_unit_sphere(s);
            ev.v = sampling::sample_unit_sphere(s);
            ev.xi = 0.05 + s.next_exp();
            ev.r = 1.0;
            try {
                ev.validate();
            } catch (const recollide::Error&) {
                continue;
            }
            ++used;
            bounce::simulate_bounce(ev, tr);
            const bool rec = bounce::classify_recollision(ev);
            if (rec != (tr.n_collisions >= 3)) ++disagree;
            if (rec && !bounce::classify_prime(ev)) ++not_prime;
        }
        report(checks, "classifier_equivalence", disagree == 0 && not_prime == 0,
               "events=" + std::to_string(used) + " disagreements=" + std::to_string(disagree) +
                   " prime_violations=" + std::to_string(not_prime));
    }
    {
        // conditioned exponential: mean within 4 sigma
        rng::Stream s(g.seed, rng::tag_salt("selftest/exp"));
        stats::Accumulator acc;
        for (std::uint64_t i = 0; i < budget; ++i)
            acc.add(sampling::sample_exp_unit_conditioned(s));
        const double z = (acc.mean() - sampling::exp_unit_conditioned_mean()) /
                         (acc.stderr_mean() > 0.0 ? acc.stderr_mean() : 1.0);
        report(checks, "exp_unit_conditioned_mean", std::abs(z) < 4.0,
               "mean=" + io::format_double(acc.mean()) + " z=" + io::format_double(z));
    }
    {
        // cross decomposition: theta law and direction uniformity
        rng::Stream s(g.seed, rng::tag_salt("selftest/cross"));
        std::vector<double> thetas;
        int nz = 0, naz = 0;
        estimators::equal_area_bins(48, nz, naz);
        std::vector<std::uint64_t> counts(48, 0);
        const std::uint64_t n = std::min<std::uint64_t>(budget, 20000);
        for (std::uint64_t i = 0; i < n; ++i) {
            const UnitVec3 u = sampling::sample_unit_sphere(s);
            const UnitVec3 v = sampling::sample_unit_sphere(s);
            try {
                const sampling::CrossDecomposition d = sampling::cross_decomposition(u, v);
                thetas.push_back(d.theta);
                ++counts[static_cast<std::size_t>(
                    estimators::equal_area_bin_index(d.w.vec(), nz, naz))];
            } catch (const recollide::ParallelVectorsError&) {
            }
        }
        const stats::KsResult ks = stats::ks_test(std::move(thetas), sampling::cross_theta_cdf);
        const stats::ChiSquareResult chi = stats::chi_square_uniform(counts);
        report(checks, "cross_decomposition_laws", ks.p_value > 0.01 && chi.p_value > 0.01,
               "theta_ks_p=" + io::format_double(ks.p_value) +
                   " w_chi2_p=" + io::format_double(chi.p_value));
    }
    {
        const lorentz::KernelCheck k = lorentz::scattering_kernel_check(
            std::max<std::uint64_t>(budget, 1000), g.seed);
        report(checks, "scattering_kernel", k.chi2_p > 0.01 && k.azimuth_ks_p > 0.01 &&
                                                k.transfer_ks_p > 0.01,
               "chi2_p=" + io::format_double(k.chi2_p) +
                   " azimuth_ks_p=" + io::format_double(k.azimuth_ks_p) +
                   " transfer_ks_p=" + io::format_double(k.transfer_ks_p));
    }

    bool all = true;
    for (const auto& c : checks) all = all && c.pass;

    io::Json root = artifact_root("selftest", g);
    root.set("budget", io::Json::uinteger(budget));
    io::Json arr = io::Json::array();
    for (const auto& c : checks) {
        io::Json e = io::Json::object();
        e.set("name", c.name);
        e.set("pass", c.pass);
        e.set("detail", c.detail);
        arr.push(std::move(e));
    }
    root.set("checks", std::move(arr));
    root.set("pass", all);
    root.set("wall_time_s", timer.seconds());
    emit(g, root.dump());
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    GlobalOpts g;
    CLI::App app{"recollide: recollision geometry of the dilute Lorentz gas"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; command-line flags take precedence");
    app.add_option("--seed", g.seed, "base RNG seed")->envname("RECOLLIDE_SEED");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
    app.add_option("--out", g.out, "output path (atomic write); default stdout");
    app.add_option("--format", g.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    auto* sub_bounce = app.add_subcommand("bounce", "simulate one two-scatterer event");
    sub_bounce->fallthrough();
    std::string u_text = "0,1,0", v_text = "1,0,0";
    double xi = 10.0, r = 1.0;
    int n_max = 10000;
    sub_bounce->add_option("--u", u_text, "outgoing direction after the first collision (x,y,z)");
    sub_bounce->add_option("--xi", xi, "flight time between the two collisions");
    sub_bounce->add_option("--v", v_text, "outgoing direction after the second collision (x,y,z)");
    sub_bounce->add_option("--r", r, "scatterer radius");
    sub_bounce->add_option("--n-max", n_max, "collision cap");

    auto* sub_tails = app.add_subcommand("tails", "tail masses of the bounce process");
    sub_tails->fallthrough();
    std::string regime = "trap-n3";
    std::vector<double> s_grid;
    double budget = 1e6, mu_r = 0.0, h_min = 0.0, h_max = 0.0, min_hits = 100;
    bool lebesgue = false;
    sub_tails->add_option("--regime", regime,
                          "short-any, long-n3, long-n4plus, trap-n3, trap-n4plus");
    sub_tails->add_option("--s", s_grid, "threshold grid")->delimiter(',')->required();
    sub_tails->add_option("--budget", budget, "conditioned draws");
    sub_tails->add_option("--r", mu_r, "scatterer radius: 0 = unit-radius flat suite, >0 = "
                                       "finite-radius suite at r");
    sub_tails->add_option("--h-min", h_min, "flight-time range low end (0 = regime default)");
    sub_tails->add_option("--h-max", h_max, "flight-time range high end (0 = regime default)");
    sub_tails->add_option("--min-hits", min_hits, "drop grid points with fewer hits from the fit");
    sub_tails->add_flag("--lebesgue", lebesgue, "divide out the flight density (finite-radius "
                                                "suite only)");

    auto* sub_exit = app.add_subcommand("exit-dist", "exit-direction uniformity in total variation");
    sub_exit->fallthrough();
    std::vector<double> radii{10.0, 20.0, 40.0, 80.0};
    double tv_budget = 4e6, min_cond = 10000, ks_cap = 20000;
    int bins = 192;
    std::string nu_text = "0,0,1";
    sub_exit->add_option("--radii", radii, "flight times R")->delimiter(',');
    sub_exit->add_option("--budget", tv_budget, "cone draws per radius");
    sub_exit->add_option("--bins", bins, "equal-area bins");
    sub_exit->add_option("--nu", nu_text, "incoming direction (x,y,z)");
    sub_exit->add_option("--min-conditioned", min_cond, "required conditioned sample size");
    sub_exit->add_option("--ks-cap", ks_cap, "KS subsample cap");

    auto* sub_ind = app.add_subcommand("indirect", "indirect-return probability of three flights");
    sub_ind->fallthrough();
    std::vector<double> eps_grid{0.1, 0.03, 0.01};
    double ind_budget = 1e6;
    std::string mode = "both";
    sub_ind->add_option("--eps", eps_grid, "ball radii")->delimiter(',');
    sub_ind->add_option("--budget", ind_budget, "Monte Carlo draws per radius");
    sub_ind->add_option("--mode", mode, "mc, quadrature, or both");

    auto* sub_gas = app.add_subcommand("gas", "coupled Lorentz gas / Markov flight paths");
    sub_gas->fallthrough();
    double eps = 0.05, rho = 0.0, horizon = 100.0, n_paths = 1000, dump_limit = 10;
    bool no_interactions = false;
    std::string dump_path, process_name = "y";
    std::vector<double> msd_grid;
    sub_gas->add_option("--eps", eps, "scatterer radius");
    sub_gas->add_option("--rho", rho, "scatterer intensity (0 = 1/(pi eps^2))");
    sub_gas->add_option("--horizon", horizon, "time horizon per path");
    sub_gas->add_option("--n-paths", n_paths, "number of paths");
    sub_gas->add_flag("--no-interactions", no_interactions,
                      "disable memory effects; X, Y, Z coincide");
    sub_gas->add_option("--dump-paths", dump_path, "write traces as CSV to this path");
    sub_gas->add_option("--dump-limit", dump_limit, "paths to dump");
    sub_gas->add_option("--msd-grid", msd_grid, "times for the mean squared displacement")
        ->delimiter(',');
    sub_gas->add_option("--process", process_name, "process for the MSD table: x, y, or z");

    auto* sub_self = app.add_subcommand("selftest", "run the invariant suite");
    sub_self->fallthrough();
    double self_budget = 20000;
    sub_self->add_option("--budget", self_budget, "draws per probabilistic check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (sub_bounce->parsed()) return run_bounce(g, u_text, xi, v_text, r, n_max);
        if (sub_tails->parsed())
            return run_tails(g, regime, s_grid, budget, mu_r, h_min, h_max, min_hits, lebesgue);
        if (sub_exit->parsed())
            return run_exit_dist(g, radii, tv_budget, bins, nu_text, min_cond, ks_cap);
        if (sub_ind->parsed()) return run_indirect(g, eps_grid, ind_budget, mode);
        if (sub_gas->parsed())
            return run_gas(g, eps, rho, horizon, n_paths, no_interactions, dump_path, dump_limit,
                           msd_grid, process_name);
        if (sub_self->parsed()) return run_selftest(g, self_budget);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const recollide::PreconditionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const recollide::BadRangeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const recollide::BadAngleError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const recollide::DegenerateEventError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const recollide::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
