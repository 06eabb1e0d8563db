// potlab: command-line laboratory for eigenvalue-optimal potentials.
// Subcommands recompute everything from the config deterministically, so two
// runs with the same config produce byte-identical CSV and PGM outputs.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "potlab/bathtub.hpp"
#include "potlab/control.hpp"
#include "potlab/grid.hpp"
#include "potlab/io.hpp"
#include "potlab/optimizer.hpp"
#include "potlab/rng.hpp"
#include "potlab/spectral.hpp"
#include "potlab/stability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace potlab;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    Shape shape = Shape::rectangle(1.0, 1.0);
    int resolution = 0;
    double V0_fraction = 0.0;
    std::uint64_t seed = 0;
    int workers = 1;
    fs::path output_dir;

    EnumerateOptions optimizer;
    StabilityOptions stability;      // deltas filled from fractions at runtime
    std::vector<double> delta_fractions;
    int bathtub_trials = 1000;

    double shape_amplitude = 0.3;
    double shape_support_fraction = 0.8;
    int shape_t_steps = 5;
    double shape_t_scale_cells = 2.0;

    std::vector<double> T_list = {1.0, 2.0, 4.0, 8.0};
    int nt_per_unit = 64;
    ControlOptions control;
    InitialStateSpec y0;

    json echo; // the raw document, for the manifest
};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config." + path + ": " + what);
}

double need_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "must be a number");
    return j.get<double>();
}

int need_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "must be an integer");
    return j.get<int>();
}

Config load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }

    Config c;
    c.echo = doc;

    if (!doc.contains("resolution")) fail("resolution", "is required");
    c.resolution = need_int(doc["resolution"], "resolution");
    if (c.resolution < 8) fail("resolution", "must be at least 8");

    if (!doc.contains("V0_fraction")) fail("V0_fraction", "is required");
    c.V0_fraction = need_number(doc["V0_fraction"], "V0_fraction");
    if (!(c.V0_fraction > 0.0 && c.V0_fraction < 1.0))
        fail("V0_fraction", "must lie strictly between 0 and 1");

    if (doc.contains("domain")) {
        const json& d = doc["domain"];
        std::string kind = d.value("kind", "rectangle");
        if (kind == "rectangle") {
            double w = d.contains("width") ? need_number(d["width"], "domain.width") : 1.0;
            double h = d.contains("height") ? need_number(d["height"], "domain.height") : 1.0;
            if (!(w > 0.0) || !(h > 0.0)) fail("domain", "rectangle sides must be positive");
            c.shape = Shape::rectangle(w, h);
        } else if (kind == "disk") {
            double r = d.contains("radius") ? need_number(d["radius"], "domain.radius") : 0.5;
            if (!(r > 0.0)) fail("domain.radius", "must be positive");
            c.shape = Shape::disk(r);
        } else {
            fail("domain.kind", "must be \"rectangle\" or \"disk\"");
        }
    }

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
            fail("seed", "must be a nonnegative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("workers")) {
        c.workers = need_int(doc["workers"], "workers");
        if (c.workers < 1) fail("workers", "must be at least 1");
    }
    if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();

    if (doc.contains("optimizer")) {
        const json& o = doc["optimizer"];
        if (o.contains("n_starts")) {
            c.optimizer.n_starts = need_int(o["n_starts"], "optimizer.n_starts");
            if (c.optimizer.n_starts < 1) fail("optimizer.n_starts", "must be at least 1");
        }
        if (o.contains("beta_fraction"))
            c.optimizer.beta_fraction = need_number(o["beta_fraction"], "optimizer.beta_fraction");
        if (o.contains("cluster_tol_fraction"))
            c.optimizer.cluster_tol_fraction =
                need_number(o["cluster_tol_fraction"], "optimizer.cluster_tol_fraction");
        if (o.contains("max_iter"))
            c.optimizer.opt.max_iter = need_int(o["max_iter"], "optimizer.max_iter");
        if (o.contains("eigen_tol"))
            c.optimizer.opt.eigen_tol = need_number(o["eigen_tol"], "optimizer.eigen_tol");
    }

    if (doc.contains("stability")) {
        const json& s = doc["stability"];
        if (s.contains("delta_fractions")) {
            if (!s["delta_fractions"].is_array())
                fail("stability.delta_fractions", "must be an array of numbers");
            for (std::size_t i = 0; i < s["delta_fractions"].size(); ++i) {
                double f = need_number(s["delta_fractions"][i],
                                       "stability.delta_fractions[" + std::to_string(i) + "]");
                if (!(f > 0.0)) fail("stability.delta_fractions", "entries must be positive");
                c.delta_fractions.push_back(f);
            }
        }
        if (s.contains("n_per_delta")) {
            c.stability.n_per_delta = need_int(s["n_per_delta"], "stability.n_per_delta");
            if (c.stability.n_per_delta < 1) fail("stability.n_per_delta", "must be at least 1");
        }
        if (s.contains("local_descent")) {
            if (!s["local_descent"].is_boolean()) fail("stability.local_descent", "must be a bool");
            c.stability.local_descent = s["local_descent"].get<bool>();
        }
        if (s.contains("descent_steps"))
            c.stability.descent_steps = need_int(s["descent_steps"], "stability.descent_steps");
    }

    if (doc.contains("bathtub")) {
        const json& b = doc["bathtub"];
        if (b.contains("n_trials")) {
            c.bathtub_trials = need_int(b["n_trials"], "bathtub.n_trials");
            if (c.bathtub_trials < 1) fail("bathtub.n_trials", "must be at least 1");
        }
    }

    if (doc.contains("shape")) {
        const json& s = doc["shape"];
        if (s.contains("amplitude"))
            c.shape_amplitude = need_number(s["amplitude"], "shape.amplitude");
        if (s.contains("support_fraction"))
            c.shape_support_fraction =
                need_number(s["support_fraction"], "shape.support_fraction");
        if (s.contains("t_steps")) {
            c.shape_t_steps = need_int(s["t_steps"], "shape.t_steps");
            if (c.shape_t_steps < 3) fail("shape.t_steps", "must be at least 3");
        }
        if (s.contains("t_scale_cells"))
            c.shape_t_scale_cells = need_number(s["t_scale_cells"], "shape.t_scale_cells");
    }

    if (doc.contains("control")) {
        const json& t = doc["control"];
        if (t.contains("T_list")) {
            if (!t["T_list"].is_array() || t["T_list"].empty())
                fail("control.T_list", "must be a nonempty array of increasing horizons");
            c.T_list.clear();
            for (std::size_t i = 0; i < t["T_list"].size(); ++i) {
                double T = need_number(t["T_list"][i], "control.T_list[" + std::to_string(i) + "]");
                if (!(T > 0.0)) fail("control.T_list", "horizons must be positive");
                if (!c.T_list.empty() && T <= c.T_list.back())
                    fail("control.T_list", "horizons must be strictly increasing");
                c.T_list.push_back(T);
            }
        }
        if (t.contains("nt_per_unit")) {
            c.nt_per_unit = need_int(t["nt_per_unit"], "control.nt_per_unit");
            if (c.nt_per_unit < 1) fail("control.nt_per_unit", "must be at least 1");
        }
        if (t.contains("max_iter"))
            c.control.max_iter = need_int(t["max_iter"], "control.max_iter");
        if (t.contains("y0")) {
            const json& y = t["y0"];
            std::string kind = y.value("kind", "uniform");
            if (kind == "uniform") {
                c.y0.kind = InitialStateSpec::Kind::Uniform;
            } else if (kind == "gaussian") {
                c.y0.kind = InitialStateSpec::Kind::Gaussian;
                c.y0.cx = y.contains("cx") ? need_number(y["cx"], "control.y0.cx") : 0.5;
                c.y0.cy = y.contains("cy") ? need_number(y["cy"], "control.y0.cy") : 0.5;
                c.y0.width = y.contains("width") ? need_number(y["width"], "control.y0.width") : 0.2;
                if (!(c.y0.width > 0.0)) fail("control.y0.width", "must be positive");
            } else if (kind == "indicator") {
                c.y0.kind = InitialStateSpec::Kind::Indicator;
                c.y0.x0 = y.contains("x0") ? need_number(y["x0"], "control.y0.x0") : 0.0;
                c.y0.y0 = y.contains("y0") ? need_number(y["y0"], "control.y0.y0") : 0.0;
                c.y0.x1 = y.contains("x1") ? need_number(y["x1"], "control.y0.x1") : 0.5;
                c.y0.y1 = y.contains("y1") ? need_number(y["y1"], "control.y0.y1") : 0.5;
            } else {
                fail("control.y0.kind", "must be \"uniform\", \"gaussian\", or \"indicator\"");
            }
        }
    }

    return c;
}

// Everything a subcommand needs, plus the output ledger for the manifest.
struct Session {
    Config cfg;
    GridDomain grid;
    double V0 = 0.0;
    fs::path out;
    std::map<std::string, fs::path> written;
    json summary;

    explicit Session(Config c)
        : cfg(std::move(c)), grid(build_grid(cfg.shape, cfg.resolution)) {
        V0 = cfg.V0_fraction * grid.measure();
        out = cfg.output_dir;
        fs::create_directories(out);
    }

    void record(const fs::path& p) { written[p.filename().string()] = p; }
    void record(const std::vector<fs::path>& ps) {
        for (const auto& p : ps) record(p);
    }
};

std::string bool_cell(bool b) { return b ? "1" : "0"; }

OptimalSetRegistry run_optimize(Session& s, bool write_fields = true) {
    EnumerateOptions opts = s.cfg.optimizer;
    opts.seed = s.cfg.seed;
    opts.workers = s.cfg.workers;
    auto reg = enumerate_optima(s.grid, s.V0, opts);

    {
        CsvWriter w(s.out / "registry.csv");
        w.row({"entry_id", "lambda", "mu", "multiplier", "multiplier_spread", "hopf",
               "perimeter", "mass", "fixed_point_residual"});
        for (std::size_t i = 0; i < reg.entries.size(); ++i) {
            const auto& e = reg.entries[i];
            w.row({std::to_string(i), format_double(e.lambda), format_double(e.mu),
                   format_double(e.multiplier), format_double(e.multiplier_spread),
                   format_double(e.hopf), format_double(e.perimeter),
                   format_double(integrate(s.grid, e.V.field)),
                   format_double(e.fixed_point_residual)});
        }
        s.record(w.path);
    }
    if (write_fields) {
        for (std::size_t i = 0; i < reg.entries.size(); ++i) {
            s.record(dump_field(s.grid, reg.entries[i].V.field,
                                s.out / ("potential_" + std::to_string(i))));
            s.record(dump_field(s.grid, reg.entries[i].pair.u,
                                s.out / ("eigenfunction_" + std::to_string(i))));
        }
    }
    s.summary["lambda_bar"] = reg.lambda_bar;
    s.summary["dirichlet_lambda"] = reg.dirichlet_lambda;
    s.summary["n_entries"] = reg.entries.size();
    s.summary["failed_starts"] = reg.failed_starts;
    return reg;
}

void run_stability(Session& s, const OptimalSetRegistry& reg) {
    StabilityOptions opts = s.cfg.stability;
    opts.seed = s.cfg.seed;
    opts.workers = s.cfg.workers;
    opts.eigen_tol = s.cfg.optimizer.opt.eigen_tol;
    for (double f : s.cfg.delta_fractions) opts.deltas.push_back(f * s.V0);

    auto rep = estimate_constant(s.grid, reg, opts);

    {
        CsvWriter w(s.out / "stability_samples.csv");
        w.row({"delta", "sample_id", "base_index", "lambda", "gap", "ratio", "descended"});
        for (const auto& smp : rep.samples)
            w.row({format_double(smp.delta), std::to_string(smp.sample_id),
                   std::to_string(smp.base_index), format_double(smp.lambda),
                   format_double(smp.gap), format_double(smp.ratio), bool_cell(smp.descended)});
        s.record(w.path);
    }
    {
        CsvWriter w(s.out / "stability_summary.csv");
        w.row({"delta", "min_ratio", "median_ratio", "min_gap", "raw_min_gap", "n"});
        for (const auto& pd : rep.per_delta)
            w.row({format_double(pd.delta), format_double(pd.min_ratio),
                   format_double(pd.median_ratio), format_double(pd.min_gap),
                   format_double(pd.raw_min_gap), std::to_string(pd.n)});
        s.record(w.path);
    }
    {
        CsvWriter w(s.out / "stability_report.csv");
        w.row({"lambda_bar", "estimated_C", "loglog_slope", "invalid_registry", "seed"});
        w.row({format_double(rep.lambda_bar), format_double(rep.estimated_C),
               format_double(rep.loglog_slope), bool_cell(rep.invalid_registry),
               std::to_string(rep.seed)});
        s.record(w.path);
    }
    s.summary["estimated_C"] = rep.estimated_C;
    s.summary["loglog_slope"] = rep.loglog_slope;
    s.summary["invalid_registry"] = rep.invalid_registry;
    if (rep.invalid_registry)
        throw Error("stability: negative eigenvalue gap, the registry is not optimal");
}

void run_bathtub_check(Session& s) {
    Rng rng(s.cfg.seed, "cli/bathtub");
    long violations = 0;
    CsvWriter w(s.out / "bathtub_ratios.csv");
    w.row({"trial", "V0", "ratio"});
    for (int trial = 0; trial < s.cfg.bathtub_trials; ++trial) {
        ScalarField f(s.grid);
        for (int k = 0; k < s.grid.size(); ++k) f[k] = rng.uniform(-1.0, 2.0);
        double V0 = rng.uniform(0.05, 0.95) * s.grid.measure();
        ScalarField g(s.grid);
        for (int k = 0; k < s.grid.size(); ++k) g[k] = rng.uniform();
        Potential V = bathtub_projection(s.grid, g, V0);
        double ratio;
        try {
            ratio = bathtub_stability_ratio(s.grid, f, V);
        } catch (const DegenerateDistance&) {
            continue; // V collided with the projection of f itself
        }
        if (ratio < 0.0) ++violations;
        w.row({std::to_string(trial), format_double(V0), format_double(ratio)});
    }
    s.record(w.path);
    s.summary["bathtub_violations"] = violations;
    if (violations > 0)
        throw Error("bathtub-check: " + std::to_string(violations) + " negative ratios");
}

void run_shape_check(Session& s, const OptimalSetRegistry& reg) {
    const auto& e = reg.entries.front();
    double mx = 0.0, my = 0.0, m = 0.0;
    for (int k = 0; k < s.grid.size(); ++k) {
        double v = e.V.field[k];
        mx += s.grid.cx(k) * v;
        my += s.grid.cy(k) * v;
        m += v;
    }
    mx /= m;
    my /= m;

    const double radius_proxy = std::sqrt(s.V0 / 3.14159265358979323846);
    const double t_scale = s.cfg.shape_t_scale_cells * s.grid.h;
    std::vector<double> ts;
    for (int i = 0; i < s.cfg.shape_t_steps; ++i)
        ts.push_back(-t_scale + 2.0 * t_scale * i / (s.cfg.shape_t_steps - 1));

    EigenOptions eig;
    eig.tol = s.cfg.optimizer.opt.eigen_tol;
    eig.shift = reg.dirichlet_lambda - 2.0;

    CsvWriter cases(s.out / "shape_check.csv");
    cases.row({"field", "t", "lambda", "volume", "lagrangian"});
    CsvWriter report(s.out / "shape_report.csv");
    report.row({"field", "kind", "fd_slope", "multiplier"});

    for (int fi = 0; fi < 2; ++fi) {
        VectorFieldSpec phi;
        phi.kind = fi == 0 ? VectorFieldSpec::Kind::RadialBump : VectorFieldSpec::Kind::Rotation;
        phi.cx = mx;
        phi.cy = my;
        phi.support = 2.0 * s.cfg.shape_support_fraction * radius_proxy;
        phi.amplitude = s.cfg.shape_amplitude;

        auto rep = shape_derivative_check(s.grid, e.V, e.multiplier, phi, ts, eig);
        for (const auto& c : rep.cases)
            cases.row({std::to_string(fi), format_double(c.t), format_double(c.lambda),
                       format_double(c.volume), format_double(c.lagrangian)});
        report.row({std::to_string(fi), fi == 0 ? "radial" : "rotation",
                    format_double(rep.fd_slope), format_double(rep.multiplier)});
        s.summary[fi == 0 ? "fd_slope_radial" : "fd_slope_rotation"] = rep.fd_slope;
    }
    s.record(cases.path);
    s.record(report.path);
}

void write_turnpike_rows(CsvWriter& w, const TurnpikeReport& r) {
    w.row({format_double(r.T), format_double(r.objective), format_double(r.static_objective),
           format_double(r.turnpike_integral), format_double(r.A0),
           format_double(r.decay_fit.slope), format_double(r.decay_fit.implied_lambda),
           format_double(r.gronwall_margin), std::to_string(r.fw_iterations),
           bool_cell(r.no_improvement)});
}

const std::vector<std::string> kTurnpikeHeader = {
    "T",  "objective",   "static_objective", "turnpike_integral", "A0",
    "decay_slope", "implied_lambda", "gronwall_margin",  "fw_iterations",     "no_improvement"};

void run_control(Session& s, const OptimalSetRegistry& reg) {
    double T = s.cfg.T_list.front();
    int nt = static_cast<int>(std::lround(T * s.cfg.nt_per_unit));
    auto y0 = make_initial_state(s.grid, s.cfg.y0);
    auto res = optimize_control(s.grid, reg, T, nt, y0, s.cfg.control);

    {
        CsvWriter w(s.out / "trajectory.csv");
        w.row({"slice", "t", "dist_to_registry", "lambda"});
        for (std::size_t k = 0; k < res.report.per_slice_dist.size(); ++k)
            w.row({std::to_string(k), format_double(res.traj.dt * (static_cast<double>(k) + 1.0)),
                   format_double(res.report.per_slice_dist[k]),
                   format_double(res.report.per_slice_lambda[k])});
        s.record(w.path);
    }
    {
        CsvWriter w(s.out / "turnpike_report.csv");
        w.row(kTurnpikeHeader);
        write_turnpike_rows(w, res.report);
        s.record(w.path);
    }
    s.record(dump_field(s.grid, res.traj.slices.back().field, s.out / "final_control"));
    s.summary["control_objective"] = res.report.objective;
    s.summary["turnpike_integral"] = res.report.turnpike_integral;
}

void run_sweep(Session& s, const OptimalSetRegistry& reg) {
    auto y0 = make_initial_state(s.grid, s.cfg.y0);
    auto sweep = horizon_sweep(s.grid, reg, s.cfg.T_list, s.cfg.nt_per_unit, y0, s.cfg.control,
                               s.cfg.workers);
    {
        CsvWriter w(s.out / "turnpike_sweep.csv");
        w.row(kTurnpikeHeader);
        for (const auto& r : sweep.reports) write_turnpike_rows(w, r);
        s.record(w.path);
    }
    {
        CsvWriter w(s.out / "sweep_summary.csv");
        w.row({"growth_slope", "slope_tol", "saturated"});
        w.row({format_double(sweep.growth_slope), format_double(sweep.slope_tol),
               bool_cell(sweep.saturated)});
        s.record(w.path);
    }
    s.summary["growth_slope"] = sweep.growth_slope;
    s.summary["saturated"] = sweep.saturated;
}

void write_manifest(Session& s, const std::string& command, double wall_seconds) {
    json man;
    man["command"] = command;
    man["config"] = s.cfg.echo;
    man["seed"] = s.cfg.seed;
    man["wall_seconds"] = wall_seconds;
    man["summary"] = s.summary;
    json hashes = json::object();
    char buf[17];
    for (const auto& [name, path] : s.written) {
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(hash_file(path)));
        hashes[name] = buf;
    }
    man["outputs"] = hashes;
    std::ofstream out(s.out / "manifest.json");
    out << man.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for eigenvalue-optimal potentials"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> workers_override;
    app.add_option("--config", config_path, "JSON configuration file")->required();
    app.add_option("--output", output_override, "override config.output_dir");
    app.add_option("--seed", seed_override, "override config.seed");
    app.add_option("--workers", workers_override, "override config.workers");

    auto* cmd_optimize = app.add_subcommand("optimize", "enumerate optimal potentials");
    auto* cmd_stability = app.add_subcommand("stability", "sample shells around the optima");
    auto* cmd_bathtub = app.add_subcommand("bathtub-check", "audit rearrangement ratios");
    auto* cmd_shape = app.add_subcommand("shape-check", "deformation test of criticality");
    auto* cmd_control = app.add_subcommand("control", "optimize one finite-horizon control");
    auto* cmd_sweep = app.add_subcommand("turnpike-sweep", "control over a horizon ladder");
    auto* cmd_all = app.add_subcommand("all", "every stage into one output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = load_config(config_path);
        if (!output_override.empty()) cfg.output_dir = output_override;
        if (cfg.output_dir.empty())
            throw ConfigError("config.output_dir: is required (or pass --output)");
        if (seed_override) cfg.seed = *seed_override;
        if (workers_override) {
            if (*workers_override < 1) throw ConfigError("--workers: must be at least 1");
            cfg.workers = *workers_override;
        }

        auto t0 = std::chrono::steady_clock::now();
        Session s(std::move(cfg));
        std::string command;

        try {
            if (cmd_optimize->parsed()) {
                command = "optimize";
                run_optimize(s);
            } else if (cmd_stability->parsed()) {
                command = "stability";
                run_stability(s, run_optimize(s, false));
            } else if (cmd_bathtub->parsed()) {
                command = "bathtub-check";
                run_bathtub_check(s);
            } else if (cmd_shape->parsed()) {
                command = "shape-check";
                run_shape_check(s, run_optimize(s, false));
            } else if (cmd_control->parsed()) {
                command = "control";
                run_control(s, run_optimize(s, false));
            } else if (cmd_sweep->parsed()) {
                command = "turnpike-sweep";
                run_sweep(s, run_optimize(s, false));
            } else if (cmd_all->parsed()) {
                command = "all";
                auto reg = run_optimize(s);
                run_bathtub_check(s);
                run_stability(s, reg);
                run_shape_check(s, reg);
                run_control(s, reg);
                run_sweep(s, reg);
            }
        } catch (...) {
            // keep whatever was produced, with the manifest naming the failure
            auto t1 = std::chrono::steady_clock::now();
            s.summary["failed"] = true;
            write_manifest(s, command.empty() ? "unknown" : command,
                           std::chrono::duration<double>(t1 - t0).count());
            throw;
        }
        auto t1 = std::chrono::steady_clock::now();
        write_manifest(s, command, std::chrono::duration<double>(t1 - t0).count());
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
