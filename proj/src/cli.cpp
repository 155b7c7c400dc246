#include "qsdlab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsdlab/analytics.hpp"
#include "qsdlab/doob.hpp"
#include "qsdlab/errors.hpp"
#include "qsdlab/montecarlo.hpp"
#include "qsdlab/spectral.hpp"

namespace qsd {

namespace {

using nlohmann::ordered_json;

struct FlagBinding {
    const char* flag;
    const char* key;
    const char* help;
};

const FlagBinding kValueFlags[] = {
    {"--example", "example", "closed-form example: brownian | ou"},
    {"--N", "example.N", "Brownian half-width N"},
    {"--d", "example.d", "dimension of the product example"},
    {"--potential", "potential.family", "zero | quadratic | shifted-power | tabulated"},
    {"--lambda", "potential.lambda", "quadratic stiffness lambda"},
    {"--delta", "potential.delta", "shifted-power exponent delta"},
    {"--table", "potential.table_path", "CSV table x,V,Vp,Vpp"},
    {"--x-min", "grid.x_min", "left endpoint"},
    {"--x-max", "grid.x_max", "right endpoint"},
    {"--n", "grid.n", "number of interior nodes"},
    {"--t-max", "flow.t_max", "last flow time"},
    {"--dt", "flow.dt", "flow time step"},
    {"--samples", "flow.samples", "number of flow sample times"},
    {"--mc-dt", "mc.dt", "Euler-Maruyama step"},
    {"--horizon", "mc.horizon", "simulation horizon"},
    {"--particles", "mc.particles", "number of particles"},
    {"--threads", "mc.threads", "worker threads (0 = all)"},
    {"--bins", "mc.bins", "histogram cells for the empirical law"},
    {"--initial", "initial.family", "uniform | gaussian-truncated | qsd | custom"},
    {"--mean", "initial.mean", "gaussian-truncated mean"},
    {"--sd", "initial.sd", "gaussian-truncated standard deviation"},
    {"--initial-path", "initial.path", "CSV x,density for a custom initial law"},
    {"--lambda0-lower", "rates.lambda0_lower", "lower bound on lambda0 used for kappa_tilde"},
    {"--probe-min", "rates.probe_min", "left end of the kappa_tilde probe window"},
    {"--probe-max", "rates.probe_max", "right end of the kappa_tilde probe window"},
    {"--identity-probe-max", "identity.probe_max", "right end of the integral identity probe"},
    {"--window-from", "report.window_from", "rate-fit window start"},
    {"--window-to", "report.window_to", "rate-fit window end"},
    {"--x0", "report.x0", "centre of psi = 1 + |x - x0|"},
    {"--output", "output.dir", "output directory"},
    {"--seed", "seed", "random seed"},
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

GridMeasure make_initial(const RunConfig& cfg, const ProblemSetup& s,
                         const TridiagonalOperator* op, const EigenPair* eigen) {
    const std::string family = cfg.get_string("initial.family", "uniform");
    const Grid1D& g = s.grid;
    if (family == "uniform") {
        return GridMeasure::from_density(g, std::vector<double>(g.size(), 1.0));
    }
    if (family == "gaussian-truncated") {
        const double mean = cfg.get_double("initial.mean", 0.5 * (g.x_min() + g.x_max()));
        const double sd = cfg.get_double("initial.sd", 0.3);
        std::vector<double> d(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double z = (g.node(i) - mean) / sd;
            d[i] = std::exp(-0.5 * z * z);
        }
        return GridMeasure::from_density(g, std::move(d));
    }
    if (family == "qsd") {
        if (op == nullptr || eigen == nullptr) {
            throw ValidationError("initial.family = qsd needs the eigenpair");
        }
        return alpha_measure(*op, *eigen);
    }
    const std::string path = cfg.get_string("initial.path", "");
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read initial.path " + path);
    GridMeasure mu = read_measure_csv(in);
    if (mu.size() != g.size() || std::abs(mu.grid().x_min() - g.x_min()) > 1e-9 ||
        std::abs(mu.grid().x_max() - g.x_max()) > 1e-9) {
        throw ValidationError("initial.path grid does not match the configured grid");
    }
    return GridMeasure::from_density(g, std::vector<double>(mu.density().begin(), mu.density().end()));
}

std::string eigen_artifacts(const RunConfig& cfg, const ProblemSetup& s,
                            const TridiagonalOperator& op, const EigenPair& eigen) {
    ordered_json j;
    j["lambda0"] = eigen.lambda0;
    j["lambda1"] = eigen.lambda1 ? ordered_json(*eigen.lambda1) : ordered_json();
    j["normalization"] = eigen.normalization;
    j["gamma_shift"] = eigen.gamma_shift;
    j["gap"] = eigen.lambda1 ? ordered_json(*eigen.lambda1 - eigen.lambda0) : ordered_json();
    j["potential"] = s.spec.name();
    j["grid"] = {{"x_min", s.grid.x_min()}, {"x_max", s.grid.x_max()}, {"n", s.grid.size()}};
    j["eigen_residual"] = eigen_residual(op, eigen);
    if (s.spec.cdfi() && s.grid.x_min() == 0.0) {
        const auto r = integral_identity_residual(eigen, s.spec, s.grid,
                                                  cfg.get_optional_double("identity.probe_max"));
        j["identity_residual"] = {{"kernel", r.kernel},
                                  {"first", r.first},
                                  {"second", r.second},
                                  {"scale_kernel", r.scale_kernel},
                                  {"probe_max", r.probe_max}};
    }
    return j.dump(2) + "\n";
}

OutputBundle run_eigen(const RunConfig& cfg, const ProblemSetup& s, std::ostream& out) {
    const auto op = assemble_generator(s.spec, s.grid);
    const auto eigen = solve_eigen(op);
    OutputBundle b;
    b.add("eigen.json", eigen_artifacts(cfg, s, op, eigen));
    std::ostringstream eta, alpha;
    write_eta_csv(eta, eigen, s.grid);
    write_measure_csv(alpha, alpha_measure(op, eigen));
    b.add("eta.csv", eta.str());
    b.add("alpha.csv", alpha.str());
    out << "lambda0 " << fmt17(eigen.lambda0) << "\n";
    return b;
}

std::vector<double> sample_times(const RunConfig& cfg, double gap) {
    const double t_max = cfg.get_double("flow.t_max", 3.5 / gap);
    const auto samples = static_cast<std::size_t>(cfg.get_int("flow.samples", 141));
    std::vector<double> t(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        t[k] = t_max * static_cast<double>(k) / static_cast<double>(samples - 1);
    }
    return t;
}

OutputBundle run_evolve(const RunConfig& cfg, const ProblemSetup& s, std::ostream& out) {
    const auto op = assemble_generator(s.spec, s.grid);
    const auto eigen = solve_eigen(op);
    const GridMeasure mu = make_initial(cfg, s, &op, &eigen);
    const GridMeasure alpha = alpha_measure(op, eigen);
    const double dt = cfg.get_double("flow.dt", default_time_step(s.grid, eigen.lambda0));
    const auto times = sample_times(cfg, *eigen.lambda1 - eigen.lambda0);
    const auto states = flow_series(op, mu, times, dt, {}, &eigen);
    std::vector<CurveRow> rows;
    for (const auto& st : states) {
        rows.push_back({st.t, tv_distance(st.mu_t, alpha), w1_distance(st.mu_t, alpha),
                        *st.chi2_to_beta, st.survival_weight, st.log_survival});
    }
    std::ostringstream csv;
    write_curves_csv(csv, rows);
    OutputBundle b;
    b.add("curves.csv", csv.str());
    out << "samples " << rows.size() << "\n";
    return b;
}

OutputBundle run_simulate(const RunConfig& cfg, const ProblemSetup& s, std::ostream& out) {
    const auto d = static_cast<std::size_t>(cfg.get_int("example.d", 1));
    SimConfig sim;
    const bool half_line = s.spec.domain_max() == std::numeric_limits<double>::infinity() &&
                           s.spec.family() != PotentialFamily::zero;
    const Interval iv{s.grid.x_min(), half_line ? std::numeric_limits<double>::infinity()
                                                : s.grid.x_max()};
    sim.potentials.assign(d, s.spec);
    sim.domain.assign(d, iv);
    sim.dt = cfg.get_double("mc.dt", 1e-3);
    sim.horizon = cfg.get_double("mc.horizon", 1.0);
    sim.n_particles = static_cast<std::size_t>(cfg.get_int("mc.particles", 100000));
    sim.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    sim.resample = cfg.get_bool("mc.resample", false);
    sim.bridge_correction = cfg.get_bool("mc.bridge_correction", true);
    sim.threads = static_cast<unsigned>(cfg.get_int("mc.threads", 0));

    std::optional<TridiagonalOperator> op;
    std::optional<EigenPair> eigen;
    if (cfg.get_string("initial.family", "uniform") == "qsd") {
        op = assemble_generator(s.spec, s.grid);
        eigen = principal_eigenpair(*op);
    }
    const GridMeasure mu = make_initial(cfg, s, op ? &*op : nullptr, eigen ? &*eigen : nullptr);
    const std::vector<GridMeasure> initial(d, mu);
    const ParticleEnsemble ens = simulate(sim, initial);
    if (ens.all_absorbed) {
        throw NumericalError("all particles were absorbed before the horizon");
    }

    ordered_json j;
    j["particles"] = ens.initial_count;
    j["alive"] = ens.alive_count;
    j["t"] = ens.t;
    j["log_survival"] = ens.log_survival_estimate;
    j["resample"] = sim.resample;
    j["bridge_correction"] = sim.bridge_correction;
    try {
        j["lambda0_estimate"] = estimate_lambda0(ens.survival);
    } catch (const ValidationError&) {
        j["lambda0_estimate"] = nullptr;
    }
    const auto bins = static_cast<std::size_t>(cfg.get_int("mc.bins", 5));
    const Grid1D coarse = build_grid(s.grid.x_min(), s.grid.x_max(), bins);
    const GridMeasure emp = conditioned_empirical(ens, coarse, 0);
    j["empirical_density"] = std::vector<double>(emp.density().begin(), emp.density().end());

    std::ostringstream surv, pos;
    write_survival_csv(surv, ens.survival);
    write_positions_csv(pos, ens);
    OutputBundle b;
    b.add("survival.csv", surv.str());
    b.add("positions.csv", pos.str());
    b.add("simulate.json", j.dump(2) + "\n");
    out << "alive " << ens.alive_count << " of " << ens.initial_count << "\n";
    return b;
}

OutputBundle run_rates(const RunConfig& cfg, const ProblemSetup& s, std::ostream& out) {
    const auto op = assemble_generator(s.spec, s.grid);
    const auto eigen = solve_eigen(op);
    std::ostringstream csv;
    csv << "quantity,value,x\n";
    auto row = [&](const std::string& q, double v, std::optional<double> x = std::nullopt) {
        csv << q << "," << fmt17(v) << "," << (x ? fmt17(*x) : "") << "\n";
    };
    row("lambda0", eigen.lambda0);
    row("lambda1", *eigen.lambda1);
    row("gap", *eigen.lambda1 - eigen.lambda0);

    std::vector<double> v2(s.grid.size());
    for (std::size_t i = 0; i < v2.size(); ++i) v2[i] = s.spec.evaluate(s.grid.node(i)).d2v;
    const Infimum bv = be_constant(v2);
    row("v_second_infimum", bv.value, s.grid.node(bv.index));
    const Infimum bw = be_constant(effective_second_derivative(s.spec, eigen, s.grid));
    row("w_second_infimum", bw.value, s.grid.node(bw.index));
    row("kappa", 0.5 * bw.value, s.grid.node(bw.index));

    if (s.spec.cdfi()) {
        const double l0 = cfg.get_double("rates.lambda0_lower", eigen.lambda0);
        const auto lo = cfg.get_optional_double("rates.probe_min");
        const auto hi = cfg.get_optional_double("rates.probe_max");
        row("kappa_tilde_lambda0", l0);
        const CdfiRate basic = cdfi_rate(s.spec, l0, s.grid, CdfiForm::basic, lo, hi);
        row("kappa_tilde_basic", basic.value, basic.x);
        try {
            const CdfiRate refined = cdfi_rate(s.spec, l0, s.grid, CdfiForm::refined, lo, hi);
            row("kappa_tilde_refined", refined.value, refined.x);
        } catch (const ValidationError& e) {
            out << "refined kappa_tilde skipped: " << e.what() << "\n";
        }
        if (s.grid.x_min() == 0.0) {
            const auto r = integral_identity_residual(eigen, s.spec, s.grid,
                                                      cfg.get_optional_double("identity.probe_max"));
            row("identity_kernel_residual", r.kernel, r.probe_max);
            row("identity_scale_kernel_residual", r.scale_kernel, r.probe_max);
            row("identity_first_residual", r.first, r.probe_max);
            row("identity_second_residual", r.second, r.probe_max);
        }
    }
    OutputBundle b;
    b.add("rates.csv", csv.str());
    out << "gap " << fmt17(*eigen.lambda1 - eigen.lambda0) << "\n";
    return b;
}

OutputBundle run_report(const RunConfig& cfg, const ProblemSetup& s, std::ostream& out) {
    const auto op = assemble_generator(s.spec, s.grid);
    const auto eigen = principal_eigenpair(op);
    DecayConfig dc;
    dc.id = s.example.empty() ? s.spec.name() : s.example;
    dc.spec = s.spec;
    dc.grid = s.grid;
    dc.initial = make_initial(cfg, s, &op, &eigen);
    dc.t_max = cfg.get_double("flow.t_max", 0.0);
    dc.samples = static_cast<std::size_t>(cfg.get_int("flow.samples", 141));
    dc.dt = cfg.get_double("flow.dt", 0.0);
    dc.window_from = cfg.get_optional_double("report.window_from");
    dc.window_to = cfg.get_optional_double("report.window_to");
    dc.x0 = cfg.get_optional_double("report.x0");
    dc.lambda0_lower = cfg.get_optional_double("rates.lambda0_lower");
    dc.cdfi_probe_min = cfg.get_optional_double("rates.probe_min");
    dc.cdfi_probe_max = cfg.get_optional_double("rates.probe_max");
    const int d = static_cast<int>(cfg.get_int("example.d", 1));
    if (!s.example.empty()) {
        ClosedFormParams p;
        p.N = cfg.get_double("example.N", 1.0);
        p.lambda = cfg.get_double("potential.lambda", 1.0);
        p.d = d;
        const auto cf = closed_form(s.example == "ou" ? ExampleId::ornstein_uhlenbeck
                                                      : ExampleId::brownian_hypercube,
                                    p, s.grid);
        dc.kappa_closed_form = cf.constants.kappa;
        dc.prefactor_cd = cf.constants.prefactor_cd;
    }

    OutputBundle b;
    std::ostringstream json, csv;
    if (d >= 2) {
        const std::vector<DecayConfig> factors(static_cast<std::size_t>(d), dc);
        const ProductReport pr = product_report(factors);
        write_product_report_json(json, pr);
        write_report_curves_csv(csv, pr.factors.front());
        out << "additive bound " << (pr.additive_bound_holds ? "holds" : "fails") << "\n";
    } else {
        const DecayReport r = decay_report(dc);
        write_report_json(json, r);
        write_report_curves_csv(csv, r);
        out << "fitted tv rate " << fmt17(r.fit_tv.rate) << ", gap " << fmt17(r.gap) << "\n";
    }
    b.add("report.json", json.str());
    b.add("curves.csv", csv.str());
    return b;
}

}  // namespace

double default_truncation(const PotentialSpec& spec, double x_min) {
    const double step = 0.05;
    double vmin = spec.evaluate(x_min).v;
    for (int k = 1; k <= 20000; ++k) {
        const double x = x_min + step * k;
        const double v = spec.evaluate(x).v;
        vmin = std::min(vmin, v);
        if (std::exp(-(v - vmin)) * (1.0 + std::abs(x)) * (1.0 + std::abs(x)) < 1e-12) return x;
    }
    throw ValidationError("cannot find a truncation point; set grid.x_max explicitly");
}

ProblemSetup make_setup(const RunConfig& cfg) {
    const std::string example = cfg.get_string("example", "");
    std::string family = cfg.get_string("potential.family", example == "ou" ? "quadratic" : "zero");
    PotentialSpec spec = PotentialSpec::zero();
    if (family == "quadratic") {
        spec = PotentialSpec::quadratic(cfg.get_double("potential.lambda", 1.0));
    } else if (family == "shifted-power") {
        spec = PotentialSpec::shifted_power(cfg.get_double("potential.delta", 3.0));
    } else if (family == "tabulated") {
        const std::string path = cfg.get_string("potential.table_path", "");
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot read potential.table_path " + path);
        spec = PotentialSpec::read_table_csv(in);
    }
    if (cfg.has("potential.cdfi")) spec = spec.with_cdfi(cfg.get_bool("potential.cdfi", false));

    double lo = 0.0;
    double hi = 1.0;
    if (example == "brownian") {
        const double N = cfg.get_double("example.N", 1.0);
        lo = -N;
        hi = N;
    } else if (family == "zero") {
        lo = -1.0;
    } else if (family == "tabulated") {
        lo = spec.domain_min();
        hi = spec.domain_max();
    }
    lo = cfg.get_double("grid.x_min", lo);
    if (!cfg.has("grid.x_max") && (family == "quadratic" || family == "shifted-power") &&
        example != "brownian") {
        hi = default_truncation(spec, lo);
    }
    hi = cfg.get_double("grid.x_max", hi);
    const long long n = cfg.get_int("grid.n", 1999);
    if (n < 3) throw ValidationError("grid.n must be >= 3");
    return ProblemSetup{spec, build_grid(lo, hi, static_cast<std::size_t>(n)), example};
}

OutputBundle execute(const RunConfig& config, std::ostream& out) {
    const ProblemSetup setup = make_setup(config);
    if (config.command == "eigen") return run_eigen(config, setup, out);
    if (config.command == "evolve") return run_evolve(config, setup, out);
    if (config.command == "simulate") return run_simulate(config, setup, out);
    if (config.command == "rates") return run_rates(config, setup, out);
    if (config.command == "report") return run_report(config, setup, out);
    throw ValidationError("unknown command `" + config.command + "`");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quasi-stationary distribution laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "flat key = value configuration file");
    std::vector<std::string> values(std::size(kValueFlags));
    std::vector<CLI::Option*> options;
    for (std::size_t k = 0; k < std::size(kValueFlags); ++k) {
        options.push_back(app.add_option(kValueFlags[k].flag, values[k], kValueFlags[k].help));
    }
    bool resample = false;
    bool no_bridge = false;
    bool cdfi = false;
    auto* resample_opt = app.add_flag("--resample", resample, "Fleming-Viot resampling");
    auto* bridge_opt = app.add_flag("--no-bridge", no_bridge, "absorb only at step boundaries");
    auto* cdfi_opt = app.add_flag("--cdfi", cdfi, "assert the process comes down from infinity");
    const std::pair<const char*, const char*> commands[] = {
        {"eigen", "principal eigenpair, lambda1 and the QSD"},
        {"evolve", "conditioned flow distances to the QSD"},
        {"simulate", "Monte Carlo particle system"},
        {"rates", "kappa, kappa_tilde and gap table"},
        {"report", "decay report with fitted and certified rates"},
    };
    for (const auto& [name, about] : commands) app.add_subcommand(name, about);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        cfg.command = app.get_subcommands().front()->get_name();
        for (std::size_t k = 0; k < options.size(); ++k) {
            if (options[k]->count() > 0) cfg.set(kValueFlags[k].key, values[k]);
        }
        if (resample_opt->count() > 0) cfg.set("mc.resample", "true");
        if (bridge_opt->count() > 0) cfg.set("mc.bridge_correction", "false");
        if (cdfi_opt->count() > 0) cfg.set("potential.cdfi", "true");

        const auto diagnostics = validate(cfg);
        if (!diagnostics.empty()) {
            for (const auto& d : diagnostics) err << "error: " << d << "\n";
            return kExitValidation;
        }
        const OutputBundle bundle = execute(cfg, out);
        bundle.commit(cfg.get_string("output.dir", "out"));
        return kExitOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("qsdlab");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace qsd
