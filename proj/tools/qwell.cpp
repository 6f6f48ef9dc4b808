#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qwell/config.hpp"

namespace {

using namespace qwell;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct ManifestArgs {
    std::string config_path;
    std::string scenario;
    std::string out;
    std::vector<std::string> checks;
    double horizon_override = 0.0;
    double dt_override = 0.0;
};

void add_manifest_options(CLI::App* cmd, ManifestArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    cmd->add_option("--scenario", args.scenario, "preset name: fig1, fig2, stall");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--check", args.checks, "checks to run: decrease, convergence, oracle");
    cmd->add_option("--T", args.horizon_override, "override horizon");
    cmd->add_option("--dt", args.dt_override, "override time step");
}

RunManifest build_manifest(const ManifestArgs& args) {
    RunManifest manifest;
    if (!args.config_path.empty()) {
        manifest = parse_config(slurp(args.config_path));
        manifest.config_path = args.config_path;
    } else if (!args.scenario.empty()) {
        manifest.config = scenario_preset(args.scenario);
    } else {
        throw config_error("either --config or --scenario is required");
    }
    if (!args.out.empty()) manifest.out_dir = args.out;
    if (!args.checks.empty()) manifest.checks = args.checks;
    for (const std::string& c : manifest.checks) {
        if (c != "decrease" && c != "convergence" && c != "oracle") {
            throw config_error("unknown check '" + c + "'");
        }
    }
    if (args.horizon_override > 0.0) manifest.config.horizon = args.horizon_override;
    if (args.dt_override > 0.0) manifest.config.dt = args.dt_override;
    return manifest;
}

int report_status(const CheckReport& report) {
    std::cout << format_report(report) << "\n";
    return report.pass ? int(ExitCode::ok) : int(ExitCode::check_failure);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lyapunov feedback stabilization of a particle in a 1D box"};
    app.require_subcommand(1);

    ManifestArgs sim_args;
    CLI::App* simulate = app.add_subcommand("simulate", "closed-loop run with artifacts");
    add_manifest_options(simulate, sim_args);

    CLI::App* verify = app.add_subcommand("verify", "independent verification checks");
    verify->require_subcommand(1);
    int spectrum_truncation = 200;
    CLI::App* v_spectrum = verify->add_subcommand("spectrum", "perturbation-theory suite");
    v_spectrum->add_option("--M", spectrum_truncation, "truncation (>= 200)");
    ManifestArgs dec_args;
    CLI::App* v_decrease = verify->add_subcommand("decrease", "Lyapunov decrease-rate identity");
    add_manifest_options(v_decrease, dec_args);
    ManifestArgs ora_args;
    int grid_points = 1024;
    CLI::App* v_oracle = verify->add_subcommand("oracle", "finite-difference cross-validation");
    add_manifest_options(v_oracle, ora_args);
    v_oracle->add_option("--n", grid_points, "interior grid points");

    CLI::App* gap = app.add_subcommand("gap-check", "frequency-gap non-degeneracy report");
    int gap_cutoff = 3, gap_k2max = 10, gap_modes = 20;
    double gap_sigma = 0.0;
    gap->add_option("--n", gap_cutoff, "cutoff N");
    gap->add_option("--sigma", gap_sigma, "field strength");
    gap->add_option("--k2max", gap_k2max, "largest second index");
    gap->add_option("--M", gap_modes, "truncation");

    CLI::App* sweep = app.add_subcommand("sweep", "run several manifests concurrently");
    std::vector<std::string> sweep_configs;
    sweep->add_option("configs", sweep_configs, "config files")->required();

    CLI::App* prepump = app.add_subcommand("prepump", "resonant drive toward the ground state");
    double pp_target = 0.99, pp_sigma = 0.0, pp_amplitude = 1.0, pp_dt = 1e-3;
    int pp_modes = 20;
    std::string pp_initial = "2:1:0";
    prepump->add_option("--target", pp_target, "ground-state overlap to reach");
    prepump->add_option("--sigma", pp_sigma, "field strength of the reference basis");
    prepump->add_option("--amplitude", pp_amplitude, "drive amplitude");
    prepump->add_option("--dt", pp_dt, "time step");
    prepump->add_option("--M", pp_modes, "truncation");
    prepump->add_option("--initial", pp_initial, "semicolon list k:re:im");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : int(qwell::ExitCode::config_failure);
    }

    try {
        if (simulate->parsed()) {
            RunManifest manifest = build_manifest(sim_args);
            if (manifest.out_dir.empty()) manifest.out_dir = "runs/out";
            return run(manifest);
        }
        if (v_spectrum->parsed()) {
            return report_status(check_perturbation_suite(spectrum_truncation));
        }
        if (v_decrease->parsed()) {
            if (dec_args.scenario.empty() && dec_args.config_path.empty()) {
                dec_args.scenario = "fig1";
            }
            RunManifest manifest = build_manifest(dec_args);
            manifest.config.record_every = 1;
            // The finite-difference comparison is second order in dt; the
            // scenario step sizes are too coarse for the 1e-3 budget.
            if (dec_args.dt_override == 0.0) {
                manifest.config.dt = std::min(manifest.config.dt, 1e-4);
            }
            if (dec_args.horizon_override == 0.0) {
                manifest.config.horizon =
                    std::min(manifest.config.horizon, 2.0 * std::numbers::pi);
            }
            TimeSeries ts = simulate_closed_loop(manifest.config);
            return report_status(check_decrease_rate(ts, manifest.config.feedback.sigma_mode));
        }
        if (v_oracle->parsed()) {
            if (ora_args.scenario.empty() && ora_args.config_path.empty()) {
                ora_args.scenario = "fig1";
            }
            RunManifest manifest = build_manifest(ora_args);
            if (ora_args.horizon_override <= 0.0) manifest.config.horizon = 1.0;
            manifest.config.store_control = true;
            TimeSeries ts = simulate_closed_loop(manifest.config);
            return report_status(cross_validate(manifest.config, ts.control, grid_points));
        }
        if (gap->parsed()) {
            FreeBasis basis = build_free_basis(gap_modes);
            GapReport report = frequency_gap_check(basis, gap_sigma, gap_cutoff, gap_k2max);
            std::printf("sigma=%g N=%d k2max=%d delta=%.17g pair_a=(%d,%d) pair_b=(%d,%d)\n",
                        report.sigma, report.cutoff, report.k2max, report.delta,
                        report.pair_a[0], report.pair_a[1], report.pair_b[0],
                        report.pair_b[1]);
            for (const auto& c : report.collisions) {
                std::printf("collision: (%d,%d) vs (%d,%d)\n", c[0], c[1], c[2], c[3]);
            }
            return report.degenerate ? int(ExitCode::check_failure) : int(ExitCode::ok);
        }
        if (sweep->parsed()) {
            std::vector<RunManifest> manifests;
            for (size_t i = 0; i < sweep_configs.size(); ++i) {
                RunManifest m = parse_config(slurp(sweep_configs[i]));
                m.config_path = sweep_configs[i];
                if (m.out_dir.empty()) m.out_dir = "runs/sweep" + std::to_string(i);
                manifests.push_back(std::move(m));
            }
            std::vector<std::future<int>> results;
            for (const RunManifest& m : manifests) {
                results.push_back(std::async(std::launch::async, [&m] { return run(m); }));
            }
            int worst = 0;
            for (size_t i = 0; i < results.size(); ++i) {
                int status = results[i].get();
                std::printf("%s: %s\n", sweep_configs[i].c_str(),
                            status == 0 ? "pass" : "FAIL");
                worst = std::max(worst, status);
            }
            return worst;
        }
        if (prepump->parsed()) {
            RunManifest dummy = parse_config("T=1\ninitial=" + pp_initial + "\nM=" +
                                            std::to_string(pp_modes) + "\nsigma=" +
                                            std::to_string(pp_sigma));
            FreeBasis basis = build_free_basis(pp_modes);
            SigmaEigenSystem sys = diagonalize_sigma(basis, pp_sigma);
            CVec c = CVec::Zero(pp_modes);
            for (const InitialMode& m : dummy.config.initial) c[m.mode - 1] += m.amplitude;
            WaveFunction psi = make_state(sys.vectors * c);
            PrepumpResult result =
                resonance_prepump(psi, sys, pp_target, pp_amplitude, pp_dt);
            CVec final_coords = result.state.sigma_coords(sys);
            std::printf("elapsed=%.17g steps=%zu overlap=%.17g\n", result.elapsed,
                        result.control.size(), std::abs(final_coords[0]));
            return int(ExitCode::ok);
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return int(ExitCode::config_failure);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return int(ExitCode::config_failure);
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return int(ExitCode::numeric_failure);
    }
    return int(ExitCode::config_failure);
}
