#pragma once

#include <string>
#include <vector>

#include "qwell/verify.hpp"

namespace qwell {

// Everything needed to reproduce a run bit-identically.
struct RunManifest {
    std::string config_path;   // empty when built in memory
    SimulationConfig config;
    std::vector<std::string> checks;  // subset of {decrease, convergence, oracle}
    std::string out_dir;
    std::string scheme = "strang-split/galerkin";
};

// Scenario presets: "fig1" (explicit law, sigma=20), "fig2" (implicit law,
// theta(r)=700 r), "stall" (sigma=0 with the explicit law).
SimulationConfig scenario_preset(const std::string& name);

// Line-based key=value document; '#' comments; unknown keys rejected.
// Keys: scenario, M, dt, T, N, epsilon, gain, sigma, theta_eta, theta_max,
// theta_mode, initial, record_every, checks, out.
RunManifest parse_config(const std::string& text);

// Resolved config as a reparsable key=value document.
std::string emit_config(const RunManifest& manifest);

// Delimited text, header `t,sigma,v,u,lyapunov,pop1,...,popN,norm,dist_c1`,
// 17 significant digits, one row per retained record.
void emit_timeseries(const TimeSeries& ts, const std::string& path);

// Executes the run plus requested checks, writes artifacts under out_dir.
// Returns an ExitCode-compatible status (nonzero iff a requested check fails).
int run(const RunManifest& manifest);

}  // namespace qwell
