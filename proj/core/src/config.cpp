#include "qwell/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace qwell {

namespace {

constexpr double kPi = std::numbers::pi;
// gamma used when deriving theory_safe theta caps from a config file.
constexpr double kDefaultGamma = 0.70710678118654752;

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& value, const std::string& key, int line) {
    try {
        size_t pos = 0;
        double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return d;
    } catch (const std::exception&) {
        throw config_error("expected a number for '" + key + "', got '" + value + "'", line);
    }
}

int parse_int(const std::string& value, const std::string& key, int line) {
    try {
        size_t pos = 0;
        int i = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return i;
    } catch (const std::exception&) {
        throw config_error("expected an integer for '" + key + "', got '" + value + "'", line);
    }
}

std::vector<InitialMode> parse_initial(const std::string& value, int line) {
    std::vector<InitialMode> modes;
    std::istringstream items(value);
    std::string item;
    while (std::getline(items, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        std::istringstream fields(item);
        std::string k, re, im;
        if (!std::getline(fields, k, ':') || !std::getline(fields, re, ':') ||
            !std::getline(fields, im, ':')) {
            throw config_error("initial entry '" + item + "' is not k:re:im", line);
        }
        InitialMode m;
        m.mode = parse_int(trim(k), "initial", line);
        m.amplitude = Complex(parse_double(trim(re), "initial", line),
                              parse_double(trim(im), "initial", line));
        modes.push_back(m);
    }
    if (modes.empty()) throw config_error("initial list is empty", line);
    return modes;
}

std::string fmt(double v) {
    if (v == 0.0) return "0";  // collapse negative zero
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void apply_theory_safe_caps(SimulationConfig& config) {
    FreeBasis basis = build_free_basis(config.truncation);
    CalibratedConstants cal =
        calibrate_cstar(basis, {0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0}, 10);
    config.feedback.theta =
        make_theory_safe_theta(config.feedback.theta.eta, config.feedback.cutoff, cal,
                               config.feedback.epsilon, kDefaultGamma);
}

}  // namespace

SimulationConfig scenario_preset(const std::string& name) {
    SimulationConfig config;
    config.truncation = 20;
    config.dt = 1e-3;
    config.feedback.cutoff = 3;
    config.feedback.epsilon = 0.05;
    config.feedback.gain = 1e3;
    config.initial = {{1, {kDefaultGamma, 0.0}}, {3, {kDefaultGamma, 0.0}}};
    config.record_every = 100;

    if (name == "fig1") {
        config.horizon = 150.0 * kPi;
        config.feedback.sigma_mode = SigmaMode::fixed_field;
        config.feedback.sigma = 20.0;
        config.initial_basis = InitialBasis::sigma_modes;
    } else if (name == "fig2") {
        config.horizon = 1000.0 * kPi;
        config.feedback.sigma_mode = SigmaMode::implicit_lyapunov;
        config.feedback.theta.eta = 700.0;
        config.feedback.theta.mode = ThetaMode::paper_sim;
        config.initial_basis = InitialBasis::free_modes;
    } else if (name == "stall") {
        config.horizon = 10.0 * kPi;
        config.feedback.sigma_mode = SigmaMode::fixed_field;
        config.feedback.sigma = 0.0;
        config.initial_basis = InitialBasis::free_modes;
        config.record_every = 10;
    } else {
        throw config_error("unknown scenario '" + name + "'");
    }
    return config;
}

RunManifest parse_config(const std::string& text) {
    std::vector<std::pair<int, std::string>> lines;
    {
        std::istringstream in(text);
        std::string raw;
        int number = 0;
        while (std::getline(in, raw)) {
            ++number;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            lines.emplace_back(number, line);
        }
    }

    RunManifest manifest;
    bool theory_safe_requested = false;

    // The scenario key seeds the preset; every other key overrides it.
    for (const auto& [number, line] : lines) {
        size_t eq = line.find('=');
        if (eq != std::string::npos && trim(line.substr(0, eq)) == "scenario") {
            manifest.config = scenario_preset(trim(line.substr(eq + 1)));
        }
    }

    for (const auto& [number, line] : lines) {
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("expected key=value, got '" + line + "'", number);
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        SimulationConfig& config = manifest.config;

        if (key == "scenario") {
            continue;  // already applied
        } else if (key == "M") {
            config.truncation = parse_int(value, key, number);
            if (config.truncation < 2) throw config_error("M must be >= 2", number);
        } else if (key == "dt") {
            config.dt = parse_double(value, key, number);
            if (!(config.dt > 0.0)) throw config_error("dt must be positive", number);
        } else if (key == "T") {
            config.horizon = parse_double(value, key, number);
            if (!(config.horizon > 0.0)) throw config_error("T must be positive", number);
        } else if (key == "N") {
            config.feedback.cutoff = parse_int(value, key, number);
            if (config.feedback.cutoff < 1) throw config_error("N must be >= 1", number);
        } else if (key == "epsilon") {
            double e = parse_double(value, key, number);
            if (!(e > 0.0 && e < 1.0)) {
                throw config_error("epsilon must lie in the open interval (0,1)", number);
            }
            config.feedback.epsilon = e;
        } else if (key == "gain") {
            config.feedback.gain = parse_double(value, key, number);
            if (!(config.feedback.gain > 0.0)) throw config_error("gain must be positive", number);
        } else if (key == "sigma") {
            config.feedback.sigma_mode = SigmaMode::fixed_field;
            config.feedback.sigma = parse_double(value, key, number);
        } else if (key == "theta_eta") {
            config.feedback.sigma_mode = SigmaMode::implicit_lyapunov;
            config.feedback.theta.eta = parse_double(value, key, number);
            if (config.feedback.theta.eta < 0.0) {
                throw config_error("theta_eta must be nonnegative", number);
            }
        } else if (key == "theta_max") {
            config.feedback.theta.theta_max = parse_double(value, key, number);
        } else if (key == "theta_mode") {
            if (value == "theory_safe") {
                theory_safe_requested = true;
            } else if (value == "paper_sim") {
                config.feedback.theta.mode = ThetaMode::paper_sim;
            } else {
                throw config_error("theta_mode must be theory_safe or paper_sim", number);
            }
        } else if (key == "initial") {
            config.initial = parse_initial(value, number);
        } else if (key == "record_every") {
            config.record_every = parse_int(value, key, number);
            if (config.record_every < 1) throw config_error("record_every must be >= 1", number);
        } else if (key == "checks") {
            manifest.checks.clear();
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                if (item != "decrease" && item != "convergence" && item != "oracle") {
                    throw config_error("unknown check '" + item + "'", number);
                }
                manifest.checks.push_back(item);
            }
        } else if (key == "out") {
            manifest.out_dir = value;
        } else {
            throw config_error("unknown key '" + key + "'", number);
        }
    }

    SimulationConfig& config = manifest.config;
    if (config.horizon <= 0.0) throw config_error("T (or a scenario preset) is required");
    if (config.feedback.cutoff > config.truncation) {
        throw config_error("N must not exceed M");
    }
    // Initial basis follows the law: sigma-eigenmodes for the fixed field,
    // free modes for the implicit design whose target field is zero.
    config.initial_basis = config.feedback.sigma_mode == SigmaMode::fixed_field
                               ? InitialBasis::sigma_modes
                               : InitialBasis::free_modes;
    if (theory_safe_requested) apply_theory_safe_caps(config);
    return manifest;
}

std::string emit_config(const RunManifest& manifest) {
    const SimulationConfig& config = manifest.config;
    const FeedbackConfig& fb = config.feedback;
    std::ostringstream os;
    os << "M=" << config.truncation << "\n";
    os << "dt=" << fmt(config.dt) << "\n";
    os << "T=" << fmt(config.horizon) << "\n";
    os << "N=" << fb.cutoff << "\n";
    os << "epsilon=" << fmt(fb.epsilon) << "\n";
    os << "gain=" << fmt(fb.gain) << "\n";
    if (fb.sigma_mode == SigmaMode::fixed_field) {
        os << "sigma=" << fmt(fb.sigma) << "\n";
    } else {
        os << "theta_eta=" << fmt(fb.theta.eta) << "\n";
        if (std::isfinite(fb.theta.theta_max)) {
            os << "theta_max=" << fmt(fb.theta.theta_max) << "\n";
        }
        os << "theta_mode=paper_sim\n";  // caps already resolved into the spec
    }
    os << "initial=";
    for (size_t i = 0; i < config.initial.size(); ++i) {
        const InitialMode& m = config.initial[i];
        if (i) os << ";";
        os << m.mode << ":" << fmt(m.amplitude.real()) << ":" << fmt(m.amplitude.imag());
    }
    os << "\n";
    os << "record_every=" << config.record_every << "\n";
    if (!manifest.checks.empty()) {
        os << "checks=";
        for (size_t i = 0; i < manifest.checks.size(); ++i) {
            if (i) os << ",";
            os << manifest.checks[i];
        }
        os << "\n";
    }
    if (!manifest.out_dir.empty()) os << "out=" << manifest.out_dir << "\n";
    return os.str();
}

void emit_timeseries(const TimeSeries& ts, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const int cutoff = ts.config.feedback.cutoff;
    out << "t,sigma,v,u,lyapunov";
    for (int k = 1; k <= cutoff; ++k) out << ",pop" << k;
    out << ",norm,dist_c1\n";
    for (const Record& rec : ts.records) {
        out << fmt(rec.t) << "," << fmt(rec.sigma) << "," << fmt(rec.v) << ","
            << fmt(rec.u) << "," << fmt(rec.lyapunov);
        for (int k = 0; k < cutoff; ++k) out << "," << fmt(rec.populations[k]);
        out << "," << fmt(rec.norm) << "," << fmt(rec.dist_c1) << "\n";
    }
    if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

int run(const RunManifest& manifest) {
    RunManifest resolved = manifest;
    bool want_oracle =
        std::find(resolved.checks.begin(), resolved.checks.end(), "oracle") !=
        resolved.checks.end();
    if (want_oracle) resolved.config.store_control = true;

    TimeSeries ts = simulate_closed_loop(resolved.config);

    std::filesystem::path out_dir = resolved.out_dir.empty() ? "." : resolved.out_dir;
    std::filesystem::create_directories(out_dir);
    emit_timeseries(ts, (out_dir / "timeseries.csv").string());
    {
        std::ofstream mf(out_dir / "manifest.txt", std::ios::binary);
        mf << "# " << resolved.scheme << "\n" << emit_config(resolved);
    }

    bool all_pass = true;
    std::ostringstream reports;
    for (const std::string& check : resolved.checks) {
        CheckReport report;
        if (check == "decrease") {
            report = check_decrease_rate(ts, resolved.config.feedback.sigma_mode);
        } else if (check == "convergence") {
            report = convergence_report(ts, resolved.config.feedback.epsilon);
        } else {
            report = cross_validate(resolved.config, ts.control, 512);
        }
        all_pass = all_pass && report.pass;
        reports << format_report(report) << "\n";
    }
    {
        std::ofstream rf(out_dir / "report.txt", std::ios::binary);
        rf << "norm_drift_max=" << fmt(ts.max_norm_drift) << "\n";
        rf << "lyapunov_decrease_excess_max=" << fmt(ts.max_decrease_excess) << "\n";
        if (ts.first_passage_time >= 0.0) {
            rf << "first_passage_time=" << fmt(ts.first_passage_time) << "\n";
        }
        rf << "\n" << reports.str();
    }
    return all_pass ? int(ExitCode::ok) : int(ExitCode::check_failure);
}

}  // namespace qwell
