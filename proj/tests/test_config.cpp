#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qwell/config.hpp"

using namespace qwell;

namespace {

constexpr double kPi = std::numbers::pi;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("scenario presets carry the published parameters") {
    SimulationConfig fig1 = scenario_preset("fig1");
    CHECK(fig1.truncation == 20);
    CHECK(fig1.dt == 1e-3);
    CHECK(fig1.horizon == doctest::Approx(150.0 * kPi).epsilon(1e-15));
    CHECK(fig1.feedback.cutoff == 3);
    CHECK(fig1.feedback.epsilon == 0.05);
    CHECK(fig1.feedback.gain == 1e3);
    CHECK(fig1.feedback.sigma_mode == SigmaMode::fixed_field);
    CHECK(fig1.feedback.sigma == 20.0);
    CHECK(fig1.initial_basis == InitialBasis::sigma_modes);
    REQUIRE(fig1.initial.size() == 2);
    CHECK(fig1.initial[0].mode == 1);
    CHECK(fig1.initial[1].mode == 3);

    SimulationConfig fig2 = scenario_preset("fig2");
    CHECK(fig2.feedback.sigma_mode == SigmaMode::implicit_lyapunov);
    CHECK(fig2.feedback.theta.eta == 700.0);
    CHECK(fig2.feedback.theta.mode == ThetaMode::paper_sim);
    CHECK(fig2.horizon == doctest::Approx(1000.0 * kPi).epsilon(1e-15));
    CHECK(fig2.initial_basis == InitialBasis::free_modes);

    SimulationConfig stall = scenario_preset("stall");
    CHECK(stall.feedback.sigma == 0.0);
    CHECK(stall.horizon == doctest::Approx(10.0 * kPi).epsilon(1e-15));

    CHECK_THROWS_AS(scenario_preset("fig3"), config_error);
}

TEST_CASE("minimal scenario line resolves the full preset") {
    RunManifest m = parse_config("scenario=fig1\n");
    CHECK(m.config.feedback.sigma == 20.0);
    CHECK(m.config.feedback.gain == 1e3);
    CHECK(m.config.horizon == doctest::Approx(150.0 * kPi).epsilon(1e-15));
    // Scenario applies even when other keys precede it.
    RunManifest n = parse_config("gain=5\nscenario=fig1\n");
    CHECK(n.config.feedback.gain == 5.0);
    CHECK(n.config.feedback.sigma == 20.0);
}

TEST_CASE("parse errors carry line numbers and constraints") {
    try {
        parse_config("scenario=fig1\nepsilon=1.5\n");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
    }
    try {
        parse_config("scenario=fig1\nfrobnicate=1\n");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("scenario=fig1\ndt=fast\n"), config_error);
    CHECK_THROWS_AS(parse_config("scenario=fig1\ninitial=1:0.5\n"), config_error);
    CHECK_THROWS_AS(parse_config("M=20\ninitial=1:1:0\n"), config_error);  // missing T
    CHECK_THROWS_AS(parse_config("scenario=fig1\nN=25\n"), config_error);  // N > M
    CHECK_THROWS_AS(parse_config("scenario=fig1\njust a line\n"), config_error);
}

TEST_CASE("comments, blanks and overrides") {
    RunManifest m = parse_config(
        "# a comment\n"
        "\n"
        "scenario=fig1\n"
        "T=3.14\n"
        "initial=1:0.6:0;2:0:0.8\n"
        "checks=decrease,convergence\n"
        "out=somewhere\n");
    CHECK(m.config.horizon == 3.14);
    REQUIRE(m.config.initial.size() == 2);
    CHECK(m.config.initial[1].amplitude == Complex(0.0, 0.8));
    CHECK(m.checks == std::vector<std::string>{"decrease", "convergence"});
    CHECK(m.out_dir == "somewhere");
    CHECK_THROWS_AS(parse_config("scenario=fig1\nchecks=quantum\n"), config_error);
}

TEST_CASE("sigma and theta_eta select the law variant") {
    RunManifest fixed = parse_config("T=1\nsigma=12\ninitial=1:1:0\n");
    CHECK(fixed.config.feedback.sigma_mode == SigmaMode::fixed_field);
    CHECK(fixed.config.feedback.sigma == 12.0);
    CHECK(fixed.config.initial_basis == InitialBasis::sigma_modes);

    RunManifest implicit = parse_config("T=1\ntheta_eta=700\ntheta_max=9\ninitial=1:1:0\n");
    CHECK(implicit.config.feedback.sigma_mode == SigmaMode::implicit_lyapunov);
    CHECK(implicit.config.feedback.theta.eta == 700.0);
    CHECK(implicit.config.feedback.theta.theta_max == 9.0);
    CHECK(implicit.config.initial_basis == InitialBasis::free_modes);

    RunManifest safe = parse_config("T=1\ntheta_eta=700\ntheta_mode=theory_safe\ninitial=1:1:0\n");
    CHECK(safe.config.feedback.theta.mode == ThetaMode::theory_safe);
    CHECK(safe.config.feedback.theta.eta < 700.0);  // clipped by the admissibility caps
    CHECK(std::isfinite(safe.config.feedback.theta.theta_max));
}

TEST_CASE("config round-trip is stable") {
    RunManifest m = parse_config("scenario=fig1\nchecks=decrease\nout=o\n");
    std::string first = emit_config(m);
    RunManifest again = parse_config(first);
    CHECK(emit_config(again) == first);
    CHECK(again.config.feedback.sigma == m.config.feedback.sigma);
    CHECK(again.config.horizon == m.config.horizon);

    RunManifest imp = parse_config("scenario=fig2\nT=1\n");
    std::string emitted = emit_config(imp);
    RunManifest back = parse_config(emitted);
    CHECK(emit_config(back) == emitted);
    CHECK(back.config.feedback.theta.eta == 700.0);
}

TEST_CASE("timeseries emission: exact header, determinism, stall zeros") {
    RunManifest m;
    m.config = scenario_preset("stall");
    m.config.horizon = kPi;

    TimeSeries ts = simulate_closed_loop(m.config);
    auto tmp = std::filesystem::temp_directory_path();
    auto p1 = tmp / "qwell_ts_a.csv";
    auto p2 = tmp / "qwell_ts_b.csv";
    emit_timeseries(ts, p1.string());
    emit_timeseries(simulate_closed_loop(m.config), p2.string());

    std::string text = slurp(p1);
    CHECK(text.rfind("t,sigma,v,u,lyapunov,pop1,pop2,pop3,norm,dist_c1\n", 0) == 0);
    CHECK(text == slurp(p2));  // byte-identical rerun

    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        size_t a = line.find(','), b = line.find(',', a + 1), c = line.find(',', b + 1);
        CHECK(line.substr(a + 1, b - a - 1) == "0");  // sigma
        CHECK(line.substr(b + 1, c - b - 1) == "0");  // v
    }
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);

    CHECK_THROWS(emit_timeseries(ts, "/nonexistent_dir_qwell/x.csv"));
}

TEST_CASE("run() writes artifacts and reports check status") {
    auto out = std::filesystem::temp_directory_path() / "qwell_run_test";
    std::filesystem::remove_all(out);

    RunManifest m;
    m.config = scenario_preset("stall");
    m.config.horizon = kPi;
    m.checks = {"decrease"};  // vacuously true: no sample has |v| above the floor?
    m.out_dir = out.string();
    // The stall run has v == 0 everywhere, so the decrease check has no
    // usable samples and must fail rather than pass silently.
    CHECK(run(m) == int(ExitCode::check_failure));
    CHECK(std::filesystem::exists(out / "timeseries.csv"));
    CHECK(std::filesystem::exists(out / "manifest.txt"));
    CHECK(std::filesystem::exists(out / "report.txt"));

    m.checks = {};
    CHECK(run(m) == int(ExitCode::ok));

    // Determinism across full run() invocations.
    auto out2 = std::filesystem::temp_directory_path() / "qwell_run_test2";
    std::filesystem::remove_all(out2);
    RunManifest m2 = m;
    m2.out_dir = out2.string();
    CHECK(run(m2) == int(ExitCode::ok));
    CHECK(slurp(out / "timeseries.csv") == slurp(out2 / "timeseries.csv"));

    std::filesystem::remove_all(out);
    std::filesystem::remove_all(out2);
}
