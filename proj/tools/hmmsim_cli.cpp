#include "hmmsim/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using namespace hmmsim;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void report_run(const run::RunResult& r) {
    std::cout << to_string(r.mode) << ": " << r.status << ", " << r.trace.size() << " rows, wall "
              << r.wall_seconds << " s\n  " << r.csv_path << "\n  " << r.manifest_path << "\n";
    if (r.error) std::cerr << "error: " << *r.error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HMM stiff-ODE engine with a two-machine EMT model"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, mode_text, anchor_text, hmm_phases_text;
    std::int64_t decimate = 0;
    bool serial = false, concurrent = false;
    double at = 0.0, eta = 0.0, sigma = 0.0, step = 0.0;

    auto* sim = app.add_subcommand("simulate", "run one mode and write trace CSV plus manifest");
    sim->add_option("--scenario", scenario_path, "scenario TOML")->required();
    sim->add_option("--mode", mode_text, "baseline or hmm")->required();
    sim->add_option("--out", out_dir, "output directory")->required();
    sim->add_option("--anchor", anchor_text, "window_end or evaluation_point");
    sim->add_option("--decimate", decimate, "keep every N-th CSV row");
    sim->add_option("--hmm-phases", hmm_phases_text, "comma list of phases run in HMM mode");

    auto* bench = app.add_subcommand("bench", "baseline and hmm on identical inputs plus bench_report.json");
    bench->add_option("--scenario", scenario_path, "scenario TOML")->required();
    bench->add_option("--out", out_dir, "output directory")->required();
    bench->add_flag("--serial", serial, "run sequentially (default)");
    bench->add_flag("--concurrent", concurrent, "run both modes on separate threads");
    bench->add_option("--anchor", anchor_text, "window_end or evaluation_point");
    bench->add_option("--hmm-phases", hmm_phases_text, "comma list of phases run in HMM mode");
    bench->add_option("--decimate", decimate, "keep every N-th CSV row");

    auto* stiff = app.add_subcommand("stiffness", "Jacobian eigen-analysis at a given time");
    stiff->add_option("--scenario", scenario_path, "scenario TOML")->required();
    stiff->add_option("--at", at, "time in seconds")->required();

    auto* kcheck = app.add_subcommand("kernel-check", "kernel moments and attenuation");
    kcheck->add_option("--eta", eta, "half width, s")->required();
    kcheck->add_option("--sigma", sigma, "Gaussian width, s")->required();
    kcheck->add_option("--step", step, "micro step, s")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (kcheck->parsed()) {
            run::print_kernel_check(run::run_kernel_check(eta, sigma, step), std::cout);
            return 0;
        }
        Scenario scenario = load_scenario(scenario_path);
        if (stiff->parsed()) {
            run::print_stiffness(run::run_stiffness(scenario, at), std::cout);
            return 0;
        }
        std::optional<AnchorMode> anchor;
        if (!anchor_text.empty()) anchor = parse_anchor_mode(anchor_text);
        std::optional<std::vector<std::string>> phases;
        if (!hmm_phases_text.empty()) phases = split_list(hmm_phases_text);
        std::optional<std::int64_t> dec;
        if (decimate != 0) dec = decimate;
        run::apply_overrides(scenario, anchor, phases, dec);

        if (sim->parsed()) {
            const auto r = run::run_simulate(scenario, run::parse_run_mode(mode_text), out_dir);
            report_run(r);
            return r.status == "ok" ? 0 : 2;
        }
        if (serial && concurrent) throw ParameterError("--serial and --concurrent are exclusive");
        const auto rep = run::run_bench(scenario, out_dir, !concurrent);
        std::cout << "baseline " << rep.wall_baseline << " s, hmm " << rep.wall_hmm << " s, speedup "
                  << rep.speedup_pct << " %\n";
        std::cout << "predicted cycle ratio " << rep.predicted_cycle_ratio << ", measured "
                  << rep.measured_cycle_ratio << ", whole run " << rep.measured_run_ratio << "\n";
        if (rep.errors) {
            for (const auto& [name, err] : rep.errors->per_variable) {
                std::cout << "  rel_l2 " << name << " = " << err << "\n";
            }
        }
        std::cout << "report: " << out_dir << "/bench_report.json\n";
        if (rep.status != "ok") {
            std::cerr << "error: " << rep.error.value_or("bench failed") << "\n";
            return 2;
        }
        return 0;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 2;
    } catch (const InitializationError& e) {
        std::cerr << "initialization: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
