// Command-line front end: scenario runs, config validation, the
// analytic-vs-oracle equivalence report, and preset management.

#include "qnet/entmath.hpp"
#include "qnet/experiments.hpp"
#include "qnet/pcs.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void fail(const std::string& code, const std::string& message) {
    json err{{"error", code}, {"message", message}};
    std::cerr << err.dump() << "\n";
    std::exit(1);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("io", "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        fail("parse", std::string("invalid JSON in '") + path + "': " + e.what());
    }
    return {};
}

// Resolve a scenario argument: a file path, or the name of a shipped preset.
json load_scenario_doc(const std::string& arg) {
    if (fs::exists(arg)) return read_json_file(arg);
    for (const std::string& name : qnet::exp::preset_names()) {
        if (name == arg) return json::parse(qnet::exp::preset_text(name));
    }
    fail("not-found", "'" + arg + "' is neither a file nor a shipped preset");
    return {};
}

// key=value with a dotted path into the scenario document.
void apply_override(json& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) fail("override", "expected key=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    json* cur = &doc;
    std::size_t start = 0;
    std::vector<std::string> keys;
    while (start <= path.size()) {
        const auto dot = path.find('.', start);
        keys.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) cur = &((*cur)[keys[i]]);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (...) {
        parsed = value;  // bare strings are allowed
    }
    (*cur)[keys.back()] = parsed;
}

int cmd_run(const std::string& scenario_arg, const std::string& out_dir, int n_seeds,
            const std::vector<std::string>& overrides, bool with_rolling) {
    json doc = load_scenario_doc(scenario_arg);
    for (const std::string& ov : overrides) apply_override(doc, ov);
    if (n_seeds > 0) {
        json seeds = json::array();
        for (int i = 1; i <= n_seeds; ++i) seeds.push_back(i);
        doc["seeds"] = seeds;
    }

    qnet::exp::Scenario scenario;
    try {
        scenario = qnet::exp::load_scenario(doc);
    } catch (const std::exception& e) {
        fail("scenario", e.what());
    }

    const fs::path out(out_dir);
    if (fs::exists(out)) fail("exists", "output directory '" + out_dir + "' already exists");
    fs::create_directories(out);

    {
        std::ofstream f(out / "scenario.normalized.json");
        f << qnet::exp::scenario_to_json(scenario).dump(2) << "\n";
    }

    if (scenario.kind == "pcs_grid") {
        const auto rows = qnet::exp::run_pcs_grid(scenario.grid_from, scenario.grid_to,
                                                  scenario.grid_step);
        std::ofstream f(out / "pcs_grid.csv");
        qnet::exp::write_pcs_grid_csv(rows, f);
        double worst = 0;
        for (const auto& r : rows) worst = std::max(worst, r.deviation);
        std::cout << "pcs grid: " << rows.size() << " points, max |formula - oracle| = "
                  << worst << "\n";
        return worst <= 1e-10 ? 0 : 1;
    }

    qnet::exp::MetricsFrame frame;
    try {
        frame = qnet::exp::run_scenario(scenario);
    } catch (const std::exception& e) {
        fail("run", e.what());
    }
    {
        std::ofstream f(out / "metrics.csv");
        qnet::exp::write_metrics_csv(frame, f);
    }
    const auto table = qnet::exp::summarize(frame, scenario.strategies.front().name);
    const std::string text = qnet::exp::summary_text(table);
    {
        std::ofstream f(out / "summary.txt");
        f << text;
    }
    if (with_rolling) {
        std::ofstream f(out / "rolling.csv");
        f << "strategy,seed,arrival_ns,ma_tts_ns\n";
        for (const auto& strat : scenario.strategies) {
            for (auto seed : scenario.seeds) {
                for (auto [arrival, ma] : qnet::exp::rolling_time_to_serve(
                         frame, strat.name, seed, scenario.ma_window)) {
                    f << strat.name << ',' << seed << ',' << arrival << ',' << ma << "\n";
                }
            }
        }
    }
    std::cout << text;
    if (frame.oversubscriptions || frame.negative_releases || !frame.memory_consistent) {
        fail("audit", "memory auditor reported violations");
    }
    return 0;
}

int cmd_validate(const std::string& scenario_arg) {
    json doc = load_scenario_doc(scenario_arg);
    try {
        qnet::exp::load_scenario(doc);
    } catch (const std::exception& e) {
        fail("scenario", e.what());
    }
    std::cout << "ok\n";
    return 0;
}

int cmd_oracle() {
    using namespace qnet;
    int failures = 0;

    const auto grid = exp::run_pcs_grid(0.25, 1.0, 0.05);
    double worst = 0;
    for (const auto& r : grid) worst = std::max(worst, r.deviation);
    std::cout << "pcs x/xz grid (" << grid.size()
              << " points): max |formula - circuit| = " << worst
              << (worst <= 1e-10 ? "  [ok]" : "  [FAIL]") << "\n";
    if (worst > 1e-10) ++failures;

    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> uf(0.25, 1.0);
    double worst_swap = 0, worst_distill_p = 0, worst_distill_f = 0;
    for (int i = 0; i < 50; ++i) {
        const double f1 = uf(gen), f2 = uf(gen);
        worst_swap = std::max(
            worst_swap, std::abs(dm::simulate_swap(f1, f2) - entmath::swap_fidelity(f1, f2)));
        const auto circuit = dm::simulate_bbpssw(f1, f2);
        const auto formula = entmath::distill_bbpssw(f1, f2);
        worst_distill_p =
            std::max(worst_distill_p, std::abs(circuit.success_prob - formula.success_prob));
        worst_distill_f = std::max(worst_distill_f,
                                   std::abs(circuit.output_fidelity - formula.output_fidelity));
    }
    std::cout << "swap (50 random inputs): max deviation = " << worst_swap
              << (worst_swap <= 1e-12 ? "  [ok]" : "  [FAIL]") << "\n";
    std::cout << "bbpssw (50 random inputs): max deviation = "
              << std::max(worst_distill_p, worst_distill_f)
              << (std::max(worst_distill_p, worst_distill_f) <= 1e-12 ? "  [ok]" : "  [FAIL]")
              << "\n";
    if (worst_swap > 1e-12 || worst_distill_p > 1e-12 || worst_distill_f > 1e-12) ++failures;

    for (double f : {0.85, 0.9, 0.95}) {
        const auto r = dm::simulate_leung_shor_4to2(f, 0.0);
        const bool ok = r.out_fidelity_1 > f && r.out_fidelity_2 > f;
        std::cout << "4-to-2 at f=" << f << ": success=" << r.success_prob
                  << " outputs=(" << r.out_fidelity_1 << ", " << r.out_fidelity_2 << ")"
                  << (ok ? "  [ok]" : "  [FAIL]") << "\n";
        if (!ok) ++failures;
    }

    std::cout << (failures == 0 ? "oracle suite: all checks passed\n"
                                : "oracle suite: FAILURES\n");
    return failures == 0 ? 0 : 1;
}

int cmd_presets(const std::string& dump_dir) {
    if (dump_dir.empty()) {
        for (const std::string& name : qnet::exp::preset_names()) {
            std::cout << name << "\n";
        }
        return 0;
    }
    fs::create_directories(dump_dir);
    for (const std::string& name : qnet::exp::preset_names()) {
        std::ofstream f(fs::path(dump_dir) / (name + ".json"));
        f << qnet::exp::preset_text(name);
    }
    std::cout << "wrote " << qnet::exp::preset_names().size() << " presets to "
              << dump_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qnetsim - discrete-event simulator for entanglement distribution"};
    app.require_subcommand(1);

    std::string scenario_arg, out_dir, dump_dir;
    std::vector<std::string> overrides;
    int n_seeds = 0;
    bool with_rolling = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario");
    run->add_option("scenario", scenario_arg, "scenario file or preset name")->required();
    run->add_option("--out", out_dir, "output directory (must not exist)")->required();
    run->add_option("--seeds", n_seeds, "replace the seed list with 1..N");
    run->add_option("--override", overrides, "dotted.path=value scenario override");
    run->add_flag("--rolling", with_rolling, "also write rolling.csv");

    CLI::App* validate = app.add_subcommand("validate", "validate a scenario document");
    validate->add_option("scenario", scenario_arg, "scenario file or preset name")
        ->required();

    app.add_subcommand("oracle", "run the analytic-vs-circuit equivalence suite");

    CLI::App* presets = app.add_subcommand("presets", "list shipped scenario presets");
    presets->add_option("--dump", dump_dir, "write preset files into a directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_arg, out_dir, n_seeds, overrides, with_rolling);
        if (validate->parsed()) return cmd_validate(scenario_arg);
        if (app.get_subcommand("oracle")->parsed()) return cmd_oracle();
        if (presets->parsed()) return cmd_presets(dump_dir);
    } catch (const std::exception& e) {
        fail("internal", e.what());
    }
    return 0;
}
