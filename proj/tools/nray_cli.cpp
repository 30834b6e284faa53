// Command-line front end: scenario configuration, figure-reproduction
// experiments, CSV emission, and path caching.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nray/nray.hpp"

namespace fs = std::filesystem;

namespace {

struct scenario_options {
    std::string preset;
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
};

void add_scenario_options(CLI::App* cmd, scenario_options& opt) {
    cmd->add_option("--preset", opt.preset, "built-in scenario (fig1|fig2|fig3|fig4)");
    cmd->add_option("--config", opt.config_file, "scenario key-value document");
    cmd->add_option("--set", opt.sets, "override a config key, key=value")->take_all();
    cmd->add_option("--seed", opt.seed, "master seed (overrides sim.seed)");
    cmd->add_option("--trials", opt.trials, "Monte-Carlo trial count");
}

nray::scenario load_scenario(const scenario_options& opt) {
    if (!opt.preset.empty() && !opt.config_file.empty())
        throw std::invalid_argument("use either --preset or --config, not both");
    nray::kv_document doc;
    if (!opt.preset.empty()) {
        doc = nray::parse_kv_string(nray::scenario_to_kv(nray::preset_figure(opt.preset)));
    } else if (!opt.config_file.empty()) {
        std::ifstream is(opt.config_file);
        if (!is) throw std::invalid_argument("cannot open config " + opt.config_file);
        doc = nray::parse_kv(is);
    } else {
        throw std::invalid_argument("need --preset or --config");
    }
    nray::apply_overrides(doc, opt.sets);
    nray::scenario sc = nray::scenario_from_kv(doc);
    if (opt.seed) sc.sim.seed = *opt.seed;
    if (opt.trials) sc.trials = *opt.trials;
    sc.validate();
    return sc;
}

void write_table(const nray::result_table& table, const std::string& out) {
    if (out.empty() || out == "-") {
        nray::emit_csv(table, std::cout);
        return;
    }
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot open output " + out);
    nray::emit_csv(table, os);
}

std::string path_file_name(int trial, int cut) {
    return "path_t" + std::to_string(trial) + "_N" + std::to_string(cut) + ".nraypath";
}

int run_simulate(const nray::scenario& sc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::vector<int> cuts = sc.resolved_cuts();
    double fdmax = 0.0, fdmin = 0.0;
    for (const nray::hop_spec& h : sc.hops) {
        const double fd = h.doppler.max_hz();
        fdmax = std::max(fdmax, fd);
        if (fd > 0.0) fdmin = fdmin == 0.0 ? fd : std::min(fdmin, fd);
    }
    const nray::sim_config resolved = nray::resolve_sim_config(sc.sim, fdmax, fdmin);

    for (int t = 0; t < sc.trials; ++t) {
        const std::uint64_t seed = nray::trial_seed(resolved.seed, t);
        for (int cut : cuts) {
            std::vector<nray::hop_spec> chain(sc.hops.begin(), sc.hops.begin() + cut);
            nray::sim_config cfg = resolved;
            cfg.seed = seed;
            const nray::sample_path path = nray::gen_cascade(chain, cfg);
            const std::string file = (fs::path(out_dir) / path_file_name(t, cut)).string();
            nray::write_path(path, file);
            std::cout << file << " (" << path.samples.size() << " samples @ "
                      << path.sample_rate_hz << " Hz)\n";
        }
    }
    return 0;
}

int run_estimate(const nray::scenario& sc, const std::string& paths_dir,
                 const std::string& out) {
    const nray::threshold_grid grid = sc.grid();
    const double f_ref = sc.resolved_doppler_ref();
    const std::regex name_re(R"(path_t(\d+)_N(\d+)\.nraypath)");

    std::map<int, std::vector<nray::second_order_stats>> by_cut;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(paths_dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        std::smatch m;
        const std::string name = file.filename().string();
        if (!std::regex_match(name, m, name_re)) continue;
        const int cut = std::stoi(m[2]);
        const nray::sample_path path = nray::read_path(file.string());
        by_cut[cut].push_back(nray::empirical_stats(path, grid));
    }
    if (by_cut.empty())
        throw std::invalid_argument("no path_t*_N*.nraypath files under " + paths_dir);

    nray::result_table table;
    for (const auto& [cut, stats] : by_cut) {
        const nray::second_order_stats agg = nray::aggregate_trials(stats);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            nray::result_row r;
            r.threshold_db = grid.db(i);
            r.source = "empirical_N" + std::to_string(cut);
            r.lcr_norm = agg.lcr[i] / f_ref;
            if (!std::isnan(agg.afd[i])) r.afd_norm = agg.afd[i] * f_ref;
            r.cdf = agg.cdf[i];
            if (!agg.lcr_stderr.empty()) r.stderr_norm = agg.lcr_stderr[i] / f_ref;
            table.rows.push_back(std::move(r));
        }
    }
    table.sort_canonical();
    write_table(table, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Second-order statistics (LCR, AFD, CDF) of cascaded Rayleigh fading"};
    app.require_subcommand(1);

    // preset
    std::string preset_name, preset_out;
    CLI::App* cmd_preset = app.add_subcommand("preset", "print a built-in scenario document");
    cmd_preset->add_option("name", preset_name, "fig1|fig2|fig3|fig4")->required();
    cmd_preset->add_option("--out", preset_out, "output file (default stdout)");

    // run / analytic
    scenario_options run_opt, ana_opt, sim_opt, est_opt;
    std::string run_out, ana_out, est_out, sim_dir, est_paths;

    CLI::App* cmd_run = app.add_subcommand("run", "full scenario: analytic + empirical");
    add_scenario_options(cmd_run, run_opt);
    cmd_run->add_option("--out", run_out, "CSV output file (default stdout)");

    CLI::App* cmd_ana = app.add_subcommand("analytic", "closed forms and quadrature only");
    add_scenario_options(cmd_ana, ana_opt);
    cmd_ana->add_option("--out", ana_out, "CSV output file (default stdout)");

    CLI::App* cmd_sim = app.add_subcommand("simulate", "generate and cache sample paths");
    add_scenario_options(cmd_sim, sim_opt);
    cmd_sim->add_option("--out-dir", sim_dir, "cache directory")->required();

    CLI::App* cmd_est = app.add_subcommand("estimate", "empirical statistics from cached paths");
    add_scenario_options(cmd_est, est_opt);
    cmd_est->add_option("--paths", est_paths, "cache directory")->required();
    cmd_est->add_option("--out", est_out, "CSV output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*cmd_preset) {
            const std::string doc = nray::scenario_to_kv(nray::preset_figure(preset_name));
            if (preset_out.empty() || preset_out == "-") {
                std::cout << doc;
            } else {
                std::ofstream os(preset_out);
                if (!os) throw std::runtime_error("cannot open output " + preset_out);
                os << doc;
            }
            return 0;
        }
        if (*cmd_run) {
            const nray::scenario sc = load_scenario(run_opt);
            write_table(nray::run_scenario(sc), run_out);
            return 0;
        }
        if (*cmd_ana) {
            nray::scenario sc = load_scenario(ana_opt);
            std::vector<nray::stat_source> analytic;
            for (nray::stat_source s : sc.outputs)
                if (s != nray::stat_source::empirical) analytic.push_back(s);
            if (analytic.empty()) analytic.push_back(nray::stat_source::analytic_approx);
            sc.outputs = analytic;
            write_table(nray::run_scenario(sc), ana_out);
            return 0;
        }
        if (*cmd_sim) {
            return run_simulate(load_scenario(sim_opt), sim_dir);
        }
        if (*cmd_est) {
            return run_estimate(load_scenario(est_opt), est_paths, est_out);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
