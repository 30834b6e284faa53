#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nray/analytic.hpp"
#include "nray/estimate.hpp"
#include "nray/simulate.hpp"

namespace nray {

/// A complete experiment description: the relay chain, sampling setup,
/// threshold grid, requested outputs, Monte-Carlo trial count, and the
/// station cuts (chain prefixes) at which statistics are observed.
struct scenario {
    std::vector<hop_spec> hops;
    sim_config sim;
    double grid_min_db = -20.0;
    double grid_max_db = 10.0;
    int grid_points = 31;
    double grid_normalization = 1.0;
    int trials = 1;
    std::vector<stat_source> outputs{stat_source::analytic_approx};
    std::vector<int> cuts;         // empty: full chain only
    double doppler_ref_hz = 0.0;   // 0: largest single-station shift

    threshold_grid grid() const {
        return threshold_grid::log_spaced_db(grid_min_db, grid_max_db, grid_points,
                                             grid_normalization);
    }

    std::vector<int> resolved_cuts() const {
        std::vector<int> c = cuts;
        if (c.empty()) c.push_back(static_cast<int>(hops.size()));
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        for (int k : c)
            if (k < 1 || k > static_cast<int>(hops.size()))
                throw std::invalid_argument("scenario: cut outside [1, N]");
        return c;
    }

    double resolved_doppler_ref() const {
        if (doppler_ref_hz > 0.0) return doppler_ref_hz;
        double f = 0.0;
        for (const hop_spec& h : hops)
            f = std::max({f, h.doppler.f_prime_hz, h.doppler.f_double_prime_hz});
        return f;
    }

    void validate() const {
        if (hops.empty()) throw std::invalid_argument("scenario: need >= 1 hop");
        for (const auto& h : hops) h.validate();
        if (trials < 1) throw std::invalid_argument("scenario: trials must be >= 1");
        if (outputs.empty()) throw std::invalid_argument("scenario: outputs must be nonempty");
        resolved_cuts();
        grid().validate();
        if (!(resolved_doppler_ref() > 0.0))
            throw std::invalid_argument("scenario: no Doppler reference derivable");
    }
};

/// One CSV row. NaN marks an absent value (emitted as an empty field).
struct result_row {
    double threshold_db = 0.0;
    std::string source;
    double lcr_norm = std::numeric_limits<double>::quiet_NaN();
    double afd_norm = std::numeric_limits<double>::quiet_NaN();
    double cdf = std::numeric_limits<double>::quiet_NaN();
    double stderr_norm = std::numeric_limits<double>::quiet_NaN();
};

struct result_table {
    std::vector<result_row> rows;

    void sort_canonical() {
        std::stable_sort(rows.begin(), rows.end(), [](const result_row& a, const result_row& b) {
            if (a.source != b.source) return a.source < b.source;
            return a.threshold_db < b.threshold_db;
        });
    }
};

namespace detail {

inline std::string format_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string csv_field(double v) {
    return std::isnan(v) ? std::string() : format_sig9(v);
}

inline const char* source_base_name(stat_source s) {
    switch (s) {
        case stat_source::analytic_exact: return "exact";
        case stat_source::analytic_approx: return "approx";
        default: return "empirical";
    }
}

}  // namespace detail

/// Writes the table as UTF-8 CSV with the fixed header
/// threshold_db,source,lcr_norm,afd_norm,cdf,stderr — rows sorted by
/// (source, threshold), floats at 9 significant digits, absent values empty.
inline void emit_csv(const result_table& table, std::ostream& os) {
    result_table sorted = table;
    sorted.sort_canonical();
    os << "threshold_db,source,lcr_norm,afd_norm,cdf,stderr\n";
    for (const result_row& r : sorted.rows) {
        os << detail::format_sig9(r.threshold_db) << ',' << r.source << ','
           << detail::csv_field(r.lcr_norm) << ',' << detail::csv_field(r.afd_norm) << ','
           << detail::csv_field(r.cdf) << ',' << detail::csv_field(r.stderr_norm) << '\n';
    }
    if (!os) throw std::runtime_error("emit_csv: stream failure");
}

inline result_table parse_csv(std::istream& is) {
    result_table table;
    std::string line;
    if (!std::getline(is, line) || line != "threshold_db,source,lcr_norm,afd_norm,cdf,stderr")
        throw std::runtime_error("parse_csv: bad header");
    const auto field = [](const std::string& s) {
        return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            parts.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (parts.size() != 6) throw std::runtime_error("parse_csv: bad row: " + line);
        result_row r;
        r.threshold_db = std::stod(parts[0]);
        r.source = parts[1];
        r.lcr_norm = field(parts[2]);
        r.afd_norm = field(parts[3]);
        r.cdf = field(parts[4]);
        r.stderr_norm = field(parts[5]);
        table.rows.push_back(std::move(r));
    }
    return table;
}

namespace detail {

/// Empirical statistics of one trial at each requested cut. Per-hop paths
/// are generated once and combined as running prefix products; the per-hop
/// seeds depend only on (trial seed, hop index), so a cut's product path is
/// identical to what gen_cascade would produce for the truncated chain.
inline std::vector<second_order_stats> run_trial(const scenario& sc, const sim_config& resolved,
                                                 const std::vector<int>& cuts,
                                                 const product_params& mapped,
                                                 const threshold_grid& grid,
                                                 std::uint64_t trial_seed) {
    std::vector<second_order_stats> out;
    out.reserve(cuts.size());
    sample_path prod;
    prod.sample_rate_hz = resolved.sample_rate_hz;
    prod.samples.assign(detail::sample_count(resolved), 1.0);
    prod.origin.kind = channel_model::cascade;
    prod.origin.seed = trial_seed;

    std::size_t next_cut = 0;
    for (std::size_t i = 0; i < sc.hops.size() && next_cut < cuts.size(); ++i) {
        sim_config hop_cfg = resolved;
        hop_cfg.seed = derive_seed(trial_seed, i);
        const sample_path hop_path = gen_hop(sc.hops[i], hop_cfg);
        const double gain = std::sqrt(mapped.omega(i) / sc.hops[i].mean_power_hat_omega);
        for (std::size_t k = 0; k < prod.samples.size(); ++k)
            prod.samples[k] *= gain * hop_path.samples[k];
        prod.origin.sub_seeds.push_back(hop_cfg.seed);
        if (static_cast<int>(i + 1) == cuts[next_cut]) {
            out.push_back(empirical_stats(prod, grid));
            ++next_cut;
        }
    }
    return out;
}

}  // namespace detail

/// Derives the trial master seeds from the scenario seed.
inline std::uint64_t trial_seed(std::uint64_t master, int trial) {
    return derive_seed(derive_seed(master, 0x545249414cULL), static_cast<std::uint64_t>(trial));
}

/// Runs every requested output over the grid at every cut and merges the
/// rows. Empirical outputs average `trials` independent seeded trials
/// (dispatched concurrently); assembly order is deterministic.
inline result_table run_scenario(const scenario& sc) {
    sc.validate();
    const std::vector<int> cuts = sc.resolved_cuts();
    const threshold_grid grid = sc.grid();
    const double f_ref = sc.resolved_doppler_ref();
    const product_params mapped = cascade_to_product(sc.hops);
    const quadrature_config qcfg{};

    result_table table;

    const bool want_exact =
        std::find(sc.outputs.begin(), sc.outputs.end(), stat_source::analytic_exact) !=
        sc.outputs.end();
    const bool want_approx =
        std::find(sc.outputs.begin(), sc.outputs.end(), stat_source::analytic_approx) !=
        sc.outputs.end();
    const bool want_empirical =
        std::find(sc.outputs.begin(), sc.outputs.end(), stat_source::empirical) !=
        sc.outputs.end();

    for (int cut : cuts) {
        if (!want_exact && !want_approx) break;
        std::vector<double> omegas(mapped.omegas().begin(), mapped.omegas().begin() + cut);
        std::vector<double> dops(mapped.dopplers().begin(), mapped.dopplers().begin() + cut);
        const product_params params(std::move(omegas), std::move(dops));
        const product_cdf cdf_eval(params, qcfg);

        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double y = grid.values[i];
            const double cdf = cdf_eval(y);
            if (want_approx) {
                result_row r;
                r.threshold_db = grid.db(i);
                r.source = std::string("approx_N") + std::to_string(cut);
                const double rate = lcr_approx(params, y);
                r.lcr_norm = rate / f_ref;
                if (rate > 0.0) r.afd_norm = cdf / rate * f_ref;
                r.cdf = cdf;
                table.rows.push_back(std::move(r));
            }
            if (want_exact) {
                result_row r;
                r.threshold_db = grid.db(i);
                r.source = std::string("exact_N") + std::to_string(cut);
                double rate;
                if (params.size() <= 4) {
                    rate = lcr_exact(params, y, qcfg);
                } else {
                    const mc_estimate est = lcr_exact_mc(
                        params, y, qcfg,
                        derive_seed(derive_seed(sc.sim.seed, 0x4d43ULL + cut), i));
                    rate = est.value;
                    r.stderr_norm = est.std_error / f_ref;
                }
                r.lcr_norm = rate / f_ref;
                if (rate > 0.0) r.afd_norm = cdf / rate * f_ref;
                r.cdf = cdf;
                table.rows.push_back(std::move(r));
            }
        }
    }

    if (want_empirical) {
        double fdmax = 0.0, fdmin = 0.0;
        for (const hop_spec& h : sc.hops) {
            const double fd = h.doppler.max_hz();
            fdmax = std::max(fdmax, fd);
            if (fd > 0.0) fdmin = fdmin == 0.0 ? fd : std::min(fdmin, fd);
        }
        const sim_config resolved = resolve_sim_config(sc.sim, fdmax, fdmin);

        std::vector<std::vector<second_order_stats>> per_trial(sc.trials);
        const unsigned workers =
            std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                            static_cast<unsigned>(sc.trials)));
        std::vector<std::future<void>> futs;
        std::atomic<int> next{0};
        for (unsigned w = 0; w < workers; ++w) {
            futs.push_back(std::async(std::launch::async, [&] {
                for (int t = next.fetch_add(1); t < sc.trials; t = next.fetch_add(1))
                    per_trial[t] = detail::run_trial(sc, resolved, cuts, mapped, grid,
                                                     trial_seed(resolved.seed, t));
            }));
        }
        for (auto& f : futs) f.get();

        for (std::size_t c = 0; c < cuts.size(); ++c) {
            std::vector<second_order_stats> stats;
            stats.reserve(per_trial.size());
            for (auto& tr : per_trial) stats.push_back(std::move(tr[c]));
            const second_order_stats agg = aggregate_trials(stats);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                result_row r;
                r.threshold_db = grid.db(i);
                r.source = std::string("empirical_N") + std::to_string(cuts[c]);
                r.lcr_norm = agg.lcr[i] / f_ref;
                if (!std::isnan(agg.afd[i])) r.afd_norm = agg.afd[i] * f_ref;
                r.cdf = agg.cdf[i];
                if (!agg.lcr_stderr.empty()) r.stderr_norm = agg.lcr_stderr[i] / f_ref;
                table.rows.push_back(std::move(r));
            }
        }
    }

    table.sort_canonical();
    return table;
}

// --- key-value scenario documents -------------------------------------------
//
// Flat dotted-key text format, one `key = value` per line, # comments.
// Keys mirror the scenario fields; hop lists are indexed (hops.1.omega_hat).

using kv_document = std::map<std::string, std::string>;

inline kv_document parse_kv(std::istream& is) {
    kv_document doc;
    std::string line;
    int lineno = 0;
    const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        doc[key] = val;
    }
    return doc;
}

inline kv_document parse_kv_string(const std::string& text) {
    std::istringstream is(text);
    return parse_kv(is);
}

/// Applies `key=value` override strings (the CLI --set flag).
inline void apply_overrides(kv_document& doc, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("--set expects key=value, got: " + s);
        doc[s.substr(0, eq)] = s.substr(eq + 1);
    }
}

namespace detail {

struct kv_reader {
    const kv_document& doc;
    mutable std::vector<std::string> seen;

    std::optional<std::string> get(const std::string& key) const {
        seen.push_back(key);
        const auto it = doc.find(key);
        if (it == doc.end()) return std::nullopt;
        return it->second;
    }
    double number(const std::string& key, double fallback) const {
        const auto v = get(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            const double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument("");
            return d;
        } catch (...) {
            throw std::invalid_argument("config key " + key + ": not a number: " + *v);
        }
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }
    void check_unknown() const {
        for (const auto& [k, v] : doc) {
            if (std::find(seen.begin(), seen.end(), k) == seen.end())
                throw std::invalid_argument("config: unknown key " + k);
        }
    }
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(pos, comma - pos);
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
        pos = comma + 1;
    }
    return out;
}

inline stat_source parse_source(const std::string& s) {
    if (s == "exact") return stat_source::analytic_exact;
    if (s == "approx") return stat_source::analytic_approx;
    if (s == "empirical") return stat_source::empirical;
    throw std::invalid_argument("config: unknown output source " + s);
}

}  // namespace detail

inline scenario scenario_from_kv(const kv_document& doc) {
    detail::kv_reader r{doc, {}};
    scenario sc;

    const int count = static_cast<int>(r.number("hops.count", 1));
    if (count < 1) throw std::invalid_argument("config: hops.count must be >= 1");
    for (int h = 1; h <= count; ++h) {
        const std::string p = "hops." + std::to_string(h) + ".";
        hop_spec hop;
        hop.mean_power_hat_omega = r.number(p + "omega_hat", 1.0);

        const std::string kind = r.text(p + "doppler.kind", "f2m");
        const double fp = r.number(p + "doppler.f_prime_hz", 0.0);
        const double fpp = r.number(p + "doppler.f_double_prime_hz", 0.0);
        if (kind == "f2m")
            hop.doppler = doppler_spec::fixed_to_mobile(fp);
        else if (kind == "m2m")
            hop.doppler = doppler_spec::mobile_to_mobile(fp, fpp);
        else
            throw std::invalid_argument("config: doppler.kind must be f2m or m2m");

        const std::string mode = r.text(p + "gain.mode", "unit");
        double default_w0 = 1.0;
        if (mode == "unit") {
            hop.gain = unit_gain{};
        } else if (mode == "fixed") {
            hop.gain = fixed_gain{r.number(p + "gain.c", 1.0)};
        } else if (mode == "semi_blind") {
            const double snr_db = r.number(p + "gain.snr_db", 0.0);
            hop.gain = semi_blind{snr_db};
            default_w0 = hop.mean_power_hat_omega / db_to_linear(snr_db);
        } else {
            throw std::invalid_argument("config: gain.mode must be unit|fixed|semi_blind");
        }
        hop.noise_variance = r.number(p + "noise_w0", default_w0);
        hop.validate();
        sc.hops.push_back(hop);
    }

    sc.sim.sample_rate_hz = r.number("sim.sample_rate_hz", 0.0);
    sc.sim.duration_s = r.number("sim.duration_s", 0.0);
    sc.sim.num_sinusoids = static_cast<int>(r.number("sim.num_sinusoids", 32));
    sc.sim.seed = static_cast<std::uint64_t>(r.number("sim.seed", 1));

    sc.grid_min_db = r.number("grid.min_db", -20.0);
    sc.grid_max_db = r.number("grid.max_db", 10.0);
    sc.grid_points = static_cast<int>(r.number("grid.points", 31));
    sc.grid_normalization = r.number("grid.normalization", 1.0);

    sc.trials = static_cast<int>(r.number("trials", 1));
    sc.doppler_ref_hz = r.number("doppler_ref_hz", 0.0);

    sc.outputs.clear();
    for (const std::string& s : detail::split_list(r.text("outputs", "approx")))
        sc.outputs.push_back(detail::parse_source(s));

    sc.cuts.clear();
    for (const std::string& s : detail::split_list(r.text("cuts", "")))
        sc.cuts.push_back(std::stoi(s));

    r.check_unknown();
    sc.validate();
    return sc;
}

inline std::string scenario_to_kv(const scenario& sc) {
    std::ostringstream os;
    os << "# n-Rayleigh scenario\n";
    os << "hops.count = " << sc.hops.size() << "\n";
    for (std::size_t i = 0; i < sc.hops.size(); ++i) {
        const hop_spec& h = sc.hops[i];
        const std::string p = "hops." + std::to_string(i + 1) + ".";
        os << p << "omega_hat = " << detail::format_sig9(h.mean_power_hat_omega) << "\n";
        os << p << "noise_w0 = " << detail::format_sig9(h.noise_variance) << "\n";
        os << p << "doppler.kind = "
           << (h.doppler.kind == doppler_kind::fixed_to_mobile ? "f2m" : "m2m") << "\n";
        os << p << "doppler.f_prime_hz = " << detail::format_sig9(h.doppler.f_prime_hz) << "\n";
        if (h.doppler.kind == doppler_kind::mobile_to_mobile)
            os << p << "doppler.f_double_prime_hz = "
               << detail::format_sig9(h.doppler.f_double_prime_hz) << "\n";
        if (std::holds_alternative<unit_gain>(h.gain)) {
            os << p << "gain.mode = unit\n";
        } else if (const auto* fg = std::get_if<fixed_gain>(&h.gain)) {
            os << p << "gain.mode = fixed\n";
            os << p << "gain.c = " << detail::format_sig9(fg->c) << "\n";
        } else {
            os << p << "gain.mode = semi_blind\n";
            os << p << "gain.snr_db = "
               << detail::format_sig9(std::get<semi_blind>(h.gain).mean_snr_db) << "\n";
        }
    }
    os << "sim.sample_rate_hz = " << detail::format_sig9(sc.sim.sample_rate_hz) << "\n";
    os << "sim.duration_s = " << detail::format_sig9(sc.sim.duration_s) << "\n";
    os << "sim.num_sinusoids = " << sc.sim.num_sinusoids << "\n";
    os << "sim.seed = " << sc.sim.seed << "\n";
    os << "grid.min_db = " << detail::format_sig9(sc.grid_min_db) << "\n";
    os << "grid.max_db = " << detail::format_sig9(sc.grid_max_db) << "\n";
    os << "grid.points = " << sc.grid_points << "\n";
    os << "grid.normalization = " << detail::format_sig9(sc.grid_normalization) << "\n";
    os << "trials = " << sc.trials << "\n";
    os << "doppler_ref_hz = " << detail::format_sig9(sc.doppler_ref_hz) << "\n";
    os << "outputs = ";
    for (std::size_t i = 0; i < sc.outputs.size(); ++i)
        os << (i ? "," : "") << detail::source_base_name(sc.outputs[i]);
    os << "\n";
    if (!sc.cuts.empty()) {
        os << "cuts = ";
        for (std::size_t i = 0; i < sc.cuts.size(); ++i) os << (i ? "," : "") << sc.cuts[i];
        os << "\n";
    }
    return os.str();
}

/// Built-in figure scenarios: a 5-hop chain with four semi-blind relays,
/// unit per-hop mean power, every relay moving at the same shift f_m = 1 Hz
/// with static source and destination terminals, observed at stations 2, 3
/// and 5. fig1/fig2 run at 5 dB mean hop SNR, fig3/fig4 at 20 dB (the LCR
/// and AFD figures of a pair share one scenario; they plot different
/// columns of the same table).
inline scenario preset_figure(const std::string& name) {
    double snr_db;
    if (name == "fig1" || name == "fig2")
        snr_db = 5.0;
    else if (name == "fig3" || name == "fig4")
        snr_db = 20.0;
    else
        throw std::invalid_argument("preset_figure: unknown preset " + name);

    const double omega_hat = 1.0;
    const double fm = 1.0;
    scenario sc;
    const std::vector<doppler_spec> dops = station_dopplers({0.0, fm, fm, fm, fm, 0.0});
    for (int i = 0; i < 5; ++i) {
        hop_spec h;
        h.mean_power_hat_omega = omega_hat;
        h.noise_variance = omega_hat / db_to_linear(snr_db);
        h.doppler = dops[i];
        h.gain = i < 4 ? gain_mode{semi_blind{snr_db}} : gain_mode{unit_gain{}};
        sc.hops.push_back(h);
    }
    sc.sim.seed = 1;
    sc.trials = 8;
    sc.grid_min_db = -20.0;
    sc.grid_max_db = 10.0;
    sc.grid_points = 31;
    sc.grid_normalization = std::sqrt(omega_hat);
    sc.outputs = {stat_source::analytic_approx, stat_source::empirical};
    sc.cuts = {2, 3, 5};
    sc.doppler_ref_hz = fm;
    return sc;
}

}  // namespace nray
