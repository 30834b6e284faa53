#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nray/simulate.hpp"

namespace nray {

/// Ascending positive amplitude thresholds plus the reference used for dB
/// normalization (the per-hop RMS fading amplitude in the figure scenarios).
struct threshold_grid {
    std::vector<double> values;
    double normalization = 1.0;

    static threshold_grid log_spaced_db(double lo_db, double hi_db, int count,
                                        double normalization = 1.0) {
        if (count < 1) throw std::invalid_argument("threshold_grid: count must be >= 1");
        if (!(hi_db > lo_db) && count > 1)
            throw std::invalid_argument("threshold_grid: need hi_db > lo_db");
        threshold_grid g;
        g.normalization = normalization;
        g.values.resize(count);
        for (int i = 0; i < count; ++i) {
            const double db = count == 1 ? lo_db : lo_db + (hi_db - lo_db) * i / (count - 1);
            g.values[i] = normalization * std::pow(10.0, db / 20.0);
        }
        g.validate();
        return g;
    }

    void validate() const {
        if (values.empty()) throw std::invalid_argument("threshold_grid: empty");
        if (!(normalization > 0.0))
            throw std::invalid_argument("threshold_grid: normalization must be > 0");
        double prev = 0.0;
        for (double v : values) {
            if (!(v > prev))
                throw std::invalid_argument("threshold_grid: must be strictly ascending, > 0");
            prev = v;
        }
    }

    double db(std::size_t i) const { return 20.0 * std::log10(values[i] / normalization); }
    std::size_t size() const { return values.size(); }

    bool same_as(const threshold_grid& o) const {
        return normalization == o.normalization && values == o.values;
    }
};

enum class stat_source { analytic_exact, analytic_approx, empirical };

/// Per-threshold second-order statistics. Fields an operation does not
/// produce stay empty; undefined fade durations (no crossings observed) are
/// NaN rather than an error.
struct second_order_stats {
    threshold_grid thresholds;
    std::vector<double> lcr;
    std::vector<double> afd;
    std::vector<double> cdf;
    std::vector<std::uint64_t> crossing_counts;
    std::vector<double> lcr_stderr;  // filled by aggregation / MC routes
    stat_source source = stat_source::empirical;
    double duration_s = 0.0;
};

namespace detail {

struct kahan_sum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double get() const { return s + c; }
};

inline void require_path(const sample_path& path, std::size_t min_len) {
    if (path.samples.size() < min_len)
        throw std::invalid_argument("empirical estimator: path too short");
    if (!(path.sample_rate_hz > 0.0))
        throw std::invalid_argument("empirical estimator: bad sample rate");
}

}  // namespace detail

/// Downward crossing counts per threshold (sample[k] >= y > sample[k+1],
/// no hysteresis) turned into rates over the path duration.
inline second_order_stats empirical_lcr(const sample_path& path, const threshold_grid& grid) {
    detail::require_path(path, 2);
    grid.validate();
    second_order_stats out;
    out.thresholds = grid;
    out.source = stat_source::empirical;
    out.duration_s = path.duration_s();
    out.crossing_counts.resize(grid.size(), 0);
    out.lcr.resize(grid.size(), 0.0);
    const auto& s = path.samples;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        const double y = grid.values[t];
        std::uint64_t count = 0;
        for (std::size_t k = 0; k + 1 < s.size(); ++k)
            count += (s[k] >= y && s[k + 1] < y) ? 1 : 0;
        out.crossing_counts[t] = count;
        out.lcr[t] = static_cast<double>(count) / out.duration_s;
    }
    return out;
}

/// Average fade duration per threshold: total time below the level (with
/// sub-sample linear interpolation at the crossing instants) divided by the
/// number of downward crossings. Boundary-truncated fades contribute their
/// visible time but no crossing, which biases deep-threshold durations
/// slightly low. NaN where no crossing was seen.
inline second_order_stats empirical_afd(const sample_path& path, const threshold_grid& grid) {
    detail::require_path(path, 2);
    grid.validate();
    second_order_stats out;
    out.thresholds = grid;
    out.source = stat_source::empirical;
    out.duration_s = path.duration_s();
    out.crossing_counts.resize(grid.size(), 0);
    out.afd.resize(grid.size(), std::numeric_limits<double>::quiet_NaN());
    const auto& s = path.samples;
    const double dt = 1.0 / path.sample_rate_hz;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        const double y = grid.values[t];
        std::uint64_t count = 0;
        detail::kahan_sum below;
        for (std::size_t k = 0; k + 1 < s.size(); ++k) {
            const double a = s[k], b = s[k + 1];
            if (a >= y && b < y) {
                ++count;
                below.add(dt * (y - b) / (a - b));
            } else if (a < y && b >= y) {
                below.add(dt * (y - a) / (b - a));
            } else if (a < y && b < y) {
                below.add(dt);
            }
        }
        out.crossing_counts[t] = count;
        if (count > 0) out.afd[t] = below.get() / static_cast<double>(count);
    }
    return out;
}

/// Empirical CDF: fraction of samples at or below each threshold.
inline second_order_stats empirical_cdf(const sample_path& path, const threshold_grid& grid) {
    detail::require_path(path, 1);
    grid.validate();
    second_order_stats out;
    out.thresholds = grid;
    out.source = stat_source::empirical;
    out.duration_s = path.duration_s();
    out.cdf.resize(grid.size(), 0.0);
    const auto& s = path.samples;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        const double y = grid.values[t];
        std::uint64_t count = 0;
        for (double v : s) count += (v <= y) ? 1 : 0;
        out.cdf[t] = static_cast<double>(count) / static_cast<double>(s.size());
    }
    return out;
}

/// All three statistics in one pass over the path.
inline second_order_stats empirical_stats(const sample_path& path, const threshold_grid& grid) {
    second_order_stats out = empirical_lcr(path, grid);
    const second_order_stats a = empirical_afd(path, grid);
    const second_order_stats c = empirical_cdf(path, grid);
    out.afd = a.afd;
    out.cdf = c.cdf;
    return out;
}

/// Merges independent trials: duration-weighted means for rates and CDF,
/// fade duration recombined as total-below-time / total-crossings, counts
/// summed, and the across-trial standard error of the mean rate attached.
inline second_order_stats aggregate_trials(const std::vector<second_order_stats>& trials) {
    if (trials.empty()) throw std::invalid_argument("aggregate_trials: no trials");
    const second_order_stats& first = trials.front();
    for (const auto& t : trials) {
        if (!t.thresholds.same_as(first.thresholds))
            throw std::invalid_argument("aggregate_trials: threshold grids differ");
        if (t.source != first.source)
            throw std::invalid_argument("aggregate_trials: sources differ");
    }

    const std::size_t m = first.thresholds.size();
    second_order_stats out;
    out.thresholds = first.thresholds;
    out.source = first.source;
    detail::kahan_sum total_dur;
    for (const auto& t : trials) total_dur.add(t.duration_s);
    out.duration_s = total_dur.get();

    const bool has_lcr = !first.lcr.empty();
    const bool has_afd = !first.afd.empty();
    const bool has_cdf = !first.cdf.empty();
    const bool has_counts = !first.crossing_counts.empty();

    if (has_lcr) out.lcr.assign(m, 0.0);
    if (has_afd) out.afd.assign(m, std::numeric_limits<double>::quiet_NaN());
    if (has_cdf) out.cdf.assign(m, 0.0);
    if (has_counts) out.crossing_counts.assign(m, 0);
    if (has_lcr && trials.size() >= 2) out.lcr_stderr.assign(m, 0.0);

    for (std::size_t i = 0; i < m; ++i) {
        detail::kahan_sum lcr_w, cdf_w, below;
        std::uint64_t counts = 0;
        for (const auto& t : trials) {
            if (has_lcr) lcr_w.add(t.lcr[i] * t.duration_s);
            if (has_cdf) cdf_w.add(t.cdf[i] * t.duration_s);
            if (has_counts) {
                counts += t.crossing_counts[i];
                if (has_afd && t.crossing_counts[i] > 0 && !std::isnan(t.afd[i]))
                    below.add(t.afd[i] * static_cast<double>(t.crossing_counts[i]));
            }
        }
        if (has_lcr) out.lcr[i] = lcr_w.get() / out.duration_s;
        if (has_cdf) out.cdf[i] = cdf_w.get() / out.duration_s;
        if (has_counts) {
            out.crossing_counts[i] = counts;
            if (has_afd && counts > 0)
                out.afd[i] = below.get() / static_cast<double>(counts);
        }
        if (!out.lcr_stderr.empty()) {
            double mean = 0.0;
            for (const auto& t : trials) mean += t.lcr[i];
            mean /= static_cast<double>(trials.size());
            double ss = 0.0;
            for (const auto& t : trials) ss += (t.lcr[i] - mean) * (t.lcr[i] - mean);
            const double k = static_cast<double>(trials.size());
            out.lcr_stderr[i] = std::sqrt(ss / (k - 1.0) / k);
        }
    }
    return out;
}

}  // namespace nray
