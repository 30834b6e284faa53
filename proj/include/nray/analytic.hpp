#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nray/model.hpp"
#include "nray/quadrature.hpp"
#include "nray/rng.hpp"

namespace nray {

/// Requested operation is out of the supported dimensionality.
class dimension_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The level crossing rate underflowed to zero, so the fade duration has no
/// finite value at this threshold.
class afd_undefined_error : public std::runtime_error {
  public:
    afd_undefined_error() : std::runtime_error("AFD undefined at this threshold") {}
};

enum class lcr_mode { exact, approx };

/// Pieces of the Laplace expansion of the crossing-rate integral around its
/// interior critical point; exposed so tests can verify the expansion
/// directly (vanishing gradient, determinant identity).
struct laplace_internals {
    std::vector<double> critical_point;  // x~_i, i = 1..N-1
    double hessian_det = 0.0;            // det A
    double u_at_crit = 0.0;              // u(x~)
    double h_at_crit = 0.0;              // h(x~)
};

namespace detail {

/// Branch layout for the exact crossing-rate integral. The integral singles
/// out one branch notationally; the result is permutation invariant, so the
/// branch with the largest Doppler is rotated into the last slot. That keeps
/// the derivative-variance ratios finite whenever any branch moves at all.
struct pivoted_branches {
    std::vector<double> omega;     // N branch powers, pivot last
    std::vector<double> f;         // N branch Dopplers, pivot last
    std::vector<double> ratio_sq;  // (sigma_i / sigma_N)^2 for i < N
    double log_phi = 0.0;
    bool all_static = false;
};

inline pivoted_branches pivot_branches(const product_params& p) {
    pivoted_branches b;
    b.omega = p.omegas();
    b.f = p.dopplers();
    std::size_t piv = 0;
    for (std::size_t i = 1; i < b.f.size(); ++i)
        if (b.f[i] > b.f[piv]) piv = i;
    if (b.f[piv] <= 0.0) {
        b.all_static = true;
        return b;
    }
    std::swap(b.omega[piv], b.omega.back());
    std::swap(b.f[piv], b.f.back());
    b.log_phi = p.log_total_phi();
    const std::size_t n = b.omega.size();
    const double sig_n_sq = b.omega[n - 1] * b.f[n - 1] * b.f[n - 1];
    b.ratio_sq.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
        b.ratio_sq[i] = b.omega[i] * b.f[i] * b.f[i] / sig_n_sq;
    return b;
}

/// Full integrand of the exact crossing-rate integral in log coordinates
/// u_i = ln x_i, with the exponent
///   h(x) = y^2/Omega_N * prod 1/x_i^2 + sum x_i^2/Omega_i
/// shifted by its minimum h0 so the value stays in [0, ~1] times the
/// polynomially growing bracket.
inline double lcr_integrand(const pivoted_branches& b, double y, double h0,
                            const std::vector<double>& u) {
    const std::size_t d = u.size();
    double sum_u = 0.0;
    double h = 0.0;
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        sum_u += u[i];
        h += std::exp(2.0 * u[i]) / b.omega[i];
        ratio_sum += b.ratio_sq[i] * std::exp(-2.0 * u[i]);
    }
    const double prod_inv_sq = std::exp(-2.0 * sum_u);
    h += y * y / b.omega[d] * prod_inv_sq;
    const double expo = std::exp(h0 - h + sum_u);
    if (expo == 0.0) return 0.0;
    const double bracket = 1.0 + y * y * prod_inv_sq * ratio_sum;
    return std::sqrt(bracket) * expo;
}

/// Recursive nested integration over the remaining axes. Outer coordinates
/// already fixed live in `u[0..k)`; axis k integrates over the range where
/// the shifted exponent is representable, with the critical point seeded as
/// a breakpoint.
struct nested_integrator {
    const pivoted_branches& b;
    double y, h0, cap;
    std::vector<double> axis_cap;  // own-axis upper bounds U_j
    std::vector<double> crit;      // critical point in u coordinates
    double rel_tol;
    int max_depth;
    double abs_floor = 0.0;  // for inner slices whose mass is denormal-scale

    double integrate_axis(std::size_t k, std::vector<double>& u) const {
        const std::size_t d = axis_cap.size();
        // Product-term blowup bound: below this u_k the exponent is past cap
        // even with every inner axis at its own upper bound.
        double slack = std::log(y * y / b.omega[d]) - std::log(cap);
        for (std::size_t j = 0; j < k; ++j) slack -= 2.0 * u[j];
        for (std::size_t j = k + 1; j < d; ++j) slack -= 2.0 * axis_cap[j];
        const double lo = 0.5 * slack;
        const double hi = axis_cap[k];
        if (!(lo < hi)) return 0.0;

        std::vector<double> pts;
        pts.push_back(lo);
        // Bracket the critical point so the initial panels put quadrature
        // nodes inside the integrand's bulk, whose width in log coordinates
        // is O(1).
        for (double p : {crit[k] - 1.0, crit[k], crit[k] + 1.0})
            if (p > lo && p < hi) pts.push_back(p);
        pts.push_back(hi);

        const double tol = rel_tol * std::pow(0.1, static_cast<double>(k));
        return integrate_adaptive_seeded(
            [&](double uk) {
                u[k] = uk;
                if (k + 1 == d) return lcr_integrand(b, y, h0, u);
                return integrate_axis(k + 1, u);
            },
            pts, tol, max_depth, k == 0 ? 0.0 : abs_floor);
    }
};

}  // namespace detail

/// Closed-form approximate level crossing rate of the product process:
///   N_Y(y) = sqrt(mean f_i^2) (2 pi)^{N/2} y / sqrt(Phi)
///            * exp(-N (y^2/Phi)^{1/N}).
/// For N = 1 this is algebraically the classic Rayleigh crossing rate.
inline double lcr_approx(const product_params& params, double y) {
    if (!(y > 0.0)) throw std::domain_error("lcr_approx: requires y > 0");
    const std::size_t n = params.size();
    const double fsq = doppler_sum_sq(params) / static_cast<double>(n);
    if (fsq == 0.0) return 0.0;
    const double log_phi = params.log_total_phi();
    const double nn = static_cast<double>(n);
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    const double expo = 0.5 * nn * log_2pi + std::log(y) - 0.5 * log_phi -
                        nn * std::exp((2.0 * std::log(y) - log_phi) / nn);
    return std::sqrt(fsq) * std::exp(expo);
}

/// Exact level crossing rate of the product process, by adaptive
/// Gauss-Kronrod evaluation of the (N-1)-dimensional integral in log
/// coordinates. N = 1 uses the closed form; the deterministic path is
/// limited to N <= 4 (a 3-D integral) — beyond that use lcr_exact_mc.
inline double lcr_exact(const product_params& params, double y,
                        const quadrature_config& cfg = {}) {
    cfg.validate();
    if (!(y > 0.0)) throw std::domain_error("lcr_exact: requires y > 0");
    const std::size_t n = params.size();
    if (n > 4)
        throw dimension_error(
            "lcr_exact: deterministic quadrature limited to N <= 4; use lcr_exact_mc");

    if (n == 1) {
        const double om = params.omega(0);
        const double rho = y / std::sqrt(om);
        return std::sqrt(2.0 * std::numbers::pi) * params.doppler(0) * rho *
               std::exp(-rho * rho);
    }

    detail::pivoted_branches b = detail::pivot_branches(params);
    if (b.all_static) return 0.0;

    const double nn = static_cast<double>(n);
    const double h0 = nn * std::exp((2.0 * std::log(y) - b.log_phi) / nn);
    const double cap = 760.0 + h0;

    detail::nested_integrator ni{b, y, h0, cap, {}, {}, cfg.rel_tol, cfg.max_depth, 0.0};
    ni.axis_cap.resize(n - 1);
    ni.crit.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        ni.axis_cap[i] = 0.5 * std::log(cap * b.omega[i]);
        ni.crit[i] =
            std::log(y) / nn + 0.5 * std::log(b.omega[i]) - b.log_phi / (2.0 * nn);
    }

    // Inner slices far from the critical point can sit entirely at
    // denormal magnitudes where a relative target is unreachable; give them
    // an absolute floor far below the error budget of the whole integral,
    // whose scale the Laplace expansion predicts.
    {
        double u_crit_sq = 1.0;
        double det_a = nn;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            u_crit_sq += b.ratio_sq[i] * b.omega[n - 1] / b.omega[i];
            det_a *= 4.0 / b.omega[i];
        }
        const double j_est = std::pow(2.0 * std::numbers::pi, 0.5 * (nn - 1.0)) *
                             std::sqrt(u_crit_sq / det_a);
        ni.abs_floor = j_est * cfg.rel_tol * 1e-6;
    }

    std::vector<double> u(n - 1, 0.0);
    const double integral = ni.integrate_axis(0, u);

    const double sigma_n = std::numbers::pi * b.f[n - 1] * std::sqrt(b.omega[n - 1]);
    const double log_pref = std::log(sigma_n) - 0.5 * std::log(2.0 * std::numbers::pi) +
                            nn * std::log(2.0) + std::log(y) - b.log_phi;
    return std::exp(log_pref - h0) * integral;
}

/// A Monte-Carlo integral estimate with its standard error.
struct mc_estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Importance-sampled estimate of the exact crossing-rate integral, usable
/// for any N. The first N-1 coordinates are drawn from their Rayleigh
/// densities (which absorb the sum-exponential factor exactly), leaving the
/// bracket and the product-exponential as a bounded payload with finite
/// variance. Deterministic for fixed (inputs, seed).
inline mc_estimate lcr_exact_mc(const product_params& params, double y,
                                const quadrature_config& cfg, std::uint64_t seed) {
    cfg.validate();
    if (!(y > 0.0)) throw std::domain_error("lcr_exact_mc: requires y > 0");
    const std::size_t n = params.size();

    if (n == 1) {
        return {lcr_exact(params, y, cfg), 0.0, 0};
    }
    detail::pivoted_branches b = detail::pivot_branches(params);
    if (b.all_static) return {0.0, 0.0, cfg.mc_samples};

    std::mt19937_64 eng = make_engine(seed);
    const std::size_t d = n - 1;

    double mean = 0.0;
    double m2 = 0.0;
    std::vector<double> xsq(d);
    for (std::size_t s = 0; s < cfg.mc_samples; ++s) {
        double log_prod_xsq = 0.0;
        double ratio_sum = 0.0;
        double half_inv_prod = 1.0;  // prod Omega_i / (2 x_i)
        for (std::size_t i = 0; i < d; ++i) {
            xsq[i] = b.omega[i] * exponential_unit(eng);
            log_prod_xsq += std::log(xsq[i]);
            ratio_sum += b.ratio_sq[i] / xsq[i];
            half_inv_prod *= 0.5 * b.omega[i] / std::sqrt(xsq[i]);
        }
        const double prod_inv = std::exp(-log_prod_xsq);
        const double bracket = 1.0 + y * y * prod_inv * ratio_sum;
        const double payload =
            std::sqrt(bracket) * std::exp(-y * y / b.omega[d] * prod_inv) * half_inv_prod;
        const double delta = payload - mean;
        mean += delta / static_cast<double>(s + 1);
        m2 += delta * (payload - mean);
    }
    const double ns = static_cast<double>(cfg.mc_samples);
    const double var = m2 / (ns - 1.0);

    const double sigma_n = std::numbers::pi * b.f[n - 1] * std::sqrt(b.omega[n - 1]);
    const double pref = sigma_n / std::sqrt(2.0 * std::numbers::pi) *
                        std::pow(2.0, static_cast<double>(n)) * y / std::exp(b.log_phi);
    return {pref * mean, pref * std::sqrt(var / ns), cfg.mc_samples};
}

/// Critical point, Hessian determinant, and the integrand factors of the
/// Laplace expansion. Requires N >= 2 and a moving last branch.
inline laplace_internals laplace_expansion(const product_params& params, double y) {
    const std::size_t n = params.size();
    if (n < 2) throw dimension_error("laplace_expansion: requires N >= 2");
    if (!(y > 0.0)) throw std::domain_error("laplace_expansion: requires y > 0");
    const double fn = params.doppler(n - 1);
    if (!(fn > 0.0))
        throw std::domain_error("laplace_expansion: branch N must have f_N > 0");

    const double nn = static_cast<double>(n);
    const double log_phi = params.log_total_phi();

    laplace_internals out;
    out.critical_point.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
        out.critical_point[i] = std::exp(std::log(y) / nn + 0.5 * std::log(params.omega(i)) -
                                         log_phi / (2.0 * nn));
    double denom = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) denom *= params.omega(i);
    out.hessian_det = nn * std::pow(4.0, nn - 1.0) / denom;

    double fsum = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double r = params.doppler(i) / fn;
        fsum += r * r;
    }
    out.u_at_crit = std::sqrt(fsum);
    out.h_at_crit = nn * std::exp((2.0 * std::log(y) - log_phi) / nn);
    return out;
}

namespace detail {

/// Natural cubic spline on a uniform grid (Thomas solve for the second
/// derivatives). C^2 smoothness matters here: the adaptive integrator has to
/// certify integrals of this interpolant, and curvature kinks of a merely
/// C^1 fit put a hard floor under the reachable tolerance.
class cubic_table {
  public:
    cubic_table() = default;
    cubic_table(double x0, double dx, std::vector<double> ys)
        : x0_(x0), dx_(dx), y_(std::move(ys)), m_(y_.size(), 0.0) {
        const std::size_t n = y_.size();
        if (n < 3 || !(dx > 0.0))
            throw std::invalid_argument("cubic_table: need >= 3 uniform points");
        // Tridiagonal system for interior second derivatives, natural ends.
        std::vector<double> c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double rhs = 6.0 * (y_[i - 1] - 2.0 * y_[i] + y_[i + 1]) / (dx_ * dx_);
            const double denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
        for (std::size_t i = n - 2; i >= 1; --i) m_[i] = d[i] - c[i] * m_[i + 1];
    }

    double operator()(double x) const {
        const std::size_t n = y_.size();
        if (x <= x0_) return y_.front();
        const double span = x0_ + dx_ * static_cast<double>(n - 1);
        if (x >= span) return y_.back();
        std::size_t i = static_cast<std::size_t>((x - x0_) / dx_);
        if (i > n - 2) i = n - 2;
        const double xa = x0_ + dx_ * static_cast<double>(i);
        const double a = (xa + dx_ - x) / dx_;
        const double b = (x - xa) / dx_;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * dx_ * dx_ / 6.0;
    }

    bool empty() const { return y_.empty(); }

  private:
    double x0_ = 0.0, dx_ = 0.0;
    std::vector<double> y_, m_;
};

}  // namespace detail

/// Evaluator for the CDF of the product process, P(Y <= y), via the exact
/// probabilistic recursion
///   F_1(y) = 1 - exp(-y^2/Omega_1),
///   F_k(y) = int_0^inf f_{X_k}(x) F_{k-1}(y/x) dx.
///
/// For N <= 3 every query runs the recursion directly with nested adaptive
/// quadrature. For N >= 4 the intermediate levels are tabulated once on a
/// log-threshold grid (C^2 spline over monotone-enforced nodes) and only the
/// final level is integrated per query; construction cost is paid once, so
/// batch evaluation over threshold grids stays cheap.
class product_cdf {
  public:
    explicit product_cdf(product_params params, quadrature_config cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        cfg_.validate();
        const std::size_t n = params_.size();
        log_sat_.resize(n + 1, 0.0);
        mean_log_.resize(n + 1, 0.0);
        for (std::size_t k = 1; k <= n; ++k) {
            log_sat_[k] = log_sat_[k - 1] + 0.5 * std::log(sat_factor * params_.omega(k - 1));
            mean_log_[k] = mean_log_[k - 1] +
                           0.5 * (std::log(params_.omega(k - 1)) - specfun::euler_gamma);
        }
        if (n >= 4) build_tables();
    }

    double operator()(double y) const {
        if (!(y > 0.0)) return 0.0;
        const std::size_t n = params_.size();
        double v;
        if (n <= 3 || tables_.empty()) {
            v = level_cdf_direct(n, y, cfg_.rel_tol);
        } else {
            v = level_against(y, n, tables_.back(),
                              std::max(cfg_.rel_tol, table_integration_floor));
        }
        return std::clamp(v, 0.0, 1.0);
    }

  private:
    static constexpr double sat_factor = 34.0;  // exp(-34) ~ 1.7e-15 per branch

    // Direct recursion, exact at every level (N <= 3 path).
    double level_cdf_direct(std::size_t k, double y, double tol) const {
        if (y <= 0.0) return 0.0;
        if (k == 1) return -std::expm1(-y * y / params_.omega(0));
        return convolve(
            y, k, tol,
            [&](double z) { return level_cdf_direct(k - 1, z, tol * 0.1); });
    }

    // One recursion level integrated against an arbitrary inner CDF.
    template <typename InnerCdf>
    double convolve(double y, std::size_t k, double tol, InnerCdf&& inner) const {
        const double om = params_.omega(k - 1);
        const double x_lo = y / std::exp(log_sat_[k - 1]);
        const double x_hi = std::sqrt(746.0 * om);
        if (x_lo >= x_hi) return 1.0;

        const double u_lo = std::log(x_lo);
        const double u_hi = std::log(x_hi);
        std::vector<double> anchors{u_lo};
        // Bulk of the Rayleigh weight and the inner-CDF transition region.
        const double u_mode = 0.5 * std::log(0.5 * om);
        const double u_trans = std::log(y) - mean_log_[k - 1];
        for (double p : {u_mode, u_trans})
            if (p > u_lo && p < u_hi) anchors.push_back(p);
        std::sort(anchors.begin(), anchors.end());
        anchors.push_back(u_hi);
        // Cap the initial panel width so max_depth bisections always reach
        // the scale of the inner function's features (interpolated inner
        // levels are only piecewise smooth).
        std::vector<double> pts;
        for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
            pts.push_back(anchors[i]);
            const double w = anchors[i + 1] - anchors[i];
            const int extra = static_cast<int>(w / 2.0);
            for (int j = 1; j <= extra; ++j)
                pts.push_back(anchors[i] + w * j / (extra + 1.0));
        }
        pts.push_back(anchors.back());

        const double tail = -std::expm1(-x_lo * x_lo / om);
        const double integral = integrate_adaptive_seeded(
            [&](double u) {
                const double xsq = std::exp(2.0 * u);
                const double w = 2.0 * xsq / om * std::exp(-xsq / om);
                if (w == 0.0) return 0.0;
                return w * inner(y * std::exp(-u));
            },
            pts, tol, cfg_.max_depth);
        return integral + tail;
    }

    // Tolerance plan for the tabulated path. Each level is built a decade
    // tighter than the level that consumes it, working back from the final
    // target. Two floors apply: level-2 nodes come from analytic quadrature
    // (1e-10 headroom), and any integral taken over a fitted table cannot be
    // certified below ~1e-8 (the spline is C^2, but its remaining
    // third-derivative kinks cap adaptive refinement at depth 12).
    static constexpr double table_integration_floor = 1e-8;

    double level_tol(std::size_t k) const {
        const std::size_t n = params_.size();
        const double from_target =
            cfg_.rel_tol * std::pow(10.0, -static_cast<double>(n - 1 - k));
        return std::max(from_target, k == 2 ? 1e-10 : table_integration_floor);
    }

    double level_against(double y, std::size_t k, const detail::cubic_table& table,
                         double tol) const {
        if (y <= 0.0) return 0.0;
        return convolve(y, k, tol, [&](double z) {
            if (z <= 0.0) return 0.0;
            return std::clamp(table(std::log(z)), 0.0, 1.0);
        });
    }

    void build_tables() {
        const std::size_t n = params_.size();
        const int npts = 2048;
        tables_.reserve(n - 2);
        for (std::size_t k = 2; k <= n - 1; ++k) {
            const double node_tol = level_tol(k);
            const double t_lo = mean_log_[k] - 28.0;
            const double t_hi = log_sat_[k];
            const double dt = (t_hi - t_lo) / (npts - 1);
            std::vector<double> vs(npts);
            for (int i = 0; i < npts; ++i) {
                const double y = std::exp(t_lo + dt * i);
                double v;
                try {
                    if (k == 2) {
                        v = level_cdf_direct(2, y, node_tol);
                    } else {
                        v = level_against(y, k, tables_.back(), node_tol);
                    }
                } catch (const quadrature_error& e) {
                    throw quadrature_error("product_cdf: level " + std::to_string(k) +
                                           " table at y=" + std::to_string(y) + ": " +
                                           e.what());
                }
                vs[i] = std::clamp(v, 0.0, 1.0);
            }
            // Enforce monotonicity against quadrature jitter before fitting.
            for (int i = 1; i < npts; ++i) vs[i] = std::max(vs[i], vs[i - 1]);
            tables_.emplace_back(t_lo, dt, std::move(vs));
        }
    }

    product_params params_;
    quadrature_config cfg_;
    std::vector<double> log_sat_;   // log saturation radius per level
    std::vector<double> mean_log_;  // E[ln of partial product] per level
    std::vector<detail::cubic_table> tables_;
};

/// One-shot CDF evaluation. Batch callers should hold a product_cdf.
inline double cdf_product(const product_params& params, double y,
                          const quadrature_config& cfg = {}) {
    return product_cdf(params, cfg)(y);
}

/// Average fade duration T_Y(y) = F_Y(y) / N_Y(y) with the chosen
/// crossing-rate route. Throws afd_undefined_error when the crossing rate
/// underflows to zero.
inline double afd(const product_params& params, double y, const quadrature_config& cfg,
                  lcr_mode mode) {
    if (!(y > 0.0)) throw std::domain_error("afd: requires y > 0");
    const double rate =
        mode == lcr_mode::exact ? lcr_exact(params, y, cfg) : lcr_approx(params, y);
    if (!(rate > 0.0) || !std::isfinite(rate)) throw afd_undefined_error();
    return cdf_product(params, y, cfg) / rate;
}

/// Approximate crossing rate of the end-to-end multihop fading amplitude:
/// the closed form applied to the gain-mapped product parameterization.
inline double multihop_lcr_approx(const std::vector<hop_spec>& hops, double alpha) {
    return lcr_approx(cascade_to_product(hops), alpha);
}

}  // namespace nray
