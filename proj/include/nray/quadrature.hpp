#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace nray {

/// Tuning knobs for the deterministic and Monte-Carlo integration paths.
struct quadrature_config {
    double rel_tol = 1e-6;            // target relative error
    int max_depth = 12;               // adaptive bisection depth per axis
    std::size_t mc_samples = 1000000; // Monte-Carlo fallback sample count

    void validate() const {
        if (!(rel_tol > 0.0) || rel_tol > 0.1)
            throw std::invalid_argument("quadrature_config: rel_tol must be in (0, 0.1]");
        if (max_depth < 1)
            throw std::invalid_argument("quadrature_config: max_depth must be >= 1");
        if (mc_samples < 10000)
            throw std::invalid_argument("quadrature_config: mc_samples must be >= 1e4");
    }
};

/// Adaptive refinement exhausted max_depth before reaching the tolerance.
class quadrature_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (QUADPACK dqk15 tables).
inline constexpr double gk15_nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};
inline constexpr double gk15_kronrod_w[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
inline constexpr double gk15_gauss_w[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct panel_result {
    double value = 0.0;
    double error = 0.0;
};

/// One 15-point Kronrod panel with the embedded 7-point Gauss error
/// estimate, rescaled QUADPACK-style so the reported error is conservative
/// without being wildly pessimistic.
template <typename F>
panel_result gk15_panel(F&& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);

    const double fc = f(mid);
    double resk = gk15_kronrod_w[7] * fc;
    double resg = gk15_gauss_w[3] * fc;
    double resabs = std::abs(resk);

    double fv[15];
    fv[14] = fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = half * gk15_nodes[j];
        const double f1 = f(mid - dx);
        const double f2 = f(mid + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        const double fsum = f1 + f2;
        resk += gk15_kronrod_w[j] * fsum;
        resabs += gk15_kronrod_w[j] * (std::abs(f1) + std::abs(f2));
        if (j % 2 == 1) resg += gk15_gauss_w[j / 2] * fsum;
    }

    const double reskh = 0.5 * resk;
    double resasc = gk15_kronrod_w[7] * std::abs(fc - reskh);
    for (int j = 0; j < 7; ++j)
        resasc += gk15_kronrod_w[j] *
                  (std::abs(fv[2 * j] - reskh) + std::abs(fv[2 * j + 1] - reskh));

    panel_result r;
    r.value = resk * half;
    resabs *= std::abs(half);
    resasc *= std::abs(half);
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps))
        err = std::max(err, 50.0 * eps * resabs);
    r.error = err;
    return r;
}

struct segment {
    double a, b, value, error;
    int depth;
    bool operator<(const segment& o) const { return error < o.error; }
};

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration over the union of intervals
/// [pts[0], pts[1]], [pts[1], pts[2]], ... Seeding with interior breakpoints
/// (e.g. the known mode of the integrand) guarantees the initial panels
/// straddle the bulk of the mass.
///
/// Segments are bisected worst-error-first until the accumulated error
/// estimate drops below rel_tol * |integral| (or below abs_tol when the
/// integral is essentially zero). Throws quadrature_error if a segment
/// would need more than max_depth bisections.
template <typename F>
double integrate_adaptive_seeded(F&& f, const std::vector<double>& pts, double rel_tol,
                                 int max_depth, double abs_tol = 0.0) {
    std::priority_queue<detail::segment> heap;
    double total_value = 0.0;
    double total_error = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!(pts[i + 1] > pts[i])) continue;
        detail::panel_result p = detail::gk15_panel(f, pts[i], pts[i + 1]);
        heap.push({pts[i], pts[i + 1], p.value, p.error, 0});
        total_value += p.value;
        total_error += p.error;
    }
    if (heap.empty()) return 0.0;

    while (total_error > std::max(rel_tol * std::abs(total_value), abs_tol)) {
        detail::segment worst = heap.top();
        if (worst.error <= 0.0) break;  // nothing refinable left
        heap.pop();
        if (worst.depth >= max_depth)
            throw quadrature_error("integrate_adaptive: max_depth exhausted before tolerance");
        const double m = 0.5 * (worst.a + worst.b);
        detail::panel_result left = detail::gk15_panel(f, worst.a, m);
        detail::panel_result right = detail::gk15_panel(f, m, worst.b);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push({worst.a, m, left.value, left.error, worst.depth + 1});
        heap.push({m, worst.b, right.value, right.error, worst.depth + 1});
    }
    return total_value;
}

/// Adaptive integration of f over a single interval [a, b].
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol, int max_depth,
                          double abs_tol = 0.0) {
    return integrate_adaptive_seeded(f, std::vector<double>{a, b}, rel_tol, max_depth, abs_tol);
}

}  // namespace nray
