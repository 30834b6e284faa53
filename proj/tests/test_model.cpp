#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nray/model.hpp"
#include "nray/rng.hpp"
#include "oracles.hpp"

using namespace nray;

TEST_CASE("effective_doppler") {
    CHECK(effective_doppler(doppler_spec::fixed_to_mobile(100.0)) == 100.0);
    CHECK(effective_doppler(doppler_spec::mobile_to_mobile(30.0, 40.0)) ==
          Catch::Approx(50.0).epsilon(1e-15));
    const double fm = 7.25;
    CHECK(effective_doppler(doppler_spec::mobile_to_mobile(fm, fm)) ==
          Catch::Approx(fm * std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("max_doppler") {
    CHECK(max_doppler(doppler_spec::fixed_to_mobile(10.0)) == 10.0);
    CHECK(max_doppler(doppler_spec::mobile_to_mobile(10.0, 4.0)) == 14.0);
}

TEST_CASE("doppler_spec invariants") {
    CHECK_THROWS_AS(doppler_spec::fixed_to_mobile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(doppler_spec::fixed_to_mobile(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(doppler_spec::mobile_to_mobile(-1.0, 2.0), std::invalid_argument);
    doppler_spec bad{doppler_kind::fixed_to_mobile, 5.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    // A static mobile-to-mobile hop is allowed (zero effective Doppler).
    CHECK(effective_doppler(doppler_spec::mobile_to_mobile(0.0, 0.0)) == 0.0);
}

TEST_CASE("deriv_variance") {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(deriv_variance(1.0, 1.0) == Catch::Approx(pi2).epsilon(1e-15));
    CHECK(deriv_variance(4.0, 0.0) == 0.0);
    CHECK(deriv_variance(2.0, 10.0) == Catch::Approx(200.0 * pi2).epsilon(1e-15));
    CHECK_THROWS_AS(deriv_variance(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("semi_blind_gain_sq") {
    // gbar = 1: e * E1(1).
    CHECK(semi_blind_gain_sq(1.0, 1.0) ==
          Catch::Approx(0.59634736232319407).epsilon(1e-12));
    // gbar = 10^0.5 (5 dB): exp(1/gbar) * E1(1/gbar). The oracle value is
    // 1.1894226682931217.
    const double gbar = std::pow(10.0, 0.5);
    CHECK(semi_blind_gain_sq(gbar, 1.0) ==
          Catch::Approx(1.1894226682931217).epsilon(1e-12));
    // Same number out of the dual-method E1 oracle.
    const double x = 1.0 / gbar;
    CHECK(semi_blind_gain_sq(gbar, 1.0) ==
          Catch::Approx(std::exp(x) * oracles::e1_oracle(x)).epsilon(1e-12));
    // Diverges like ln(gbar): monotone in the mean SNR.
    CHECK(semi_blind_gain_sq(1e6, 1.0) > semi_blind_gain_sq(1e3, 1.0));
    // Scales as 1/omega_hat.
    CHECK(semi_blind_gain_sq(2.0, 4.0) ==
          Catch::Approx(semi_blind_gain_sq(2.0, 1.0) / 4.0).epsilon(1e-15));
    CHECK_THROWS_AS(semi_blind_gain_sq(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(semi_blind_gain_sq(-2.0, 1.0), std::domain_error);
}

TEST_CASE("fixed_gain_sq") {
    CHECK(fixed_gain_sq(1.0, 1.0) == 1.0);
    CHECK(fixed_gain_sq(2.0, 0.5) == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(fixed_gain_sq(1.0, 0.01) == Catch::Approx(100.0).epsilon(1e-15));
    CHECK_THROWS_AS(fixed_gain_sq(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(fixed_gain_sq(1.0, 0.0), std::domain_error);
}

namespace {

hop_spec make_hop(double omega_hat, doppler_spec d, gain_mode g, double w0 = 1.0) {
    hop_spec h;
    h.mean_power_hat_omega = omega_hat;
    h.noise_variance = w0;
    h.doppler = d;
    h.gain = g;
    return h;
}

std::vector<hop_spec> homogeneous_semi_blind_chain(int n, double snr_db, double omega_hat) {
    const double w0 = omega_hat / db_to_linear(snr_db);
    std::vector<hop_spec> hops;
    const auto dops = station_dopplers(std::vector<double>(n + 1, 1.0));
    for (int i = 0; i < n; ++i)
        hops.push_back(make_hop(omega_hat, dops[i],
                                i + 1 < n ? gain_mode{semi_blind{snr_db}} : gain_mode{unit_gain{}},
                                w0));
    return hops;
}

}  // namespace

TEST_CASE("cascade_to_product basics") {
    // Single hop: no relays, Omega_1 = omega_hat.
    const auto single = cascade_to_product(
        {make_hop(2.0, doppler_spec::fixed_to_mobile(3.0), unit_gain{})});
    REQUIRE(single.size() == 1);
    CHECK(single.omega(0) == 2.0);
    CHECK(single.doppler(0) == 3.0);

    // Two hops with a unit-gain relay: straight pass-through of powers.
    const auto two = cascade_to_product(
        {make_hop(1.5, doppler_spec::fixed_to_mobile(1.0), unit_gain{}),
         make_hop(0.7, doppler_spec::mobile_to_mobile(1.0, 1.0), unit_gain{})});
    REQUIRE(two.size() == 2);
    CHECK(two.omega(0) == 1.5);
    CHECK(two.omega(1) == 0.7);

    // Length preservation over a random chain.
    std::mt19937_64 eng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(eng() % 7);
        std::vector<hop_spec> hops;
        for (int i = 0; i < n; ++i)
            hops.push_back(make_hop(0.5 + uniform_unit(eng),
                                    doppler_spec::mobile_to_mobile(1.0, uniform_unit(eng)),
                                    fixed_gain{1.0 + uniform_unit(eng)},
                                    0.5 + uniform_unit(eng)));
        CHECK(cascade_to_product(hops).size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("homogeneous semi-blind chain matches the closed-form power product") {
    // Phi = omega_hat * exp((N-1)/gbar) * Gamma(0, 1/gbar)^{N-1}.
    for (double snr_db : {5.0, 20.0}) {
        const double gbar = db_to_linear(snr_db);
        const double omega_hat = 1.0;
        const auto params = cascade_to_product(homogeneous_semi_blind_chain(5, snr_db, omega_hat));
        const double e1 = nray::specfun::gamma_upper_zero(1.0 / gbar);
        const double phi_closed = omega_hat * std::exp(4.0 / gbar) * std::pow(e1, 4.0);
        CHECK(params.total_phi() == Catch::Approx(phi_closed).epsilon(1e-12));
        // Per-branch powers after the first hop all equal exp(1/gbar)*E1(1/gbar).
        for (std::size_t i = 1; i < params.size(); ++i)
            CHECK(params.omega(i) ==
                  Catch::Approx(std::exp(1.0 / gbar) * e1).epsilon(1e-12));
        CHECK(params.omega(0) == omega_hat);
    }
    // Frozen oracle values at 5 dB: Omega = 1.18942266829312173,
    // Phi_5 = 2.00145045821469946.
    const auto p5 = cascade_to_product(homogeneous_semi_blind_chain(5, 5.0, 1.0));
    CHECK(p5.omega(1) == Catch::Approx(1.18942266829312173).epsilon(1e-12));
    CHECK(p5.total_phi() == Catch::Approx(2.00145045821469946).epsilon(1e-12));
}

TEST_CASE("semi-blind SNR consistency is enforced") {
    // omega_hat / W0 must equal the configured mean SNR.
    hop_spec h = make_hop(1.0, doppler_spec::fixed_to_mobile(1.0), semi_blind{5.0}, 0.9);
    CHECK_THROWS_AS(relay_gain_sq(h), std::invalid_argument);
    h.noise_variance = 1.0 / db_to_linear(5.0);
    CHECK_NOTHROW(relay_gain_sq(h));
}

TEST_CASE("doppler_sum_sq") {
    // The five-hop relay scenario: static source, four relays at f_m, static
    // destination. Per-hop f^2 = {1, 2, 2, 2, 1} f_m^2, so the sum is 8 f_m^2.
    const double fm = 2.5;
    const auto dops = station_dopplers({0.0, fm, fm, fm, fm, 0.0});
    REQUIRE(dops.size() == 5);
    std::vector<hop_spec> hops;
    for (const auto& d : dops) hops.push_back(make_hop(1.0, d, unit_gain{}));
    const auto params = cascade_to_product(hops);
    CHECK(doppler_sum_sq(params) == Catch::Approx(8.0 * fm * fm).epsilon(1e-14));

    // N = 1.
    const auto single = cascade_to_product(
        {make_hop(1.0, doppler_spec::fixed_to_mobile(fm), unit_gain{})});
    CHECK(doppler_sum_sq(single) == Catch::Approx(fm * fm).epsilon(1e-15));
}

TEST_CASE("permutation leaves total_phi and doppler_sum_sq unchanged") {
    std::mt19937_64 eng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> om, fs;
        const int n = 2 + static_cast<int>(eng() % 5);
        for (int i = 0; i < n; ++i) {
            om.push_back(0.25 + 2.0 * uniform_unit(eng));
            fs.push_back(uniform_unit(eng));
        }
        const product_params a(om, fs);
        // One random permutation applied to both arrays in lockstep.
        std::vector<std::size_t> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), eng);
        std::vector<double> om2(n), fs2(n);
        for (int i = 0; i < n; ++i) {
            om2[i] = om[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        const product_params b(om2, fs2);
        CHECK(a.total_phi() == Catch::Approx(b.total_phi()).epsilon(1e-13));
        CHECK(doppler_sum_sq(a) == Catch::Approx(doppler_sum_sq(b)).epsilon(1e-13));
    }
}

TEST_CASE("product_params validation") {
    CHECK_THROWS_AS(product_params({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(product_params({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(product_params({0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(product_params({1.0}, {-1.0}), std::invalid_argument);
    const product_params p({4.0}, {2.0});
    CHECK(p.sigma_dot(0) == Catch::Approx(std::numbers::pi * 2.0 * 2.0).epsilon(1e-15));
}

TEST_CASE("station_dopplers expands mixed chains") {
    const auto dops = station_dopplers({0.0, 1.0, 1.0, 0.0});
    REQUIRE(dops.size() == 3);
    CHECK(dops[0].kind == doppler_kind::fixed_to_mobile);
    CHECK(dops[1].kind == doppler_kind::mobile_to_mobile);
    CHECK(dops[2].kind == doppler_kind::fixed_to_mobile);
    CHECK_THROWS_AS(station_dopplers({1.0}), std::invalid_argument);
    CHECK_THROWS_AS(station_dopplers({1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("hop_spec validation") {
    CHECK_THROWS_AS(make_hop(0.0, doppler_spec::fixed_to_mobile(1.0), unit_gain{}).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_hop(1.0, doppler_spec::fixed_to_mobile(1.0), unit_gain{}, 0.0).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(cascade_to_product({}), std::invalid_argument);
}
