#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "nray/specfun.hpp"

namespace nray {

enum class doppler_kind { fixed_to_mobile, mobile_to_mobile };

/// Per-hop mobility description. For a fixed-to-mobile hop exactly one end
/// moves and its maximum Doppler shift lives in f_prime_hz; a
/// mobile-to-mobile hop carries the transmit-side and receive-side shifts
/// separately.
struct doppler_spec {
    doppler_kind kind = doppler_kind::fixed_to_mobile;
    double f_prime_hz = 0.0;
    double f_double_prime_hz = 0.0;

    static doppler_spec fixed_to_mobile(double f_hz) {
        doppler_spec d{doppler_kind::fixed_to_mobile, f_hz, 0.0};
        d.validate();
        return d;
    }

    static doppler_spec mobile_to_mobile(double f_prime_hz, double f_double_prime_hz) {
        doppler_spec d{doppler_kind::mobile_to_mobile, f_prime_hz, f_double_prime_hz};
        d.validate();
        return d;
    }

    void validate() const {
        if (f_prime_hz < 0.0 || f_double_prime_hz < 0.0)
            throw std::invalid_argument("doppler_spec: shifts must be nonnegative");
        if (kind == doppler_kind::fixed_to_mobile) {
            if (f_double_prime_hz != 0.0)
                throw std::invalid_argument(
                    "doppler_spec: fixed-to-mobile hop must have f_double_prime = 0");
            if (!(f_prime_hz > 0.0))
                throw std::invalid_argument(
                    "doppler_spec: fixed-to-mobile hop requires f_prime > 0");
        }
    }

    /// Effective Doppler of the envelope process: f' for fixed-to-mobile,
    /// sqrt(f'^2 + f''^2) for mobile-to-mobile.
    double effective_hz() const {
        if (kind == doppler_kind::fixed_to_mobile) return f_prime_hz;
        return std::hypot(f_prime_hz, f_double_prime_hz);
    }

    /// Maximum Doppler shift: f' for fixed-to-mobile, f' + f'' for
    /// mobile-to-mobile. Governs sampling requirements.
    double max_hz() const {
        if (kind == doppler_kind::fixed_to_mobile) return f_prime_hz;
        return f_prime_hz + f_double_prime_hz;
    }
};

inline double effective_doppler(const doppler_spec& d) { return d.effective_hz(); }
inline double max_doppler(const doppler_spec& d) { return d.max_hz(); }

/// Variance of the envelope time derivative: pi^2 * omega * f^2.
inline double deriv_variance(double omega, double f_hz) {
    if (!(omega > 0.0)) throw std::invalid_argument("deriv_variance: omega must be > 0");
    if (f_hz < 0.0) throw std::invalid_argument("deriv_variance: f must be >= 0");
    const double pi = std::numbers::pi;
    return pi * pi * omega * f_hz * f_hz;
}

/// Relay gain modes. unit_gain passes the signal through unscaled; a
/// fixed_gain relay uses G^2 = 1/(C * W0); a semi_blind relay matches the
/// mean power consumption of a CSI-assisted relay at the given mean SNR.
struct unit_gain {};
struct fixed_gain {
    double c = 1.0;
};
struct semi_blind {
    double mean_snr_db = 0.0;
};
using gain_mode = std::variant<unit_gain, fixed_gain, semi_blind>;

/// One hop of the relay chain. The gain mode describes the relay at this
/// hop's output; it is consumed by the *next* hop's power mapping and is
/// ignored for the final hop (the destination does not re-amplify).
struct hop_spec {
    double mean_power_hat_omega = 1.0;  // E{alpha^2} of the hop fading
    double noise_variance = 1.0;        // AWGN power at the relay output
    doppler_spec doppler;
    gain_mode gain = unit_gain{};

    void validate() const {
        if (!(mean_power_hat_omega > 0.0))
            throw std::invalid_argument("hop_spec: mean power must be > 0");
        if (!(noise_variance > 0.0))
            throw std::invalid_argument("hop_spec: noise variance must be > 0");
        doppler.validate();
    }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Squared semi-blind relay gain: (1/omega_hat) e^{1/snr} Gamma(0, 1/snr).
/// mean_snr is linear.
inline double semi_blind_gain_sq(double mean_snr, double hat_omega) {
    if (!(mean_snr > 0.0))
        throw std::domain_error("semi_blind_gain_sq: mean SNR must be > 0");
    if (!(hat_omega > 0.0))
        throw std::domain_error("semi_blind_gain_sq: omega_hat must be > 0");
    const double x = 1.0 / mean_snr;
    return std::exp(x) * specfun::gamma_upper_zero(x) / hat_omega;
}

/// Squared fixed relay gain: G^2 = 1/(C * W0).
inline double fixed_gain_sq(double c, double noise_variance) {
    if (!(c > 0.0)) throw std::domain_error("fixed_gain_sq: C must be > 0");
    if (!(noise_variance > 0.0))
        throw std::domain_error("fixed_gain_sq: noise variance must be > 0");
    return 1.0 / (c * noise_variance);
}

/// Squared gain of the relay at this hop's output, resolved from its mode.
/// A semi-blind mode must be consistent with the hop's own mean SNR
/// omega_hat / W0 (the configured dB value is authoritative and checked).
inline double relay_gain_sq(const hop_spec& hop) {
    hop.validate();
    return std::visit(
        [&](const auto& mode) -> double {
            using T = std::decay_t<decltype(mode)>;
            if constexpr (std::is_same_v<T, unit_gain>) {
                return 1.0;
            } else if constexpr (std::is_same_v<T, fixed_gain>) {
                return fixed_gain_sq(mode.c, hop.noise_variance);
            } else {
                const double snr = db_to_linear(mode.mean_snr_db);
                const double snr_hop = hop.mean_power_hat_omega / hop.noise_variance;
                if (std::abs(snr_hop - snr) > 1e-6 * snr)
                    throw std::invalid_argument(
                        "relay_gain_sq: semi-blind SNR " + std::to_string(mode.mean_snr_db) +
                        " dB inconsistent with hop omega_hat/W0");
                return semi_blind_gain_sq(snr, hop.mean_power_hat_omega);
            }
        },
        hop.gain);
}

/// The product-of-Rayleigh parameterization {Omega_i, f_i}: per-branch mean
/// powers and effective Doppler frequencies after relay-gain mapping.
class product_params {
  public:
    product_params(std::vector<double> branch_powers, std::vector<double> branch_dopplers)
        : powers_(std::move(branch_powers)), dopplers_(std::move(branch_dopplers)) {
        if (powers_.empty() || powers_.size() != dopplers_.size())
            throw std::invalid_argument("product_params: need N >= 1 matching branches");
        for (double w : powers_)
            if (!(w > 0.0))
                throw std::invalid_argument("product_params: branch powers must be > 0");
        for (double f : dopplers_)
            if (f < 0.0)
                throw std::invalid_argument("product_params: branch Dopplers must be >= 0");
    }

    std::size_t size() const { return powers_.size(); }
    double omega(std::size_t i) const { return powers_[i]; }
    double doppler(std::size_t i) const { return dopplers_[i]; }
    const std::vector<double>& omegas() const { return powers_; }
    const std::vector<double>& dopplers() const { return dopplers_; }

    /// Total power product Phi = prod_k Omega_k.
    double total_phi() const {
        double p = 1.0;
        for (double w : powers_) p *= w;
        return p;
    }

    /// log(Phi), numerically safe for long chains.
    double log_total_phi() const {
        double s = 0.0;
        for (double w : powers_) s += std::log(w);
        return s;
    }

    /// Standard deviation of the branch envelope derivative, pi * f * sqrt(Omega).
    double sigma_dot(std::size_t i) const {
        return std::numbers::pi * dopplers_[i] * std::sqrt(powers_[i]);
    }

  private:
    std::vector<double> powers_;
    std::vector<double> dopplers_;
};

inline double total_phi(const product_params& p) { return p.total_phi(); }

/// Sum of squared effective branch Dopplers.
inline double doppler_sum_sq(const product_params& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p.doppler(i) * p.doppler(i);
    return s;
}

/// Maps a relay chain onto the product parameterization:
/// Omega_1 = omega_hat_1 (source gain is 1), Omega_i = omega_hat_i * G_{i-1}^2,
/// f_i = effective Doppler of hop i.
inline product_params cascade_to_product(const std::vector<hop_spec>& hops) {
    if (hops.empty()) throw std::invalid_argument("cascade_to_product: need >= 1 hop");
    std::vector<double> powers, dopplers;
    powers.reserve(hops.size());
    dopplers.reserve(hops.size());
    double gain_sq_prev = 1.0;  // G0 = 1 at the source
    for (const hop_spec& hop : hops) {
        hop.validate();
        powers.push_back(hop.mean_power_hat_omega * gain_sq_prev);
        dopplers.push_back(hop.doppler.effective_hz());
        gain_sq_prev = relay_gain_sq(hop);
    }
    return product_params(std::move(powers), std::move(dopplers));
}

/// Station-centric convenience: given the maximum Doppler shift of each
/// station along the chain (source, relays..., destination; N+1 entries),
/// builds the per-hop Doppler specs with f_i^2 = f_{m(i-1)}^2 + f_{mi}^2.
inline std::vector<doppler_spec> station_dopplers(const std::vector<double>& station_shifts_hz) {
    if (station_shifts_hz.size() < 2)
        throw std::invalid_argument("station_dopplers: need >= 2 stations");
    std::vector<doppler_spec> hops;
    hops.reserve(station_shifts_hz.size() - 1);
    for (std::size_t i = 0; i + 1 < station_shifts_hz.size(); ++i) {
        const double ft = station_shifts_hz[i];
        const double fr = station_shifts_hz[i + 1];
        if (ft < 0.0 || fr < 0.0)
            throw std::invalid_argument("station_dopplers: shifts must be nonnegative");
        if (ft > 0.0 && fr > 0.0)
            hops.push_back(doppler_spec::mobile_to_mobile(ft, fr));
        else if (ft > 0.0 || fr > 0.0)
            hops.push_back(doppler_spec::fixed_to_mobile(ft > 0.0 ? ft : fr));
        else
            hops.push_back(doppler_spec{doppler_kind::mobile_to_mobile, 0.0, 0.0});
    }
    return hops;
}

}  // namespace nray
