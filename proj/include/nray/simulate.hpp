#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nray/model.hpp"
#include "nray/rng.hpp"

namespace nray {

/// Sampling parameters for path generation. Zero sample_rate/duration mean
/// "derive from the system's maximum Doppler": 64 x f_dmax and 2000/f_dmax.
struct sim_config {
    double sample_rate_hz = 0.0;
    double duration_s = 0.0;
    int num_sinusoids = 32;  // per quadrature component (single ring)
    std::uint64_t seed = 1;
};

/// Fills defaulted fields from the system Doppler extremes and enforces the
/// sampling invariants.
inline sim_config resolve_sim_config(sim_config cfg, double fdmax_max, double fdmax_min_pos) {
    if (!(fdmax_max > 0.0))
        throw std::invalid_argument("sim_config: system has no moving station");
    if (cfg.sample_rate_hz == 0.0) cfg.sample_rate_hz = 64.0 * fdmax_max;
    if (cfg.duration_s == 0.0) cfg.duration_s = 2000.0 / fdmax_max;
    if (cfg.sample_rate_hz < 16.0 * fdmax_max)
        throw std::invalid_argument("sim_config: sample rate must be >= 16 x largest f_dmax");
    if (cfg.duration_s * fdmax_min_pos < 100.0)
        throw std::invalid_argument(
            "sim_config: duration x smallest positive f_dmax must be >= 100 fading cycles");
    if (cfg.num_sinusoids < 8)
        throw std::invalid_argument("sim_config: need >= 8 sinusoids");
    return cfg;
}

enum class channel_model { fixed_to_mobile, mobile_to_mobile, cascade };

/// Provenance of a generated path: which model, which seed, and (for
/// cascades) the derived per-hop sub-seeds and resolved branch parameters.
struct path_origin {
    channel_model kind = channel_model::fixed_to_mobile;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> sub_seeds;
    std::vector<double> branch_powers;
    std::vector<double> branch_dopplers;
};

/// A uniformly sampled envelope realization.
struct sample_path {
    double sample_rate_hz = 0.0;
    std::vector<double> samples;
    path_origin origin;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

namespace detail {

/// Accumulates sum_m a * cos(w_m t_k + phi_m) over uniformly sampled t_k
/// into acc, one sinusoid at a time, using a rotating-phasor recurrence that
/// is re-synchronized from exact trig every `resync` samples to keep
/// round-off from drifting over long paths.
inline void add_cosine_sum(std::vector<double>& acc, double amplitude,
                           const std::vector<double>& omega, const std::vector<double>& phase,
                           double sample_rate_hz) {
    const std::size_t n = acc.size();
    constexpr std::size_t resync = 4096;
    for (std::size_t m = 0; m < omega.size(); ++m) {
        const double dphi = omega[m] / sample_rate_hz;
        const double cd = std::cos(dphi), sd = std::sin(dphi);
        double cr = 0.0, ci = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k % resync == 0) {
                const double th = phase[m] + dphi * static_cast<double>(k);
                cr = std::cos(th);
                ci = std::sin(th);
            } else {
                const double nr = cr * cd - ci * sd;
                ci = cr * sd + ci * cd;
                cr = nr;
            }
            acc[k] += amplitude * cr;
        }
    }
}

/// Same recurrence for a complex exponential sum: acc += a * exp(i(w t + phi)).
inline void add_cis_sum(std::vector<double>& re, std::vector<double>& im, double amplitude,
                        const std::vector<double>& omega, const std::vector<double>& phase,
                        double sample_rate_hz) {
    const std::size_t n = re.size();
    constexpr std::size_t resync = 4096;
    for (std::size_t m = 0; m < omega.size(); ++m) {
        const double dphi = omega[m] / sample_rate_hz;
        const double cd = std::cos(dphi), sd = std::sin(dphi);
        double cr = 0.0, ci = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k % resync == 0) {
                const double th = phase[m] + dphi * static_cast<double>(k);
                cr = std::cos(th);
                ci = std::sin(th);
            } else {
                const double nr = cr * cd - ci * sd;
                ci = cr * sd + ci * cd;
                cr = nr;
            }
            re[k] += amplitude * cr;
            im[k] += amplitude * ci;
        }
    }
}

inline std::size_t sample_count(const sim_config& cfg) {
    const double n = std::round(cfg.sample_rate_hz * cfg.duration_s);
    if (!(n >= 2.0) || n > 5e9)
        throw std::invalid_argument("sim_config: unreasonable sample count");
    return static_cast<std::size_t>(n);
}

}  // namespace detail

/// Rayleigh envelope on a fixed-to-mobile hop (Jakes Doppler spectrum):
/// two independent quadrature sums of num_sinusoids sinusoids each, angles
/// stratified over the half circle with a random rotation (which spans the
/// full Doppler range through the cosine and keeps the per-component second
/// moment exact), i.i.d. uniform phases. Envelope scaled so E{X^2} = omega.
inline sample_path gen_fixed_to_mobile(double f_m, double omega, const sim_config& raw_cfg) {
    if (!(f_m > 0.0)) throw std::invalid_argument("gen_fixed_to_mobile: f_m must be > 0");
    if (!(omega > 0.0)) throw std::invalid_argument("gen_fixed_to_mobile: omega must be > 0");
    const sim_config cfg = resolve_sim_config(raw_cfg, f_m, f_m);
    const std::size_t n = detail::sample_count(cfg);
    const int m = cfg.num_sinusoids;

    std::mt19937_64 eng = make_engine(cfg.seed);
    std::array<std::vector<double>, 2> comp{std::vector<double>(n, 0.0),
                                            std::vector<double>(n, 0.0)};
    for (auto& c : comp) {
        const double rot = uniform_unit(eng);
        std::vector<double> w(m), ph(m);
        for (int j = 0; j < m; ++j) {
            const double alpha = std::numbers::pi * (j + rot) / m;
            w[j] = 2.0 * std::numbers::pi * f_m * std::cos(alpha);
        }
        for (int j = 0; j < m; ++j) ph[j] = uniform_range(eng, 0.0, 2.0 * std::numbers::pi);
        detail::add_cosine_sum(c, std::sqrt(2.0 / m), w, ph, cfg.sample_rate_hz);
    }

    sample_path path;
    path.sample_rate_hz = cfg.sample_rate_hz;
    path.samples.resize(n);
    const double scale = std::sqrt(0.5 * omega);
    for (std::size_t k = 0; k < n; ++k)
        path.samples[k] = scale * std::hypot(comp[0][k], comp[1][k]);
    path.origin = {channel_model::fixed_to_mobile, cfg.seed, {}, {omega}, {f_m}};
    return path;
}

/// Rayleigh envelope on a mobile-to-mobile hop (Akki-Haber Doppler
/// spectrum): a normalized complex double sum over transmit-ring and
/// receive-ring angle pairs, Doppler f' cos(a_p) + f'' cos(b_q), i.i.d.
/// phases per pair. Ring sizes are num_sinusoids/2 each (min 8). The
/// underlying derivative variance matches pi^2 omega (f'^2 + f''^2).
inline sample_path gen_mobile_to_mobile(double f_prime, double f_double_prime, double omega,
                                        const sim_config& raw_cfg) {
    if (!(f_prime > 0.0))
        throw std::invalid_argument("gen_mobile_to_mobile: f_prime must be > 0");
    if (f_double_prime < 0.0)
        throw std::invalid_argument("gen_mobile_to_mobile: f_double_prime must be >= 0");
    if (!(omega > 0.0)) throw std::invalid_argument("gen_mobile_to_mobile: omega must be > 0");
    if (f_double_prime == 0.0) {
        // One static end collapses the receive ring to a single angle; the
        // spectrum is exactly the single-ring (Jakes) one, and the double sum
        // would degenerate into coherent same-frequency rows.
        sample_path path = gen_fixed_to_mobile(f_prime, omega, raw_cfg);
        path.origin.kind = channel_model::mobile_to_mobile;
        return path;
    }
    const double fd = f_prime + f_double_prime;
    const sim_config cfg = resolve_sim_config(raw_cfg, fd, fd);
    const std::size_t n = detail::sample_count(cfg);
    const int ring = std::max(8, cfg.num_sinusoids / 2);

    std::mt19937_64 eng = make_engine(cfg.seed);
    const double rot_a = uniform_unit(eng);
    const double rot_b = uniform_unit(eng);
    std::vector<double> re(n, 0.0), im(n, 0.0);
    std::vector<double> w(ring), ph(ring);
    const double amp = 1.0 / std::sqrt(static_cast<double>(ring) * ring);
    for (int p = 0; p < ring; ++p) {
        const double wa =
            2.0 * std::numbers::pi * f_prime *
            std::cos(2.0 * std::numbers::pi * (p + rot_a) / ring);
        for (int q = 0; q < ring; ++q) {
            w[q] = wa + 2.0 * std::numbers::pi * f_double_prime *
                            std::cos(2.0 * std::numbers::pi * (q + rot_b) / ring);
            ph[q] = uniform_range(eng, 0.0, 2.0 * std::numbers::pi);
        }
        detail::add_cis_sum(re, im, amp, w, ph, cfg.sample_rate_hz);
    }

    sample_path path;
    path.sample_rate_hz = cfg.sample_rate_hz;
    path.samples.resize(n);
    const double scale = std::sqrt(omega);
    for (std::size_t k = 0; k < n; ++k)
        path.samples[k] = scale * std::hypot(re[k], im[k]);
    path.origin = {channel_model::mobile_to_mobile, cfg.seed, {}, {omega},
                   {std::hypot(f_prime, f_double_prime)}};
    return path;
}

/// Envelope of one hop of a chain, dispatched on the hop's Doppler kind,
/// generated at unit gain (mean power omega_hat).
inline sample_path gen_hop(const hop_spec& hop, const sim_config& cfg) {
    if (hop.doppler.kind == doppler_kind::fixed_to_mobile)
        return gen_fixed_to_mobile(hop.doppler.f_prime_hz, hop.mean_power_hat_omega, cfg);
    return gen_mobile_to_mobile(hop.doppler.f_prime_hz, hop.doppler.f_double_prime_hz,
                                hop.mean_power_hat_omega, cfg);
}

/// Sample-wise product of independently generated per-hop envelopes scaled
/// by the relay gains: the end-to-end fading amplitude of the chain.
/// Per-hop seeds derive from cfg.seed by hop index, so extending the chain
/// never perturbs earlier hops' streams.
inline sample_path gen_cascade(const std::vector<hop_spec>& hops, const sim_config& raw_cfg) {
    if (hops.empty()) throw std::invalid_argument("gen_cascade: need >= 1 hop");
    double fdmax = 0.0;
    double fdmin = 0.0;
    for (const hop_spec& h : hops) {
        h.validate();
        const double fd = h.doppler.max_hz();
        fdmax = std::max(fdmax, fd);
        if (fd > 0.0) fdmin = fdmin == 0.0 ? fd : std::min(fdmin, fd);
    }
    const sim_config cfg = resolve_sim_config(raw_cfg, fdmax, fdmin);
    const product_params mapped = cascade_to_product(hops);

    sample_path out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.assign(detail::sample_count(cfg), 1.0);
    out.origin.kind = channel_model::cascade;
    out.origin.seed = cfg.seed;

    for (std::size_t i = 0; i < hops.size(); ++i) {
        sim_config hop_cfg = cfg;
        hop_cfg.seed = derive_seed(cfg.seed, i);
        sample_path hop_path = gen_hop(hops[i], hop_cfg);
        // X_i = alpha_i * G_{i-1}: fold the upstream gain into the factor.
        const double gain = std::sqrt(mapped.omega(i) / hops[i].mean_power_hat_omega);
        for (std::size_t k = 0; k < out.samples.size(); ++k)
            out.samples[k] *= gain * hop_path.samples[k];
        out.origin.sub_seeds.push_back(hop_cfg.seed);
        out.origin.branch_powers.push_back(mapped.omega(i));
        out.origin.branch_dopplers.push_back(mapped.doppler(i));
    }
    return out;
}

// --- binary path cache -----------------------------------------------------
//
// 32-byte header: magic "NRAYPATH" | u16 version | 6 reserved zero bytes |
// f64 sample_rate | u64 length; then `length` little-endian f64 amplitudes.

inline constexpr char path_magic[8] = {'N', 'R', 'A', 'Y', 'P', 'A', 'T', 'H'};
inline constexpr std::uint16_t path_version = 1;

namespace detail {

template <typename T>
void put_le(char* dst, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    // Host is little-endian on every supported target; memcpy is the layout.
    std::memcpy(dst, bytes, sizeof(T));
}

template <typename T>
T get_le(const char* src) {
    T v;
    std::memcpy(&v, src, sizeof(T));
    return v;
}

}  // namespace detail

inline void write_path(const sample_path& path, std::ostream& os) {
    char header[32] = {};
    std::memcpy(header, path_magic, 8);
    detail::put_le<std::uint16_t>(header + 8, path_version);
    detail::put_le<double>(header + 16, path.sample_rate_hz);
    detail::put_le<std::uint64_t>(header + 24,
                                  static_cast<std::uint64_t>(path.samples.size()));
    os.write(header, sizeof(header));
    os.write(reinterpret_cast<const char*>(path.samples.data()),
             static_cast<std::streamsize>(path.samples.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_path: stream failure");
}

inline void write_path(const sample_path& path, const std::string& filename) {
    std::ofstream os(filename, std::ios::binary);
    if (!os) throw std::runtime_error("write_path: cannot open " + filename);
    write_path(path, os);
}

inline sample_path read_path(std::istream& is) {
    char header[32];
    is.read(header, sizeof(header));
    if (!is || std::memcmp(header, path_magic, 8) != 0)
        throw std::runtime_error("read_path: not a NRAYPATH file");
    if (detail::get_le<std::uint16_t>(header + 8) != path_version)
        throw std::runtime_error("read_path: unsupported version");
    sample_path path;
    path.sample_rate_hz = detail::get_le<double>(header + 16);
    const std::uint64_t len = detail::get_le<std::uint64_t>(header + 24);
    path.samples.resize(len);
    is.read(reinterpret_cast<char*>(path.samples.data()),
            static_cast<std::streamsize>(len * sizeof(double)));
    if (!is) throw std::runtime_error("read_path: truncated file");
    return path;
}

inline sample_path read_path(const std::string& filename) {
    std::ifstream is(filename, std::ios::binary);
    if (!is) throw std::runtime_error("read_path: cannot open " + filename);
    return read_path(is);
}

}  // namespace nray
