#pragma once

// Device-level models: the voltage-thresholded memristor state equation
// (deterministic mean-field form and its N-switch stochastic counterpart)
// and the piecewise-linear pulse voltage source.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qfpsim/errors.hpp"

namespace qfpsim {

// ---------------------------------------------------------------------------
// Pulse source
// ---------------------------------------------------------------------------

/// SPICE-style PULSE(v1 v2 td tr tf pw per) description. The waveform sits at
/// v1 until td, ramps to v2 over tr, holds for pw, ramps back over tf, stays
/// at v1 until the period ends, then repeats.
struct PulseParams {
    double v1 = 0.0;   ///< base level [V]
    double v2 = 0.0;   ///< pulse level [V]
    double td = 0.0;   ///< initial delay [s]
    double tr = 0.0;   ///< rise time [s], > 0
    double tf = 0.0;   ///< fall time [s], > 0
    double pw = 0.0;   ///< plateau width [s], > 0
    double per = 0.0;  ///< period [s], >= tr + pw + tf
};

/// Throws InvalidParamError unless the pulse timing fields are consistent.
inline void validate(const PulseParams& p) {
    if (!(p.td >= 0.0)) throw InvalidParamError("pulse: td must be >= 0");
    if (!(p.tr > 0.0)) throw InvalidParamError("pulse: tr must be > 0");
    if (!(p.tf > 0.0)) throw InvalidParamError("pulse: tf must be > 0");
    if (!(p.pw > 0.0)) throw InvalidParamError("pulse: pw must be > 0");
    if (!(p.per >= p.tr + p.pw + p.tf))
        throw InvalidParamError("pulse: per must be >= tr + pw + tf");
}

/// Pulse level at time t (t < 0 is treated as the pre-delay base level).
[[nodiscard]] inline double pulse_value(const PulseParams& p, double t) {
    if (t < p.td) return p.v1;
    const double tau = std::fmod(t - p.td, p.per);
    if (tau < p.tr) return p.v1 + (p.v2 - p.v1) * (tau / p.tr);
    if (tau < p.tr + p.pw) return p.v2;
    if (tau < p.tr + p.pw + p.tf)
        return p.v2 + (p.v1 - p.v2) * ((tau - p.tr - p.pw) / p.tf);
    return p.v1;
}

/// All slope-discontinuity instants (pulse corners of every period) within
/// [0, tstop], sorted ascending, deduplicated.
[[nodiscard]] inline std::vector<double> breakpoints(const PulseParams& p, double tstop) {
    validate(p);
    std::vector<double> out;
    const double corner[4] = {0.0, p.tr, p.tr + p.pw, p.tr + p.pw + p.tf};
    for (int k = 0;; ++k) {
        const double base = p.td + k * p.per;
        if (base > tstop) break;
        for (double c : corner) {
            const double t = base + c;
            if (t <= tstop) out.push_back(t);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Memristor model
// ---------------------------------------------------------------------------

enum class MemristorMode { deterministic, stochastic };

/// Parameters of the two-state-population memristor. The state x in [0,1] is
/// the fraction of internal switches in the low-resistance state.
struct MemristorParams {
    double r_on = 323.4;       ///< fully-on resistance [ohm]
    double r_off = 2924.655;   ///< fully-off resistance [ohm]
    double v_on = 0.15;        ///< set threshold [V]
    double v_off = 0.15;       ///< reset threshold [V] (applied as -v_off)
    double tau_c = 100e-9;     ///< characteristic switching time [s]
    double v_t = 0.02;         ///< threshold sharpness [V]
    int n_switches = 1000;     ///< population size N for stochastic mode
    MemristorMode mode = MemristorMode::deterministic;
    std::uint64_t seed = 0;    ///< per-device seed salt (stochastic mode)

    /// Parameter set for the commercial discrete part used in bring-up tests.
    [[nodiscard]] static MemristorParams knowm() {
        MemristorParams mp;
        mp.r_on = 500.0;
        mp.r_off = 1500.0;
        return mp;
    }
};

inline void validate(const MemristorParams& mp) {
    if (!(mp.r_on > 0.0) || !(mp.r_off > 0.0))
        throw InvalidParamError("memristor: resistances must be positive");
    if (!(mp.r_on < mp.r_off))
        throw InvalidParamError("memristor: r_on must be < r_off");
    if (!(mp.v_on > 0.0) || !(mp.v_off > 0.0))
        throw InvalidParamError("memristor: thresholds must be positive");
    if (!(mp.tau_c > 0.0)) throw InvalidParamError("memristor: tau_c must be positive");
    if (!(mp.v_t > 0.0)) throw InvalidParamError("memristor: v_t must be positive");
    if (mp.n_switches < 1) throw InvalidParamError("memristor: n_switches must be >= 1");
}

/// Conductance of the parallel switch population:
/// G(x) = x/r_on + (1-x)/r_off. Monotone increasing in x.
[[nodiscard]] inline double memristor_conductance(const MemristorParams& mp, double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("memristor: x must lie in [0,1]");
    return x / mp.r_on + (1.0 - x) / mp.r_off;
}

/// Logistic sigmoid; saturates exactly to 0/1 in double precision for |z|>~40.
[[nodiscard]] inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ---------------------------------------------------------------------------
// Counter-based RNG (stochastic mode)
// ---------------------------------------------------------------------------

namespace detail {

/// splitmix64 finalizer: a stateless, invertible 64-bit mix.
[[nodiscard]] inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

[[nodiscard]] inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

/// Counter-based uniform generator. The stream is a pure function of
/// (run seed, device seed, device name, draw counter), so simulations are
/// reproducible regardless of evaluation order elsewhere.
class DeviceRng {
public:
    DeviceRng() = default;

    DeviceRng(std::uint64_t run_seed, std::uint64_t device_seed, std::string_view device_name)
        : key_(detail::mix64(run_seed ^ detail::mix64(device_seed ^ detail::fnv1a64(device_name)))) {}

    /// Uniform double in [0, 1).
    [[nodiscard]] double next_u01() {
        const std::uint64_t r = detail::mix64(key_ ^ counter_++);
        return static_cast<double>(r >> 11) * 0x1.0p-53;
    }

    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

namespace detail {

/// Exact binomial sampling by CDF inversion of a single uniform draw.
/// Walks outward from the mode so the expected work is O(sqrt(n p (1-p)));
/// the pmf at the mode is seeded in log space to survive large n.
[[nodiscard]] inline std::int64_t binomial_draw(std::int64_t n, double p, double u) {
    if (n <= 0) return 0;
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (p > 0.5) return n - binomial_draw(n, 1.0 - p, u);

    const double np = static_cast<double>(n) * p;
    if (np < 32.0) {
        // Plain inversion from k = 0 using the pmf recurrence.
        const double q = 1.0 - p;
        double pmf = std::pow(q, static_cast<double>(n));
        double cdf = pmf;
        std::int64_t k = 0;
        const double ratio = p / q;
        while (u > cdf && k < n) {
            ++k;
            pmf *= ratio * static_cast<double>(n - k + 1) / static_cast<double>(k);
            cdf += pmf;
        }
        return k;
    }

    // Mode-centred inversion with a fixed outward enumeration order
    // (m, m+1, m-1, m+2, ...). Any fixed order is a valid inverse-CDF map.
    const std::int64_t m = static_cast<std::int64_t>(np);
    auto log_pmf = [&](std::int64_t k) {
        const double kd = static_cast<double>(k), nd = static_cast<double>(n);
        return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
               kd * std::log(p) + (nd - kd) * std::log1p(-p);
    };
    double pmf_up = std::exp(log_pmf(m));
    double pmf_dn = pmf_up;
    double cdf = pmf_up;
    std::int64_t up = m, dn = m;
    if (u <= cdf) return m;
    const double pq = p / (1.0 - p);
    while (up < n || dn > 0) {
        if (up < n) {
            ++up;
            pmf_up *= pq * static_cast<double>(n - up + 1) / static_cast<double>(up);
            cdf += pmf_up;
            if (u <= cdf) return up;
        }
        if (dn > 0) {
            pmf_dn *= static_cast<double>(dn) / (pq * static_cast<double>(n - dn + 1));
            --dn;
            cdf += pmf_dn;
            if (u <= cdf) return dn;
        }
    }
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// State update
// ---------------------------------------------------------------------------

/// One explicit state step of the switch population under bias v for dt.
///
/// Deterministic:  x' = x + (1-x) P_set - x P_reset, clamped to [0,1], with
///   P_set   = clamp(dt/tau_c * sigmoid(( v - v_on )/v_t), 0, 1)
///   P_reset = clamp(dt/tau_c * sigmoid((-v - v_off)/v_t), 0, 1)
///
/// Stochastic:     x' = x + (B_set - B_reset)/N, clamped to [0,1], with
///   B_set ~ Binomial(N(1-x), P_set), B_reset ~ Binomial(Nx, P_reset),
/// consuming exactly two uniforms from rng. x is kept on the k/N lattice.
[[nodiscard]] inline double state_update(const MemristorParams& mp, double x, double v,
                                         double dt, DeviceRng* rng = nullptr) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("state_update: x must lie in [0,1]");
    if (!(dt > 0.0)) throw DomainError("state_update: dt must be positive");

    const double rate = dt / mp.tau_c;
    const double p_set = std::clamp(rate * sigmoid((v - mp.v_on) / mp.v_t), 0.0, 1.0);
    const double p_reset = std::clamp(rate * sigmoid((-v - mp.v_off) / mp.v_t), 0.0, 1.0);

    double next;
    if (mp.mode == MemristorMode::stochastic) {
        if (rng == nullptr) throw DomainError("state_update: stochastic mode needs an rng");
        const auto n = static_cast<std::int64_t>(mp.n_switches);
        // x is maintained on the k/N lattice, so these counts are integral.
        const auto k_on = static_cast<std::int64_t>(std::llround(x * static_cast<double>(n)));
        const std::int64_t b_set = detail::binomial_draw(n - k_on, p_set, rng->next_u01());
        const std::int64_t b_reset = detail::binomial_draw(k_on, p_reset, rng->next_u01());
        next = static_cast<double>(k_on + b_set - b_reset) / static_cast<double>(n);
    } else {
        next = x + ((1.0 - x) * p_set - x * p_reset);
    }
    return std::clamp(next, 0.0, 1.0);
}

} // namespace qfpsim
