#pragma once

// Analysis layer: packaged-vs-ideal current error (delta_current), windowed
// time-weighted error statistics, corner derivation from measured resistance
// aggregates, the frequency x corner sweep harness, and the measurement
// statistics / histogram pipeline.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qfpsim/devices.hpp"
#include "qfpsim/engine.hpp"
#include "qfpsim/errors.hpp"
#include "qfpsim/netlist.hpp"

namespace qfpsim {

// ---------------------------------------------------------------------------
// Current error signal
// ---------------------------------------------------------------------------

/// delta_i(t) = signal(packaged) - signal(ideal) evaluated on the union of
/// both time grids, interpolating whichever trace lacks a sample. Both
/// waveforms must cover the same time span.
[[nodiscard]] inline Waveform delta_current(const Waveform& packaged, const Waveform& ideal,
                                            const std::string& signal) {
    if (packaged.t.size() < 2 || ideal.t.size() < 2)
        throw SpanTooShortError("delta_current: need at least two samples per waveform");
    const double span_a = packaged.t.back() - packaged.t.front();
    const double span_b = ideal.t.back() - ideal.t.front();
    const double tol = 1e-9 * std::max(span_a, span_b);
    if (std::abs(packaged.t.front() - ideal.t.front()) > tol ||
        std::abs(packaged.t.back() - ideal.t.back()) > tol)
        throw SpanMismatchError("delta_current: waveforms cover different time spans");

    const auto ka = packaged.index(signal);
    const auto kb = ideal.index(signal);
    if (!ka) throw MissingSignalError("signal '" + signal + "' not present in first waveform");
    if (!kb) throw MissingSignalError("signal '" + signal + "' not present in second waveform");

    std::vector<double> grid;
    grid.reserve(packaged.t.size() + ideal.t.size());
    std::merge(packaged.t.begin(), packaged.t.end(), ideal.t.begin(), ideal.t.end(),
               std::back_inserter(grid));
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    Waveform out;
    out.names = {"delta_i"};
    out.cols.resize(1);
    out.t.reserve(grid.size());
    out.cols[0].reserve(grid.size());
    for (double tq : grid) {
        out.t.push_back(tq);
        out.cols[0].push_back(packaged.interp(*ka, tq) - ideal.interp(*kb, tq));
    }
    return out;
}

/// Side-by-side comparison trace: input voltage, both currents, and their
/// difference on the union grid.
[[nodiscard]] inline Waveform compare_table(const Waveform& packaged, const Waveform& ideal,
                                            const std::string& v_signal,
                                            const std::string& i_signal) {
    const Waveform di = delta_current(packaged, ideal, i_signal);
    const auto kv = packaged.index(v_signal);
    if (!kv) throw MissingSignalError("signal '" + v_signal + "' not present in first waveform");
    const auto ka = *packaged.index(i_signal);
    const auto kb = *ideal.index(i_signal);

    Waveform out;
    out.t = di.t;
    out.names = {"v_in", "i_packaged", "i_ideal", "delta_i"};
    out.cols.resize(4);
    for (double tq : out.t) {
        out.cols[0].push_back(packaged.interp(*kv, tq));
        out.cols[1].push_back(packaged.interp(ka, tq));
        out.cols[2].push_back(ideal.interp(kb, tq));
    }
    out.cols[3] = di.cols[0];
    return out;
}

// ---------------------------------------------------------------------------
// Windowed error statistics
// ---------------------------------------------------------------------------

/// Time-weighted moments of |signal| over the first n_cycles periods.
struct ErrorStats {
    double mean_abs = 0.0;
    double std_dev = 0.0;
    double max_abs = 0.0;
    double signed_mean = 0.0;
};

/// Trapezoid-rule moments of the first column of `di` over
/// [t0, t0 + n_cycles*period]; grid-independent by construction.
[[nodiscard]] inline ErrorStats average_error(const Waveform& di, double period,
                                              int n_cycles = 5) {
    if (!(period > 0.0)) throw InvalidParamError("average_error: period must be positive");
    if (n_cycles < 1) throw InvalidParamError("average_error: n_cycles must be >= 1");
    if (di.t.size() < 2 || di.cols.empty())
        throw SpanTooShortError("average_error: waveform has fewer than two samples");

    const double t0 = di.t.front();
    const double t_end = t0 + n_cycles * period;
    if (di.t.back() < t_end * (1.0 - 1e-9) - 1e-300)
        throw SpanTooShortError("average_error: waveform shorter than the requested window");

    const auto& y = di.cols[0];
    ErrorStats st;
    double int_abs = 0.0, int_sq = 0.0, int_signed = 0.0;
    double prev_t = t0, prev_y = y.front();
    st.max_abs = std::abs(prev_y);

    for (std::size_t k = 1; k < di.t.size(); ++k) {
        double tk = di.t[k];
        double yk = y[k];
        const bool last = tk >= t_end;
        if (last && tk > t_end) {
            const double w = (t_end - di.t[k - 1]) / (tk - di.t[k - 1]);
            yk = y[k - 1] + w * (yk - y[k - 1]);
            tk = t_end;
        }
        const double dt = tk - prev_t;
        int_abs += 0.5 * dt * (std::abs(prev_y) + std::abs(yk));
        int_sq += 0.5 * dt * (prev_y * prev_y + yk * yk);
        int_signed += 0.5 * dt * (prev_y + yk);
        st.max_abs = std::max(st.max_abs, std::abs(yk));
        prev_t = tk;
        prev_y = yk;
        if (last) break;
    }

    const double span = prev_t - t0;
    st.mean_abs = int_abs / span;
    st.signed_mean = int_signed / span;
    st.std_dev = std::sqrt(std::max(int_sq / span - st.mean_abs * st.mean_abs, 0.0));
    return st;
}

// ---------------------------------------------------------------------------
// Measurement statistics
// ---------------------------------------------------------------------------

enum class MemState { on, off };

struct MeasurementRecord {
    int cycle = 0;
    MemState state = MemState::on;
    double resistance = 0.0;  ///< [ohm]
};

struct MeasurementSet {
    std::vector<MeasurementRecord> records;
};

struct StateStats {
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    std::size_t count = 0;
};

struct MeasurementStats {
    StateStats on;
    StateStats off;
};

/// Exact per-state mean/max/min. The mean is a plain left-to-right
/// accumulation over the records in set order divided by the count, so a
/// dataset constructed to hit given aggregates reproduces them bit-exactly.
[[nodiscard]] inline MeasurementStats compute_stats(const MeasurementSet& ms) {
    MeasurementStats out;
    double sum_on = 0.0, sum_off = 0.0;
    for (const auto& r : ms.records) {
        StateStats& st = r.state == MemState::on ? out.on : out.off;
        double& sum = r.state == MemState::on ? sum_on : sum_off;
        if (st.count == 0) {
            st.max = st.min = r.resistance;
        } else {
            st.max = std::max(st.max, r.resistance);
            st.min = std::min(st.min, r.resistance);
        }
        sum += r.resistance;
        ++st.count;
    }
    if (out.on.count == 0) throw EmptyStateError("no ON-state records in measurement set");
    if (out.off.count == 0) throw EmptyStateError("no OFF-state records in measurement set");
    out.on.mean = sum_on / static_cast<double>(out.on.count);
    out.off.mean = sum_off / static_cast<double>(out.off.count);
    return out;
}

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

/// Equal-width histogram over [min, max] of the selected state's records.
/// The maximum value lands in the last bin; a degenerate (single-valued)
/// range puts all mass in bin 0.
[[nodiscard]] inline std::vector<HistogramBin> histogram(const MeasurementSet& ms,
                                                         MemState state, int n_bins) {
    if (n_bins < 1) throw InvalidParamError("histogram: n_bins must be >= 1");
    std::vector<double> vals;
    for (const auto& r : ms.records)
        if (r.state == state) vals.push_back(r.resistance);
    if (vals.empty()) throw EmptyStateError("histogram: no records for the requested state");

    const auto [mn_it, mx_it] = std::minmax_element(vals.begin(), vals.end());
    const double mn = *mn_it, mx = *mx_it;
    const double span = mx - mn;

    std::vector<HistogramBin> bins(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        bins[static_cast<std::size_t>(k)].lo = mn + span * k / n_bins;
        bins[static_cast<std::size_t>(k)].hi = mn + span * (k + 1) / n_bins;
    }
    bins.back().hi = mx;
    for (double v : vals) {
        int idx = span > 0.0 ? static_cast<int>((v - mn) / span * n_bins) : 0;
        idx = std::clamp(idx, 0, n_bins - 1);
        ++bins[static_cast<std::size_t>(idx)].count;
    }
    return bins;
}

// ---------------------------------------------------------------------------
// Corners
// ---------------------------------------------------------------------------

struct Corner {
    std::string label;
    double r_on = 0.0;   ///< [ohm]
    double r_off = 0.0;  ///< [ohm]
};

using CornerSet = std::vector<Corner>;

/// The five {r_on, r_off} variability corners derived from per-state
/// aggregates: (1) mean/mean, (2) mean/max, (3) mean/min, (4) max/mean,
/// (5) min/mean.
[[nodiscard]] inline CornerSet corners_from_stats(const MeasurementStats& stats) {
    CornerSet cs = {
        {"c1", stats.on.mean, stats.off.mean}, {"c2", stats.on.mean, stats.off.max},
        {"c3", stats.on.mean, stats.off.min},  {"c4", stats.on.max, stats.off.mean},
        {"c5", stats.on.min, stats.off.mean},
    };
    for (const auto& c : cs)
        if (!(c.r_on < c.r_off))
            throw InvalidStatsError("corner " + c.label + ": r_on (" +
                                    detail::format_g17(c.r_on) + ") must be below r_off (" +
                                    detail::format_g17(c.r_off) + ")");
    return cs;
}

/// Built-in aggregates of the bundled measurement dataset, for running sweeps
/// without re-deriving corners from the CSV.
[[nodiscard]] inline MeasurementStats reference_stats() {
    MeasurementStats st;
    st.on = {323.4, 512.03, 305.34, 64};
    st.off = {2924.655, 7682.6, 1432.4, 64};
    return st;
}

[[nodiscard]] inline CornerSet default_corner_set() {
    return corners_from_stats(reference_stats());
}

// ---------------------------------------------------------------------------
// Synthetic measurement dataset
// ---------------------------------------------------------------------------

namespace detail {

/// 64 positive values whose running left-to-right sum equals 64*mean exactly
/// in double arithmetic, with the stated min and max attained. Layout:
/// [min, 61 pseudorandom interior draws, max, fixup], where the fixup value
/// is ulp-searched so the accumulated sum lands on the target bit pattern.
[[nodiscard]] inline std::vector<double> exact_state_values(double mean, double mx, double mn,
                                                            std::uint64_t salt) {
    if (!(mn > 0.0 && mn < mean && mean < mx))
        throw InvalidParamError("exact_state_values: need 0 < min < mean < max");
    const int n_interior = 61;
    const double target_sum = 64.0 * mean;  // exact: scaling by a power of two

    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> u(n_interior);
        double u_sum = 0.0;
        for (int i = 0; i < n_interior; ++i) {
            const std::uint64_t bits = mix64(salt ^ (attempt * 1000 + i + 1));
            u[static_cast<std::size_t>(i)] =
                static_cast<double>(bits >> 11) * 0x1.0p-53;
            u_sum += u[static_cast<std::size_t>(i)];
        }
        const double u_bar = u_sum / n_interior;
        const auto [u_mn, u_mx] = std::minmax_element(u.begin(), u.end());
        const double m_star = (target_sum - mn - mx) / 62.0;
        const double spread =
            0.9 * std::min((m_star - mn) / std::max(u_bar - *u_mn, 1e-12),
                           (mx - m_star) / std::max(*u_mx - u_bar, 1e-12));

        std::vector<double> vals;
        vals.reserve(64);
        vals.push_back(mn);
        for (double ui : u) vals.push_back(m_star + spread * (ui - u_bar));
        vals.push_back(mx);

        double partial = 0.0;
        for (double v : vals) partial += v;
        const double f0 = target_sum - partial;
        double f_up = f0, f_dn = f0;
        for (int step = 0; step < 4096; ++step) {
            double cand = f0;
            if (step > 0 && step % 2 == 1)
                cand = f_up = std::nextafter(f_up, std::numeric_limits<double>::infinity());
            else if (step > 0)
                cand = f_dn = std::nextafter(f_dn, -std::numeric_limits<double>::infinity());
            if (cand >= mn && cand <= mx && partial + cand == target_sum) {
                vals.push_back(cand);
                return vals;
            }
        }
        // Retry with fresh draws on the rare miss.
    }
    throw Error("exact_state_values: could not hit the target sum");
}

} // namespace detail

/// Deterministic synthetic dataset (64 records per state) whose per-state
/// mean/max/min reproduce the reference aggregates bit-exactly under
/// compute_stats. This is generated test data, not a measurement archive.
[[nodiscard]] inline MeasurementSet synthetic_measurements() {
    const MeasurementStats ref = reference_stats();
    MeasurementSet ms;
    const auto on_vals =
        detail::exact_state_values(ref.on.mean, ref.on.max, ref.on.min, 0x9e3779b97f4a7c15ULL);
    const auto off_vals =
        detail::exact_state_values(ref.off.mean, ref.off.max, ref.off.min, 0xd1b54a32d192ed03ULL);
    for (int i = 0; i < 64; ++i)
        ms.records.push_back({i, MemState::on, on_vals[static_cast<std::size_t>(i)]});
    for (int i = 0; i < 64; ++i)
        ms.records.push_back({i, MemState::off, off_vals[static_cast<std::size_t>(i)]});
    return ms;
}

// ---------------------------------------------------------------------------
// Frequency x corner sweep
// ---------------------------------------------------------------------------

/// Input pulse train for one sweep point: 0 -> amplitude plateau at 50% duty
/// with rise/fall edges of 1/1000 of the period.
[[nodiscard]] inline PulseParams make_input_pulse(double frequency, double amplitude) {
    if (!(frequency > 0.0)) throw InvalidParamError("pulse synthesis: frequency must be positive");
    const double per = 1.0 / frequency;
    PulseParams p;
    p.v1 = 0.0;
    p.v2 = amplitude;
    p.td = 0.0;
    p.tr = per / 1000.0;
    p.tf = per / 1000.0;
    p.pw = per / 2.0 - per / 1000.0;
    p.per = per;
    return p;
}

/// One row of the error-vs-frequency study.
struct ErrorSummary {
    double frequency = 0.0;  ///< [Hz]
    std::string corner;
    double amplitude = 0.0;  ///< [V], signed
    double mean_abs = 0.0;   ///< [A]
    double signed_mean = 0.0;
    double std_dev = 0.0;
    double max_abs = 0.0;
    int n_cycles = 0;
};

/// Runs the packaged and ideal cells for one (corner, frequency, amplitude)
/// point and reduces delta_i over the first n_cycles periods. Potentiation
/// runs (amplitude > 0) start from x0 = 0, depression runs from x0 = 1.
[[nodiscard]] inline ErrorSummary sweep_point(const Corner& corner, double frequency,
                                              double amplitude, const MemristorParams& mp_base,
                                              const PackageParams& pkg, const SolverConfig& cfg,
                                              int n_cycles = 5) {
    MemristorParams mp = mp_base;
    mp.r_on = corner.r_on;
    mp.r_off = corner.r_off;
    const double x0 = amplitude > 0.0 ? 0.0 : 1.0;
    const VPulse src{"V1", "in", std::string(kGround), make_input_pulse(frequency, amplitude)};
    const double period = src.pulse.per;
    const double tstop = n_cycles * period;

    const Circuit packaged = build_packaged_cell(mp, pkg, src, x0);
    const Circuit ideal = build_ideal_cell(mp, pkg.r1, pkg.r2, src, x0);
    // Both runs must integrate on the same step ladder - otherwise the two
    // memristor state trajectories accumulate discretization error out of
    // phase and delta_i no longer isolates the package contribution.  The
    // packaged cell has the tighter floor, so resolve it once and share it.
    SolverConfig run_cfg = cfg;
    run_cfg.dt_min = resolved_dt_min(packaged, cfg, tstop);
    const Waveform wp = transient(packaged, run_cfg, tstop);
    const Waveform wi = transient(ideal, run_cfg, tstop);
    const Waveform di = delta_current(wp, wi, "i(M1)");
    const ErrorStats st = average_error(di, period, n_cycles);

    ErrorSummary out;
    out.frequency = frequency;
    out.corner = corner.label;
    out.amplitude = amplitude;
    out.mean_abs = st.mean_abs;
    out.signed_mean = st.signed_mean;
    out.std_dev = st.std_dev;
    out.max_abs = st.max_abs;
    out.n_cycles = n_cycles;
    return out;
}

/// Full corner x frequency grid at one amplitude. Tasks fan out over
/// `workers` threads; results are keyed by grid position, so the output
/// order (corners outer, frequencies inner) and content are independent of
/// scheduling. Solver failures are rethrown as SweepError annotated with the
/// failing grid point.
[[nodiscard]] inline std::vector<ErrorSummary> corner_sweep(
    const CornerSet& corners, const std::vector<double>& freqs, double amplitude,
    const MemristorParams& mp_base, const PackageParams& pkg, const SolverConfig& cfg,
    int n_cycles = 5, unsigned workers = 0) {
    if (corners.empty()) throw InvalidParamError("corner_sweep: corner set is empty");
    if (freqs.empty()) throw InvalidParamError("corner_sweep: frequency list is empty");
    for (double f : freqs)
        if (!(f > 0.0)) throw InvalidParamError("corner_sweep: frequencies must be positive");
    if (amplitude == 0.0) throw InvalidParamError("corner_sweep: amplitude must be nonzero");
    if (n_cycles < 1) throw InvalidParamError("corner_sweep: n_cycles must be >= 1");
    validate(cfg);

    struct Task {
        std::size_t corner_idx;
        std::size_t freq_idx;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < corners.size(); ++c)
        for (std::size_t f = 0; f < freqs.size(); ++f) tasks.push_back({c, f});

    std::vector<ErrorSummary> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto run_task = [&](std::size_t idx) {
        const Task& tk = tasks[idx];
        try {
            results[idx] = sweep_point(corners[tk.corner_idx], freqs[tk.freq_idx], amplitude,
                                       mp_base, pkg, cfg, n_cycles);
        } catch (const std::exception& e) {
            errors[idx] = std::make_exception_ptr(
                SweepError("sweep point (corner " + corners[tk.corner_idx].label + ", " +
                           detail::format_g17(freqs[tk.freq_idx]) + " Hz, " +
                           detail::format_g17(amplitude) + " V): " + e.what()));
        }
    };

    unsigned n_workers = workers != 0 ? workers : std::thread::hardware_concurrency();
    n_workers = std::max(1u, std::min<unsigned>(n_workers, static_cast<unsigned>(tasks.size())));
    if (n_workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
                    run_task(i);
            });
        for (auto& th : pool) th.join();
    }

    for (const auto& ep : errors)
        if (ep) std::rethrow_exception(ep);
    return results;
}

} // namespace qfpsim
