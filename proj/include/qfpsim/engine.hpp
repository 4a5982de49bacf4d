#pragma once

// Simulation engine: modified nodal analysis over the netlist element set,
// dense LU solve, DC operating point, and an adaptive-timestep transient
// built on trapezoidal / backward-Euler companion models. Memristors are
// coupled semi-implicitly: each step solves the linear network with the
// conductance frozen at the current state, then advances the state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qfpsim/devices.hpp"
#include "qfpsim/errors.hpp"
#include "qfpsim/netlist.hpp"

namespace qfpsim {

// ---------------------------------------------------------------------------
// Dense linear algebra
// ---------------------------------------------------------------------------

/// Square dense matrix, row-major. Sized for MNA systems of a few unknowns.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {}

    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    [[nodiscard]] double at(int i, int j) const {
        return a_[static_cast<std::size_t>(i) * n_ + j];
    }
    void zero() { std::fill(a_.begin(), a_.end(), 0.0); }

    /// Max absolute row sum.
    [[nodiscard]] double norm_inf() const {
        double best = 0.0;
        for (int i = 0; i < n_; ++i) {
            double s = 0.0;
            for (int j = 0; j < n_; ++j) s += std::abs(at(i, j));
            best = std::max(best, s);
        }
        return best;
    }

private:
    int n_ = 0;
    std::vector<double> a_;
};

/// Solves A x = b by LU decomposition with partial pivoting. A pivot below
/// 1e-14 * ||A||inf is treated as singular.
[[nodiscard]] inline std::vector<double> linear_solve(Matrix a, std::vector<double> b) {
    const int n = a.n();
    if (static_cast<std::size_t>(n) != b.size())
        throw InvalidParamError("linear_solve: dimension mismatch");
    const double threshold = 1e-14 * a.norm_inf();

    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(a.at(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double m = std::abs(a.at(i, k));
            if (m > best) {
                best = m;
                piv = i;
            }
        }
        if (best <= threshold || best == 0.0)
            throw SingularMatrixError("singular matrix (pivot " + std::to_string(best) +
                                      " at column " + std::to_string(k) + ")");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (int i = k + 1; i < n; ++i) {
            const double f = a.at(i, k) / a.at(k, k);
            if (f == 0.0) continue;
            a.at(i, k) = f;
            for (int j = k + 1; j < n; ++j) a.at(i, j) -= f * a.at(k, j);
            b[i] -= f * b[k];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a.at(i, j) * b[j];
        b[i] = s / a.at(i, i);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Waveform
// ---------------------------------------------------------------------------

/// Sampled multi-signal trace on a strictly increasing time grid. Node
/// voltages are named "v(<node>)", branch currents "i(<element>)".
struct Waveform {
    std::vector<double> t;
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;  ///< one vector per name, same length as t

    [[nodiscard]] std::optional<std::size_t> index(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return k;
        return std::nullopt;
    }

    [[nodiscard]] const std::vector<double>& col(const std::string& name) const {
        if (auto k = index(name)) return cols[*k];
        throw MissingSignalError("signal '" + name + "' not present in waveform");
    }

    /// Linear interpolation of column k at time tq (clamped to the ends).
    [[nodiscard]] double interp(std::size_t k, double tq) const {
        const auto& y = cols[k];
        if (t.empty()) throw SpanTooShortError("waveform is empty");
        if (tq <= t.front()) return y.front();
        if (tq >= t.back()) return y.back();
        const auto it = std::upper_bound(t.begin(), t.end(), tq);
        const std::size_t hi = static_cast<std::size_t>(it - t.begin());
        const std::size_t lo = hi - 1;
        const double w = (tq - t[lo]) / (t[hi] - t[lo]);
        return y[lo] + w * (y[hi] - y[lo]);
    }
};

// ---------------------------------------------------------------------------
// Solver configuration
// ---------------------------------------------------------------------------

enum class Method { backward_euler, trapezoidal };

struct SolverConfig {
    Method method = Method::trapezoidal;
    int steps_per_period = 2000;  ///< uniform grid density over the base period
    double reltol = 1e-4;
    double abstol_v = 1e-6;  ///< [V]
    double abstol_i = 1e-9;  ///< [A]
    double dt_min = 0.0;     ///< 0 = auto (base period / 1e7)
};

inline void validate(const SolverConfig& cfg) {
    if (cfg.steps_per_period < 100)
        throw InvalidParamError("solver: steps_per_period must be >= 100");
    if (!(cfg.reltol > 0.0) || !(cfg.abstol_v > 0.0) || !(cfg.abstol_i > 0.0))
        throw InvalidParamError("solver: tolerances must be positive");
    if (cfg.dt_min < 0.0) throw InvalidParamError("solver: dt_min must be >= 0");
}

/// Diagnostics accumulated over a transient run.
struct TransientStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double max_kcl_residual = 0.0;  ///< max ||A x - b||inf over committed solves
};

// ---------------------------------------------------------------------------
// MNA structure
// ---------------------------------------------------------------------------

/// Index maps and element views for one circuit: one unknown per non-ground
/// node voltage, plus one branch-current unknown per inductor and per voltage
/// source. Ground is eliminated (index -1).
struct MnaSystem {
    struct ResRef {
        int i, j;
        double g;
    };
    struct CapRef {
        int i, j;
        double c;
        std::optional<double> v0;
    };
    struct IndRef {
        int i, j, k;
        double l;
        std::optional<double> i0;
        std::string name;
    };
    struct SrcRef {
        int i, j, k;
        bool is_pulse;
        double vdc;
        PulseParams pulse;
        std::string name;

        [[nodiscard]] double value(double t) const {
            return is_pulse ? pulse_value(pulse, t) : vdc;
        }
    };
    struct MemRef {
        int i, j;
        MemristorParams mp;
        double x0;
        std::string name;
    };

    std::vector<std::string> nodes;  ///< non-ground, first-appearance order
    std::unordered_map<std::string, int> node_index;
    std::vector<ResRef> resistors;
    std::vector<CapRef> capacitors;
    std::vector<IndRef> inductors;
    std::vector<SrcRef> sources;
    std::vector<MemRef> memristors;

    [[nodiscard]] int n_nodes() const { return static_cast<int>(nodes.size()); }
    [[nodiscard]] int n_branches() const {
        return static_cast<int>(inductors.size() + sources.size());
    }
    [[nodiscard]] int n_unknowns() const { return n_nodes() + n_branches(); }
};

namespace detail {

/// Shortest stimulus time scale: the fastest pulse period, or tstop for
/// circuits driven only by DC sources.
[[nodiscard]] inline double stimulus_period(const MnaSystem& sys, double tstop) {
    double period = tstop;
    for (const auto& s : sys.sources)
        if (s.is_pulse) period = std::min(period, s.pulse.per);
    return period;
}

/// Smallest step the controller may take.  An explicit cfg.dt_min wins;
/// otherwise the floor scales with the stimulus period, tightened when an
/// L-C pair implies ringing far below that scale (package parasitics ring
/// orders of magnitude faster than the pulse the cell is driven with), and
/// kept above a representable increment of simulated time so degenerate
/// fF/aH-scale elements cannot push it below one ulp of t near tstop.
[[nodiscard]] inline double auto_dt_min(const MnaSystem& sys, const SolverConfig& cfg,
                                        double base_period) {
    if (cfg.dt_min > 0.0) return cfg.dt_min;
    double floor = base_period * 1e-7;
    if (!sys.capacitors.empty() && !sys.inductors.empty()) {
        double min_l = sys.inductors.front().l;
        for (const auto& ind : sys.inductors) min_l = std::min(min_l, ind.l);
        double min_c = sys.capacitors.front().c;
        for (const auto& cap : sys.capacitors) min_c = std::min(min_c, cap.c);
        floor = std::min(floor, std::sqrt(min_l * min_c) / 20.0);
        floor = std::max(floor, base_period * 1e-12);
    }
    return floor;
}

inline void stamp_conductance(Matrix& a, int i, int j, double g) {
    if (i >= 0) a.at(i, i) += g;
    if (j >= 0) a.at(j, j) += g;
    if (i >= 0 && j >= 0) {
        a.at(i, j) -= g;
        a.at(j, i) -= g;
    }
}

/// Current source of `cur` amperes flowing from node i to node j outside the
/// element (i.e. injected into j, drawn from i).
inline void stamp_current(std::vector<double>& b, int i, int j, double cur) {
    if (i >= 0) b[i] -= cur;
    if (j >= 0) b[j] += cur;
}

/// Branch unknown k carrying current from node i through the element to j.
inline void stamp_branch_incidence(Matrix& a, int i, int j, int k) {
    if (i >= 0) {
        a.at(i, k) += 1.0;
        a.at(k, i) += 1.0;
    }
    if (j >= 0) {
        a.at(j, k) -= 1.0;
        a.at(k, j) -= 1.0;
    }
}

} // namespace detail

/// Builds the MNA index structure and validates that the circuit is
/// simulatable: at least one source, a ground reference, and a DC conduction
/// path (through R/L/V/M) from every node to ground.
[[nodiscard]] inline MnaSystem assemble(const Circuit& ckt) {
    MnaSystem sys;
    bool ground_seen = false;
    auto node_of = [&](const std::string& n) -> int {
        if (is_ground(n)) {
            ground_seen = true;
            return -1;
        }
        if (auto it = sys.node_index.find(n); it != sys.node_index.end()) return it->second;
        const int idx = static_cast<int>(sys.nodes.size());
        sys.nodes.push_back(n);
        sys.node_index.emplace(n, idx);
        return idx;
    };

    // First pass fixes node numbering; branch unknowns follow all nodes.
    for (const auto& e : ckt.elements) {
        auto [np, nn] = element_nodes(e);
        node_of(np);
        node_of(nn);
    }
    const int nn = sys.n_nodes();
    int branch = nn;

    for (const auto& e : ckt.elements) {
        if (const auto* r = std::get_if<Resistor>(&e)) {
            sys.resistors.push_back({node_of(r->np), node_of(r->nn), 1.0 / r->r});
        } else if (const auto* c = std::get_if<Capacitor>(&e)) {
            sys.capacitors.push_back({node_of(c->np), node_of(c->nn), c->c, c->v0});
        } else if (const auto* l = std::get_if<Inductor>(&e)) {
            sys.inductors.push_back({node_of(l->np), node_of(l->nn), branch++, l->l, l->i0, l->name});
        } else if (const auto* v = std::get_if<VDC>(&e)) {
            sys.sources.push_back({node_of(v->np), node_of(v->nn), branch++, false, v->v, {}, v->name});
        } else if (const auto* p = std::get_if<VPulse>(&e)) {
            sys.sources.push_back({node_of(p->np), node_of(p->nn), branch++, true, 0.0, p->pulse, p->name});
        } else if (const auto* m = std::get_if<Memristor>(&e)) {
            validate(m->params);
            if (!(m->x0 >= 0.0 && m->x0 <= 1.0))
                throw InvalidParamError("memristor '" + m->name + "': x0 must lie in [0,1]");
            sys.memristors.push_back({node_of(m->np), node_of(m->nn), m->params, m->x0, m->name});
        }
    }

    if (sys.sources.empty())
        throw SingularTopologyError("circuit has no voltage source");
    if (!ground_seen)
        throw SingularTopologyError("circuit has no ground ('0') reference");

    // DC reachability from ground through conduction elements (C excluded).
    std::vector<char> reach(static_cast<std::size_t>(nn), 0);
    std::vector<std::pair<int, int>> edges;
    for (const auto& r : sys.resistors) edges.emplace_back(r.i, r.j);
    for (const auto& l : sys.inductors) edges.emplace_back(l.i, l.j);
    for (const auto& s : sys.sources) edges.emplace_back(s.i, s.j);
    for (const auto& m : sys.memristors) edges.emplace_back(m.i, m.j);
    bool grew = true;
    auto reached = [&](int idx) { return idx < 0 || reach[static_cast<std::size_t>(idx)] != 0; };
    while (grew) {
        grew = false;
        for (const auto& [i, j] : edges) {
            if (reached(i) != reached(j)) {
                reach[static_cast<std::size_t>(reached(i) ? j : i)] = 1;
                grew = true;
            }
        }
    }
    for (int i = 0; i < nn; ++i)
        if (!reach[static_cast<std::size_t>(i)])
            throw SingularTopologyError("node '" + sys.nodes[i] +
                                        "' has no DC path to ground (capacitive island?)");
    return sys;
}

// ---------------------------------------------------------------------------
// DC operating point
// ---------------------------------------------------------------------------

namespace detail {

struct DcSolution {
    std::vector<double> sol;
    double residual = 0.0;
};

/// Resistive solve at t=0: capacitors open, inductors shorted, memristors at
/// G(x0), sources at their t=0 value.
[[nodiscard]] inline DcSolution dc_solve(const MnaSystem& sys) {
    const int n = sys.n_unknowns();
    Matrix a(n);
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);

    for (const auto& r : sys.resistors) stamp_conductance(a, r.i, r.j, r.g);
    for (const auto& m : sys.memristors)
        stamp_conductance(a, m.i, m.j, memristor_conductance(m.mp, m.x0));
    for (const auto& l : sys.inductors) stamp_branch_incidence(a, l.i, l.j, l.k);
    for (const auto& s : sys.sources) {
        stamp_branch_incidence(a, s.i, s.j, s.k);
        b[static_cast<std::size_t>(s.k)] += s.value(0.0);
    }

    DcSolution out;
    out.sol = linear_solve(a, b);
    for (double v : out.sol)
        if (!std::isfinite(v)) throw NonFiniteError("non-finite DC operating point");
    for (int i = 0; i < n; ++i) {
        double r = -b[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) r += a.at(i, j) * out.sol[static_cast<std::size_t>(j)];
        out.residual = std::max(out.residual, std::abs(r));
    }
    return out;
}

inline void append_signal_names(const MnaSystem& sys, Waveform& wf) {
    for (const auto& n : sys.nodes) wf.names.push_back("v(" + n + ")");
    for (const auto& s : sys.sources) wf.names.push_back("i(" + s.name + ")");
    for (const auto& l : sys.inductors) wf.names.push_back("i(" + l.name + ")");
    for (const auto& m : sys.memristors) wf.names.push_back("i(" + m.name + ")");
    wf.cols.resize(wf.names.size());
}

} // namespace detail

/// Operating point with sources at their t=0 values. Returns a single-sample
/// waveform carrying every node voltage and branch current.
[[nodiscard]] inline Waveform dc_operating_point(const Circuit& ckt) {
    const MnaSystem sys = assemble(ckt);
    const auto dc = detail::dc_solve(sys);

    Waveform wf;
    detail::append_signal_names(sys, wf);
    wf.t.push_back(0.0);
    std::size_t k = 0;
    auto push = [&](double v) { wf.cols[k++].push_back(v); };
    for (int i = 0; i < sys.n_nodes(); ++i) push(dc.sol[static_cast<std::size_t>(i)]);
    for (const auto& s : sys.sources) push(dc.sol[static_cast<std::size_t>(s.k)]);
    for (const auto& l : sys.inductors) push(dc.sol[static_cast<std::size_t>(l.k)]);
    auto node_v = [&](int idx) { return idx < 0 ? 0.0 : dc.sol[static_cast<std::size_t>(idx)]; };
    for (const auto& m : sys.memristors)
        push(memristor_conductance(m.mp, m.x0) * (node_v(m.i) - node_v(m.j)));
    return wf;
}

// ---------------------------------------------------------------------------
// Transient
// ---------------------------------------------------------------------------

namespace detail {

/// Element histories carried between accepted steps.
struct StepState {
    std::vector<double> cap_v, cap_i;  ///< capacitor branch voltage / current
    std::vector<double> ind_i, ind_v;  ///< inductor branch current / voltage
};

struct StepResult {
    std::vector<double> sol;
    StepState state;
    double residual = 0.0;
};

class TransientRunner {
public:
    TransientRunner(const MnaSystem& sys, const SolverConfig& cfg, double tstop,
                    std::uint64_t seed)
        : sys_(sys), cfg_(cfg), tstop_(tstop) {
        mem_x_.reserve(sys.memristors.size());
        mem_v_.assign(sys.memristors.size(), 0.0);
        for (const auto& m : sys.memristors) {
            mem_x_.push_back(m.x0);
            mem_rng_.emplace_back(seed, m.mp.seed, m.name);
            mem_g_.push_back(memristor_conductance(m.mp, m.x0));
        }
        base_period_ = stimulus_period(sys, tstop);
        dt0_ = base_period_ / cfg.steps_per_period;
        dt_min_ = auto_dt_min(sys, cfg, base_period_);
    }

    [[nodiscard]] Waveform run(TransientStats* stats_out) {
        Waveform wf;
        append_signal_names(sys_, wf);

        init_from_dc();
        record(wf, 0.0, prev_sol_);

        build_targets();
        double t = 0.0;
        double dt_cur = dt_min_;  // t=0 is treated as a breakpoint
        const double snap = 0.25 * dt_min_;
        // Trapezoidal integration is only marginally stable for very stiff
        // reactive branches: perturbations excite a sign-alternating mode
        // that never decays and that step-halving cannot shrink.  When a
        // step still rejects at the floor, one backward Euler step is tried
        // first: it damps the mode and rebuilds the companion histories.
        // Underflow is only reported if the damped step fails too.
        bool damped_step = false;

        for (const auto& [target, is_bp] : targets_) {
            while (t < target - snap) {
                double dt_try = std::min({dt_cur, dt0_, mem_cap(), target - t});
                if (target - t - dt_try < snap) dt_try = target - t;

                StepResult res;
                while (true) {
                    const Method method =
                        damped_step ? Method::backward_euler : cfg_.method;
                    if (attempt(t, dt_try, method, res)) break;
                    ++stats_.rejected;
                    if (dt_try <= dt_min_ * 1.0000001) {
                        if (method == Method::backward_euler)
                            throw StepUnderflowError(t);
                        damped_step = true;
                    } else {
                        dt_try = std::max(0.5 * dt_try, dt_min_);
                    }
                }

                const double t_new = (dt_try == target - t) ? target : t + dt_try;
                // Record before the state commit so i(M) reflects the
                // conductance the step was actually solved with.
                record(wf, t_new, res.sol);
                commit(res, dt_try);
                t = t_new;
                dt_cur = std::min(std::max(dt_try, dt_min_) * 2.0, dt0_);
                damped_step = false;

                if (++stats_.accepted > 200'000'000)
                    throw Error("transient: step budget exceeded");
            }
            t = target;
            if (is_bp) dt_cur = dt_min_;  // forced small restart step after a corner
        }

        if (stats_out) *stats_out = stats_;
        return wf;
    }

private:
    void init_from_dc() {
        const auto dc = dc_solve(sys_);
        stats_.max_kcl_residual = std::max(stats_.max_kcl_residual, dc.residual);
        auto node_v = [&](int idx) {
            return idx < 0 ? 0.0 : dc.sol[static_cast<std::size_t>(idx)];
        };
        state_.cap_v.resize(sys_.capacitors.size());
        state_.cap_i.assign(sys_.capacitors.size(), 0.0);
        for (std::size_t c = 0; c < sys_.capacitors.size(); ++c) {
            const auto& cap = sys_.capacitors[c];
            state_.cap_v[c] = cap.v0 ? *cap.v0 : node_v(cap.i) - node_v(cap.j);
        }
        state_.ind_i.resize(sys_.inductors.size());
        state_.ind_v.resize(sys_.inductors.size());
        for (std::size_t l = 0; l < sys_.inductors.size(); ++l) {
            const auto& ind = sys_.inductors[l];
            state_.ind_i[l] = ind.i0 ? *ind.i0 : dc.sol[static_cast<std::size_t>(ind.k)];
            state_.ind_v[l] = node_v(ind.i) - node_v(ind.j);
        }
        for (std::size_t m = 0; m < sys_.memristors.size(); ++m) {
            const auto& mem = sys_.memristors[m];
            mem_v_[m] = node_v(mem.i) - node_v(mem.j);
        }
        prev_sol_ = dc.sol;
        // Capacitors with explicit initial conditions are not part of the DC
        // solve, so the recorded t=0 node voltages come from it regardless.
    }

    /// One linear solve over [t, t+dt] with the current memristor conductances.
    [[nodiscard]] StepResult solve_one(const StepState& from, double t, double dt,
                                       Method method) const {
        const int n = sys_.n_unknowns();
        Matrix a(n);
        std::vector<double> b(static_cast<std::size_t>(n), 0.0);
        const bool trap = method == Method::trapezoidal;

        for (const auto& r : sys_.resistors) stamp_conductance(a, r.i, r.j, r.g);
        for (std::size_t m = 0; m < sys_.memristors.size(); ++m)
            stamp_conductance(a, sys_.memristors[m].i, sys_.memristors[m].j, mem_g_[m]);

        for (std::size_t c = 0; c < sys_.capacitors.size(); ++c) {
            const auto& cap = sys_.capacitors[c];
            const double g = (trap ? 2.0 : 1.0) * cap.c / dt;
            const double ieq = trap ? g * from.cap_v[c] + from.cap_i[c] : g * from.cap_v[c];
            stamp_conductance(a, cap.i, cap.j, g);
            // Companion history current flows from the - node to the + node.
            stamp_current(b, cap.j, cap.i, ieq);
        }
        for (std::size_t l = 0; l < sys_.inductors.size(); ++l) {
            const auto& ind = sys_.inductors[l];
            stamp_branch_incidence(a, ind.i, ind.j, ind.k);
            const double z = (trap ? 2.0 : 1.0) * ind.l / dt;
            a.at(ind.k, ind.k) -= z;
            b[static_cast<std::size_t>(ind.k)] =
                trap ? -from.ind_v[l] - z * from.ind_i[l] : -z * from.ind_i[l];
        }
        for (const auto& s : sys_.sources) {
            stamp_branch_incidence(a, s.i, s.j, s.k);
            b[static_cast<std::size_t>(s.k)] += s.value(t + dt);
        }

        StepResult out;
        out.sol = linear_solve(a, b);
        for (double v : out.sol)
            if (!std::isfinite(v))
                throw NonFiniteError("non-finite solution at t=" + std::to_string(t + dt));
        for (int i = 0; i < n; ++i) {
            double r = -b[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) r += a.at(i, j) * out.sol[static_cast<std::size_t>(j)];
            out.residual = std::max(out.residual, std::abs(r));
        }

        auto node_v = [&](int idx) {
            return idx < 0 ? 0.0 : out.sol[static_cast<std::size_t>(idx)];
        };
        out.state.cap_v.resize(sys_.capacitors.size());
        out.state.cap_i.resize(sys_.capacitors.size());
        for (std::size_t c = 0; c < sys_.capacitors.size(); ++c) {
            const auto& cap = sys_.capacitors[c];
            const double v_new = node_v(cap.i) - node_v(cap.j);
            const double scale = (trap ? 2.0 : 1.0) * cap.c / dt;
            out.state.cap_v[c] = v_new;
            out.state.cap_i[c] = trap ? scale * (v_new - from.cap_v[c]) - from.cap_i[c]
                                      : scale * (v_new - from.cap_v[c]);
        }
        out.state.ind_i.resize(sys_.inductors.size());
        out.state.ind_v.resize(sys_.inductors.size());
        for (std::size_t l = 0; l < sys_.inductors.size(); ++l) {
            const auto& ind = sys_.inductors[l];
            out.state.ind_i[l] = out.sol[static_cast<std::size_t>(ind.k)];
            out.state.ind_v[l] = node_v(ind.i) - node_v(ind.j);
        }
        return out;
    }

    /// Step-doubling error control: compare one dt step against two dt/2
    /// steps; accept the half-step solution when the estimate passes.
    [[nodiscard]] bool attempt(double t, double dt, Method method, StepResult& accepted) {
        const StepResult full = solve_one(state_, t, dt, method);
        const StepResult h1 = solve_one(state_, t, 0.5 * dt, method);
        StepResult h2 = solve_one(h1.state, t + 0.5 * dt, 0.5 * dt, method);
        h2.residual = std::max(h2.residual, h1.residual);

        const double order_div = method == Method::trapezoidal ? 3.0 : 1.0;
        const int nn = sys_.n_nodes();
        for (int u = 0; u < sys_.n_unknowns(); ++u) {
            const auto k = static_cast<std::size_t>(u);
            const double est = std::abs(full.sol[k] - h2.sol[k]) / order_div;
            const double abstol = u < nn ? cfg_.abstol_v : cfg_.abstol_i;
            const double tol =
                cfg_.reltol * std::max(std::abs(h2.sol[k]), std::abs(prev_sol_[k])) + abstol;
            if (est > tol) return false;
        }
        accepted = std::move(h2);
        return true;
    }

    /// Accepts a step of width dt: adopts the element histories, advances
    /// every memristor state with its end-of-step branch voltage, and
    /// refreshes the frozen conductances for the next step.
    void commit(const StepResult& res, double dt) {
        state_ = res.state;
        stats_.max_kcl_residual = std::max(stats_.max_kcl_residual, res.residual);
        auto node_v = [&](int idx) {
            return idx < 0 ? 0.0 : res.sol[static_cast<std::size_t>(idx)];
        };
        for (std::size_t m = 0; m < sys_.memristors.size(); ++m) {
            const auto& mem = sys_.memristors[m];
            const double v_end = node_v(mem.i) - node_v(mem.j);
            DeviceRng* rng =
                mem.mp.mode == MemristorMode::stochastic ? &mem_rng_[m] : nullptr;
            mem_x_[m] = state_update(mem.mp, mem_x_[m], v_end, dt, rng);
            mem_v_[m] = v_end;
            mem_g_[m] = memristor_conductance(mem.mp, mem_x_[m]);
        }
        prev_sol_ = res.sol;
    }

    /// Memristor activity cap: while any device sees a supra-threshold bias,
    /// dt stays at or below tau_c/50 so state dynamics remain resolved.
    [[nodiscard]] double mem_cap() const {
        double cap = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < sys_.memristors.size(); ++m) {
            const auto& mp = sys_.memristors[m].mp;
            if (std::abs(mem_v_[m]) > 0.5 * std::min(mp.v_on, mp.v_off))
                cap = std::min(cap, mp.tau_c / 50.0);
        }
        return cap;
    }

    void build_targets() {
        std::vector<std::pair<double, bool>> raw;  // (time, is_breakpoint)
        for (int j = 1;; ++j) {
            const double tj = j * dt0_;
            if (tj >= tstop_) break;
            raw.emplace_back(tj, false);
        }
        raw.emplace_back(tstop_, false);
        for (const auto& s : sys_.sources) {
            if (!s.is_pulse) continue;
            for (double bp : breakpoints(s.pulse, tstop_))
                if (bp > 0.0) raw.emplace_back(bp, true);
        }
        std::sort(raw.begin(), raw.end());
        targets_.clear();
        const double merge_eps = 0.25 * dt_min_;
        for (const auto& [tt, bp] : raw) {
            if (!targets_.empty() && tt - targets_.back().first < merge_eps)
                targets_.back().second = targets_.back().second || bp;
            else
                targets_.emplace_back(tt, bp);
        }
    }

    void record(Waveform& wf, double t, const std::vector<double>& sol) {
        wf.t.push_back(t);
        std::size_t k = 0;
        auto push = [&](double v) { wf.cols[k++].push_back(v); };
        for (int i = 0; i < sys_.n_nodes(); ++i) push(sol[static_cast<std::size_t>(i)]);
        for (const auto& s : sys_.sources) push(sol[static_cast<std::size_t>(s.k)]);
        for (const auto& l : sys_.inductors) push(sol[static_cast<std::size_t>(l.k)]);
        auto node_v = [&](int idx) {
            return idx < 0 ? 0.0 : sol[static_cast<std::size_t>(idx)];
        };
        for (std::size_t m = 0; m < sys_.memristors.size(); ++m)
            push(mem_g_[m] * (node_v(sys_.memristors[m].i) - node_v(sys_.memristors[m].j)));
    }

    const MnaSystem& sys_;
    SolverConfig cfg_;
    double tstop_;
    double base_period_ = 0.0, dt0_ = 0.0, dt_min_ = 0.0;

    StepState state_;
    std::vector<double> prev_sol_;
    std::vector<double> mem_x_, mem_g_;
    std::vector<double> mem_v_;  ///< branch voltage at the last accepted step
    std::vector<DeviceRng> mem_rng_;
    std::vector<std::pair<double, bool>> targets_;
    TransientStats stats_;
};

} // namespace detail

/// Adaptive transient over [0, tstop] starting from the DC operating point.
/// The accepted grid is the uniform base-period/steps_per_period grid plus
/// all pulse-corner breakpoints (with a dt_min restart step after each),
/// refined wherever the step-doubling error estimate demands it.
[[nodiscard]] inline Waveform transient(const Circuit& ckt, const SolverConfig& cfg, double tstop,
                                        std::uint64_t seed = 0,
                                        TransientStats* stats = nullptr) {
    validate(cfg);
    if (!(tstop > 0.0)) throw InvalidParamError("transient: tstop must be positive");
    const MnaSystem sys = assemble(ckt);
    detail::TransientRunner runner(sys, cfg, tstop, seed);
    return runner.run(stats);
}

/// Step floor a transient of `ckt` will run with: cfg.dt_min when set,
/// otherwise derived from the stimulus period and the fastest L-C pair.
/// Matched-pair comparisons (packaged vs ideal cell) resolve this once from
/// the packaged circuit and pass it to both runs, so both integrate on
/// identical step ladders and state-update discretization error stays
/// common mode in the current difference.
[[nodiscard]] inline double resolved_dt_min(const Circuit& ckt, const SolverConfig& cfg,
                                            double tstop) {
    validate(cfg);
    if (!(tstop > 0.0)) throw InvalidParamError("resolved_dt_min: tstop must be positive");
    const MnaSystem sys = assemble(ckt);
    return detail::auto_dt_min(sys, cfg, detail::stimulus_period(sys, tstop));
}

} // namespace qfpsim
