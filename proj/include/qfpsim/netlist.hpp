#pragma once

// Netlist representation and the SPICE-subset text format: R/C/L/V/M cards,
// unit suffixes, `.tran`/`.end` directives, plus programmatic builders for
// the packaged and ideal one-memristor test cells.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qfpsim/devices.hpp"
#include "qfpsim/errors.hpp"

namespace qfpsim {

// ---------------------------------------------------------------------------
// Elements
// ---------------------------------------------------------------------------

struct Resistor {
    std::string name, np, nn;
    double r = 0.0;
};

struct Capacitor {
    std::string name, np, nn;
    double c = 0.0;
    std::optional<double> v0;  ///< explicit initial voltage; else DC solution
};

struct Inductor {
    std::string name, np, nn;
    double l = 0.0;
    std::optional<double> i0;  ///< explicit initial current; else DC solution
};

struct VDC {
    std::string name, np, nn;
    double v = 0.0;
};

struct VPulse {
    std::string name, np, nn;
    PulseParams pulse;
};

struct Memristor {
    std::string name, np, nn;
    MemristorParams params;
    double x0 = 0.0;
};

using Element = std::variant<Resistor, Capacitor, Inductor, VDC, VPulse, Memristor>;

[[nodiscard]] inline const std::string& element_name(const Element& e) {
    return std::visit([](const auto& el) -> const std::string& { return el.name; }, e);
}

[[nodiscard]] inline std::pair<std::string, std::string> element_nodes(const Element& e) {
    return std::visit([](const auto& el) { return std::make_pair(el.np, el.nn); }, e);
}

/// Canonical ground node name; "gnd" (any case) is accepted as an alias.
inline constexpr std::string_view kGround = "0";

[[nodiscard]] inline bool is_ground(std::string_view node) { return node == kGround; }

// ---------------------------------------------------------------------------
// Circuit
// ---------------------------------------------------------------------------

struct Circuit {
    std::string title;
    std::vector<Element> elements;
    std::optional<double> tstop;  ///< from `.tran`, if present

    /// Non-ground node names in first-appearance order.
    [[nodiscard]] std::vector<std::string> node_names() const {
        std::vector<std::string> out;
        auto add = [&](const std::string& n) {
            if (!is_ground(n) && std::find(out.begin(), out.end(), n) == out.end())
                out.push_back(n);
        };
        for (const auto& e : elements) {
            auto [np, nn] = element_nodes(e);
            add(np);
            add(nn);
        }
        return out;
    }

    template <typename T>
    [[nodiscard]] std::vector<const T*> elements_of() const {
        std::vector<const T*> out;
        for (const auto& e : elements)
            if (const T* p = std::get_if<T>(&e)) out.push_back(p);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Number parsing with unit suffixes
// ---------------------------------------------------------------------------

namespace detail {

[[nodiscard]] inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Parses "<number>[suffix]" where suffix is one of f p n u m k meg g
/// (case-insensitive; "meg" is 1e6, "m" is 1e-3). Returns nullopt on any
/// leftover characters so callers can report the offending token.
[[nodiscard]] inline std::optional<double> parse_unit_value(std::string_view token) {
    if (token.empty()) return std::nullopt;
    const std::string text(token);
    const char* begin = text.c_str();
    char* end = nullptr;
    const double base = std::strtod(begin, &end);
    if (end == begin || !std::isfinite(base)) return std::nullopt;
    const std::string rest = to_lower(std::string_view(end));
    if (rest.empty()) return base;
    if (rest == "meg") return base * 1e6;
    if (rest.size() != 1) return std::nullopt;
    switch (rest[0]) {
        case 'f': return base * 1e-15;
        case 'p': return base * 1e-12;
        case 'n': return base * 1e-9;
        case 'u': return base * 1e-6;
        case 'm': return base * 1e-3;
        case 'k': return base * 1e3;
        case 'g': return base * 1e9;
        default: return std::nullopt;
    }
}

[[nodiscard]] inline std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

[[nodiscard]] inline std::string canonical_node(std::string_view raw) {
    const std::string low = to_lower(raw);
    if (low == "0" || low == "gnd") return std::string(kGround);
    return std::string(raw);
}

/// Full-precision float formatting (round-trips exactly through strtod).
[[nodiscard]] inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

struct CardContext {
    int line_no;
    const std::vector<std::string>& tok;

    [[nodiscard]] double number(const std::string& token, const char* what) const {
        if (auto v = parse_unit_value(token)) return *v;
        throw SyntaxError(line_no, std::string("bad ") + what + " '" + token + "'");
    }

    void arity(std::size_t want, const char* kind) const {
        if (tok.size() < want)
            throw SyntaxError(line_no, std::string(kind) + " card needs at least " +
                                           std::to_string(want) + " fields, got " +
                                           std::to_string(tok.size()));
    }
};

[[nodiscard]] inline std::optional<double> trailing_ic(const CardContext& c, std::size_t idx) {
    if (c.tok.size() <= idx) return std::nullopt;
    if (c.tok.size() > idx + 1)
        throw SyntaxError(c.line_no, "too many fields on card");
    const std::string t = to_lower(c.tok[idx]);
    if (t.rfind("ic=", 0) != 0)
        throw SyntaxError(c.line_no, "unexpected token '" + c.tok[idx] + "' (expected IC=...)");
    return c.number(c.tok[idx].substr(3), "initial condition");
}

/// V card body: either "DC <v>" / a bare number, or "PULSE(v1 v2 td tr tf pw per)".
[[nodiscard]] inline Element parse_source(const CardContext& c) {
    c.arity(4, "V");
    const std::string name = c.tok[0];
    const std::string np = canonical_node(c.tok[1]);
    const std::string nn = canonical_node(c.tok[2]);

    std::string rest;
    for (std::size_t i = 3; i < c.tok.size(); ++i) {
        if (i > 3) rest += ' ';
        rest += c.tok[i];
    }
    const std::string low = to_lower(rest);
    if (low.rfind("pulse", 0) == 0) {
        std::string args = rest.substr(5);
        for (char& ch : args)
            if (ch == '(' || ch == ')' || ch == ',') ch = ' ';
        const auto fields = split_ws(args);
        if (fields.size() != 7)
            throw SyntaxError(c.line_no, "PULSE needs 7 arguments (v1 v2 td tr tf pw per), got " +
                                             std::to_string(fields.size()));
        PulseParams p;
        double* slot[7] = {&p.v1, &p.v2, &p.td, &p.tr, &p.tf, &p.pw, &p.per};
        for (int i = 0; i < 7; ++i) *slot[i] = c.number(fields[i], "PULSE argument");
        try {
            validate(p);
        } catch (const InvalidParamError& e) {
            throw SyntaxError(c.line_no, e.what());
        }
        return VPulse{name, np, nn, p};
    }

    std::size_t vi = 3;
    if (low.rfind("dc", 0) == 0) {
        vi = 4;
        c.arity(5, "V");
    }
    if (c.tok.size() != vi + 1)
        throw SyntaxError(c.line_no, "V card: expected a single DC value");
    return VDC{name, np, nn, c.number(c.tok[vi], "DC value")};
}

[[nodiscard]] inline Element parse_memristor(const CardContext& c) {
    c.arity(3, "M");
    Memristor m;
    m.name = c.tok[0];
    m.np = canonical_node(c.tok[1]);
    m.nn = canonical_node(c.tok[2]);
    for (std::size_t i = 3; i < c.tok.size(); ++i) {
        const auto eq = c.tok[i].find('=');
        if (eq == std::string::npos)
            throw SyntaxError(c.line_no, "memristor parameter '" + c.tok[i] + "' is not KEY=VALUE");
        const std::string key = to_lower(c.tok[i].substr(0, eq));
        const std::string val = c.tok[i].substr(eq + 1);
        if (key == "mode") {
            const std::string v = to_lower(val);
            if (v == "det")
                m.params.mode = MemristorMode::deterministic;
            else if (v == "stoch")
                m.params.mode = MemristorMode::stochastic;
            else
                throw SyntaxError(c.line_no, "MODE must be det or stoch, got '" + val + "'");
        } else if (key == "n") {
            const double n = c.number(val, "N");
            if (n < 1.0 || n != std::floor(n))
                throw SyntaxError(c.line_no, "N must be a positive integer");
            m.params.n_switches = static_cast<int>(n);
        } else if (key == "seed") {
            const double s = c.number(val, "SEED");
            if (s < 0.0 || s != std::floor(s))
                throw SyntaxError(c.line_no, "SEED must be a non-negative integer");
            m.params.seed = static_cast<std::uint64_t>(s);
        } else if (key == "ron") {
            m.params.r_on = c.number(val, "RON");
        } else if (key == "roff") {
            m.params.r_off = c.number(val, "ROFF");
        } else if (key == "von") {
            m.params.v_on = c.number(val, "VON");
        } else if (key == "voff") {
            m.params.v_off = c.number(val, "VOFF");
        } else if (key == "tau") {
            m.params.tau_c = c.number(val, "TAU");
        } else if (key == "vt") {
            m.params.v_t = c.number(val, "VT");
        } else if (key == "x0") {
            m.x0 = c.number(val, "X0");
        } else {
            throw SyntaxError(c.line_no, "unknown memristor parameter '" + key + "'");
        }
    }
    if (!(m.x0 >= 0.0 && m.x0 <= 1.0))
        throw SyntaxError(c.line_no, "X0 must lie in [0,1]");
    try {
        validate(m.params);
    } catch (const InvalidParamError& e) {
        throw SyntaxError(c.line_no, e.what());
    }
    return m;
}

} // namespace detail

/// Parses the SPICE-subset netlist text. The first line is always the title;
/// `*` lines are comments; `.tran <tstop>` requests a transient; `.end` stops
/// parsing. Element names must be unique (case-insensitive). Netlists that
/// carry `.tran` are additionally checked for dangling (degree-1) nodes.
[[nodiscard]] inline Circuit parse_netlist(std::string_view text) {
    Circuit ckt;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    bool have_title = false;
    bool ended = false;

    std::map<std::string, int> names;  // lower-case name -> first line

    while (!ended && std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_title) {
            ckt.title = line;
            have_title = true;
            continue;
        }
        const auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (tok[0][0] == '*') continue;

        if (tok[0][0] == '.') {
            const std::string dir = detail::to_lower(tok[0]);
            if (dir == ".end") {
                ended = true;
            } else if (dir == ".tran") {
                if (tok.size() != 2)
                    throw SyntaxError(line_no, ".tran takes exactly one argument (tstop)");
                detail::CardContext c{line_no, tok};
                const double tstop = c.number(tok[1], "tstop");
                if (!(tstop > 0.0)) throw SyntaxError(line_no, "tstop must be positive");
                ckt.tstop = tstop;
            } else {
                throw SyntaxError(line_no, "unknown directive '" + tok[0] + "'");
            }
            continue;
        }

        detail::CardContext c{line_no, tok};
        Element el = [&]() -> Element {
            switch (std::toupper(static_cast<unsigned char>(tok[0][0]))) {
                case 'R': {
                    c.arity(4, "R");
                    if (tok.size() != 4) throw SyntaxError(line_no, "R card: too many fields");
                    const double r = c.number(tok[3], "resistance");
                    if (!(r > 0.0)) throw SyntaxError(line_no, "resistance must be positive");
                    return Resistor{tok[0], detail::canonical_node(tok[1]),
                                    detail::canonical_node(tok[2]), r};
                }
                case 'C': {
                    c.arity(4, "C");
                    const double cap = c.number(tok[3], "capacitance");
                    if (!(cap > 0.0)) throw SyntaxError(line_no, "capacitance must be positive");
                    return Capacitor{tok[0], detail::canonical_node(tok[1]),
                                     detail::canonical_node(tok[2]), cap,
                                     detail::trailing_ic(c, 4)};
                }
                case 'L': {
                    c.arity(4, "L");
                    const double l = c.number(tok[3], "inductance");
                    if (!(l > 0.0)) throw SyntaxError(line_no, "inductance must be positive");
                    return Inductor{tok[0], detail::canonical_node(tok[1]),
                                    detail::canonical_node(tok[2]), l,
                                    detail::trailing_ic(c, 4)};
                }
                case 'V': return detail::parse_source(c);
                case 'M': return detail::parse_memristor(c);
                default:
                    throw UnknownElementError(line_no, "unknown element type '" +
                                                           std::string(1, tok[0][0]) + "'");
            }
        }();

        const std::string key = detail::to_lower(element_name(el));
        if (auto [it, inserted] = names.emplace(key, line_no); !inserted)
            throw DuplicateNameError(line_no, "duplicate element name '" + element_name(el) +
                                                  "' (first used on line " +
                                                  std::to_string(it->second) + ")");
        ckt.elements.push_back(std::move(el));
    }

    if (!have_title) throw SyntaxError(1, "empty netlist: first line must be a title");

    if (ckt.tstop) {
        // A netlist that requests simulation must not have open stubs.
        std::map<std::string, int> degree;
        for (const auto& e : ckt.elements) {
            auto [np, nn] = element_nodes(e);
            if (!is_ground(np)) ++degree[np];
            if (!is_ground(nn)) ++degree[nn];
        }
        for (const auto& [node, deg] : degree)
            if (deg < 2) throw DanglingNodeError(node);
    }
    return ckt;
}

// ---------------------------------------------------------------------------
// Serializer
// ---------------------------------------------------------------------------

/// Canonical netlist text for a circuit. parse_netlist(serialize_netlist(c))
/// reproduces c structurally; numbers use full precision, no unit suffixes.
[[nodiscard]] inline std::string serialize_netlist(const Circuit& ckt) {
    using detail::format_g17;
    std::string out = ckt.title + "\n";
    for (const auto& e : ckt.elements) {
        std::visit(
            [&](const auto& el) {
                using T = std::decay_t<decltype(el)>;
                out += el.name + ' ' + el.np + ' ' + el.nn;
                if constexpr (std::is_same_v<T, Resistor>) {
                    out += ' ' + format_g17(el.r);
                } else if constexpr (std::is_same_v<T, Capacitor>) {
                    out += ' ' + format_g17(el.c);
                    if (el.v0) out += " IC=" + format_g17(*el.v0);
                } else if constexpr (std::is_same_v<T, Inductor>) {
                    out += ' ' + format_g17(el.l);
                    if (el.i0) out += " IC=" + format_g17(*el.i0);
                } else if constexpr (std::is_same_v<T, VDC>) {
                    out += " DC " + format_g17(el.v);
                } else if constexpr (std::is_same_v<T, VPulse>) {
                    const auto& p = el.pulse;
                    out += " PULSE(" + format_g17(p.v1) + ' ' + format_g17(p.v2) + ' ' +
                           format_g17(p.td) + ' ' + format_g17(p.tr) + ' ' + format_g17(p.tf) +
                           ' ' + format_g17(p.pw) + ' ' + format_g17(p.per) + ')';
                } else if constexpr (std::is_same_v<T, Memristor>) {
                    const auto& mp = el.params;
                    out += " RON=" + format_g17(mp.r_on) + " ROFF=" + format_g17(mp.r_off) +
                           " VON=" + format_g17(mp.v_on) + " VOFF=" + format_g17(mp.v_off) +
                           " TAU=" + format_g17(mp.tau_c) + " VT=" + format_g17(mp.v_t) +
                           " X0=" + format_g17(el.x0) +
                           " MODE=" + (mp.mode == MemristorMode::stochastic ? "stoch" : "det") +
                           " N=" + std::to_string(mp.n_switches) +
                           " SEED=" + std::to_string(mp.seed);
                }
                out += '\n';
            },
            e);
    }
    if (ckt.tstop) out += ".tran " + format_g17(*ckt.tstop) + "\n";
    out += ".end\n";
    return out;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Package parasitics of the carrier: series contact resistances on both
/// leads, bond-wire inductance, and pad capacitance at the memristor input.
struct PackageParams {
    double r1 = 10.0;      ///< input-side contact resistance [ohm]
    double r2 = 10.0;      ///< output-side contact resistance [ohm]
    double l = 1.2e-9;     ///< bond-wire inductance [H]
    double c = 25e-15;     ///< pad capacitance to ground [F]
};

/// Memristor cell with package parasitics:
/// src -> R1 -> L -> node a (C to ground) -> memristor -> node b -> R2 -> gnd.
[[nodiscard]] inline Circuit build_packaged_cell(const MemristorParams& mp,
                                                 const PackageParams& pkg, const VPulse& src,
                                                 double x0 = 0.0) {
    validate(mp);
    validate(src.pulse);
    if (!(pkg.r1 > 0.0 && pkg.r2 > 0.0 && pkg.l > 0.0 && pkg.c > 0.0))
        throw InvalidParamError("packaged cell: r1, r2, l, c must all be positive");
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw InvalidParamError("packaged cell: x0 must lie in [0,1]");
    Circuit ckt;
    ckt.title = "packaged memristor cell";
    VPulse v = src;
    v.np = "in";
    v.nn = std::string(kGround);
    ckt.elements.push_back(v);
    ckt.elements.push_back(Resistor{"R1", "in", "n1", pkg.r1});
    ckt.elements.push_back(Inductor{"L1", "n1", "a", pkg.l, std::nullopt});
    ckt.elements.push_back(Capacitor{"C1", "a", std::string(kGround), pkg.c, std::nullopt});
    ckt.elements.push_back(Memristor{"M1", "a", "b", mp, x0});
    ckt.elements.push_back(Resistor{"R2", "b", std::string(kGround), pkg.r2});
    return ckt;
}

/// The same cell without parasitics: src -> R1 -> memristor -> R2 -> gnd.
[[nodiscard]] inline Circuit build_ideal_cell(const MemristorParams& mp, double r1, double r2,
                                              const VPulse& src, double x0 = 0.0) {
    validate(mp);
    validate(src.pulse);
    if (!(r1 > 0.0 && r2 > 0.0))
        throw InvalidParamError("ideal cell: r1 and r2 must be positive");
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw InvalidParamError("ideal cell: x0 must lie in [0,1]");
    Circuit ckt;
    ckt.title = "ideal memristor cell";
    VPulse v = src;
    v.np = "in";
    v.nn = std::string(kGround);
    ckt.elements.push_back(v);
    ckt.elements.push_back(Resistor{"R1", "in", "a", r1});
    ckt.elements.push_back(Memristor{"M1", "a", "b", mp, x0});
    ckt.elements.push_back(Resistor{"R2", "b", std::string(kGround), r2});
    return ckt;
}

} // namespace qfpsim
