// qfpsim: command-line driver for the packaged-memristor study.
//
// Subcommands:
//   sim      transient over an arbitrary netlist -> waveform CSV
//   compare  packaged vs ideal cell at one operating point -> 5-column CSV
//   sweep    corner x frequency x amplitude error grid -> summary CSV
//   stats    measurement CSV -> aggregates table + per-state histograms
//   rerun    re-execute a recorded run from its manifest sidecar
//
// Every producing command writes a `<out>.manifest.json` sidecar capturing
// the resolved parameters and input/output digests; `rerun` consumes it and
// reproduces the outputs byte-identically.
//
// Exit codes: 0 success, 1 parse/validation error, 2 solver failure, 3 I/O.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qfpsim/qfpsim.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Small parsing helpers
// ---------------------------------------------------------------------------

double parse_value(const std::string& text, const std::string& what) {
    if (auto v = qfpsim::detail::parse_unit_value(text)) return *v;
    throw qfpsim::InvalidParamError("cannot parse " + what + " value '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<double> parse_value_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& tok : split_list(text)) out.push_back(parse_value(tok, what));
    return out;
}

qfpsim::Method parse_method(const std::string& name) {
    if (name == "trap" || name == "trapezoidal") return qfpsim::Method::trapezoidal;
    if (name == "be" || name == "backward_euler" || name == "backward-euler")
        return qfpsim::Method::backward_euler;
    throw qfpsim::InvalidParamError("unknown method '" + name +
                                    "' (expected 'trap' or 'be')");
}

/// Package flag "r1,r2,l,c" with unit suffixes. Zero L or C is replaced by a
/// numerically tiny positive value so the degenerate-package limit stays a
/// well-posed circuit.
qfpsim::PackageParams parse_pkg(const std::string& text) {
    const auto vals = parse_value_list(text, "package");
    if (vals.size() != 4)
        throw qfpsim::InvalidParamError("--pkg expects 'r1,r2,l,c', got '" + text + "'");
    qfpsim::PackageParams pkg;
    pkg.r1 = vals[0];
    pkg.r2 = vals[1];
    pkg.l = vals[2] == 0.0 ? 1e-18 : vals[2];
    pkg.c = vals[3] == 0.0 ? 1e-21 : vals[3];
    return pkg;
}

unsigned resolve_workers(unsigned flag_value) {
    if (flag_value != 0) return flag_value;
    if (const char* env = std::getenv("QFPSIM_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return 0;  // let the sweep pick hardware concurrency
}

// ---------------------------------------------------------------------------
// Solver flags shared by sim/compare/sweep
// ---------------------------------------------------------------------------

struct SolverFlags {
    std::string method = "trap";
    int steps_per_period = 2000;
    double reltol = 1e-4;
    double abstol_v = 1e-6;
    double abstol_i = 1e-9;
    double dt_min = 0.0;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
    cmd->add_option("--method", f.method, "Integration method: trap | be")
        ->capture_default_str();
    cmd->add_option("--steps-per-period", f.steps_per_period,
                    "Uniform grid points per base period")
        ->capture_default_str();
    cmd->add_option("--reltol", f.reltol, "Relative step-error tolerance")
        ->capture_default_str();
    cmd->add_option("--abstol-v", f.abstol_v, "Absolute voltage tolerance [V]")
        ->capture_default_str();
    cmd->add_option("--abstol-i", f.abstol_i, "Absolute current tolerance [A]")
        ->capture_default_str();
    cmd->add_option("--dt-min", f.dt_min, "Minimum step [s]; 0 = auto")
        ->capture_default_str();
}

json solver_to_json(const SolverFlags& f) {
    // Canonical method spelling so manifests are stable across aliases.
    const qfpsim::Method m = parse_method(f.method);
    return json{{"method", m == qfpsim::Method::trapezoidal ? "trap" : "be"},
                {"steps_per_period", f.steps_per_period},
                {"reltol", f.reltol},
                {"abstol_v", f.abstol_v},
                {"abstol_i", f.abstol_i},
                {"dt_min", f.dt_min}};
}

qfpsim::SolverConfig solver_from_json(const json& p) {
    qfpsim::SolverConfig cfg;
    cfg.method = parse_method(p.at("method").get<std::string>());
    cfg.steps_per_period = p.at("steps_per_period").get<int>();
    cfg.reltol = p.at("reltol").get<double>();
    cfg.abstol_v = p.at("abstol_v").get<double>();
    cfg.abstol_i = p.at("abstol_i").get<double>();
    cfg.dt_min = p.at("dt_min").get<double>();
    qfpsim::validate(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Manifest plumbing
// ---------------------------------------------------------------------------

void write_manifest(const std::string& manifest_path, const std::string& command,
                    const json& params, const json& inputs,
                    const std::vector<std::string>& output_paths) {
    json outputs = json::object();
    for (const auto& p : output_paths) outputs[p] = qfpsim::file_digest(p);
    const json m{{"command", command},
                 {"version", std::string(qfpsim::kVersion)},
                 {"params", params},
                 {"inputs", inputs},
                 {"outputs", outputs}};
    qfpsim::write_text_file(manifest_path, m.dump(2) + "\n");
}

void check_input_digest(const json& inputs, const std::string& path) {
    const auto it = inputs.find(path);
    if (it == inputs.end()) return;
    const std::string now = qfpsim::file_digest(path);
    if (now != it->get<std::string>())
        throw qfpsim::InvalidParamError("input '" + path +
                                        "' changed since the manifest was written (digest " +
                                        now + " != " + it->get<std::string>() + ")");
}

// ---------------------------------------------------------------------------
// Corner resolution
// ---------------------------------------------------------------------------

/// A token is either a built-in/derived label (c1..c5) or an explicit
/// "r_on:r_off" pair.
qfpsim::CornerSet resolve_corners(const qfpsim::CornerSet& base, const std::string& tokens) {
    if (tokens.empty()) return base;
    qfpsim::CornerSet out;
    for (const auto& tok : split_list(tokens)) {
        const auto colon = tok.find(':');
        if (colon != std::string::npos) {
            qfpsim::Corner c;
            c.label = tok;
            c.r_on = parse_value(tok.substr(0, colon), "corner r_on");
            c.r_off = parse_value(tok.substr(colon + 1), "corner r_off");
            if (!(c.r_on > 0.0) || !(c.r_on < c.r_off))
                throw qfpsim::InvalidParamError("corner '" + tok +
                                                "' needs 0 < r_on < r_off");
            out.push_back(c);
            continue;
        }
        bool found = false;
        for (const auto& c : base)
            if (c.label == tok) {
                out.push_back(c);
                found = true;
                break;
            }
        if (!found) throw qfpsim::InvalidParamError("unknown corner label '" + tok + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Command bodies (shared between direct invocation and rerun)
// ---------------------------------------------------------------------------

void run_sim(json params, const std::string& manifest_path) {
    const std::string netlist_path = params.at("netlist").get<std::string>();
    const std::string out = params.at("out").get<std::string>();
    const qfpsim::Circuit ckt = qfpsim::parse_netlist(qfpsim::read_text_file(netlist_path));

    double tstop;
    if (params.at("tstop").is_null()) {
        if (!ckt.tstop)
            throw qfpsim::InvalidParamError(
                "netlist has no .tran directive; pass --tstop explicitly");
        tstop = *ckt.tstop;
        params["tstop"] = tstop;  // manifests always carry the resolved value
    } else {
        tstop = params.at("tstop").get<double>();
    }

    const qfpsim::SolverConfig cfg = solver_from_json(params.at("solver"));
    const auto seed = params.at("seed").get<std::uint64_t>();
    const qfpsim::Waveform wf = qfpsim::transient(ckt, cfg, tstop, seed);
    qfpsim::write_waveform_csv(out, wf);

    json inputs{{netlist_path, qfpsim::file_digest(netlist_path)}};
    write_manifest(manifest_path, "sim", params, inputs, {out});
}

qfpsim::MemristorParams device_from_json(const json& p) {
    qfpsim::MemristorParams mp;  // deterministic defaults
    mp.r_on = p.at("r_on").get<double>();
    mp.r_off = p.at("r_off").get<double>();
    mp.tau_c = p.at("tau_c").get<double>();
    mp.v_t = p.at("v_t").get<double>();
    qfpsim::validate(mp);
    return mp;
}

qfpsim::PackageParams pkg_from_json(const json& p) {
    qfpsim::PackageParams pkg;
    pkg.r1 = p.at("r1").get<double>();
    pkg.r2 = p.at("r2").get<double>();
    pkg.l = p.at("l").get<double>();
    pkg.c = p.at("c").get<double>();
    return pkg;
}

void run_compare(const json& params, const std::string& manifest_path) {
    const std::string out = params.at("out").get<std::string>();
    const double freq = params.at("frequency").get<double>();
    const double amplitude = params.at("amplitude").get<double>();
    const int n_cycles = params.at("n_cycles").get<int>();
    const auto seed = params.at("seed").get<std::uint64_t>();
    const qfpsim::SolverConfig cfg = solver_from_json(params.at("solver"));
    const qfpsim::MemristorParams mp = device_from_json(params.at("device"));
    const qfpsim::PackageParams pkg = pkg_from_json(params.at("pkg"));

    const qfpsim::VPulse src{"V1", "in", std::string(qfpsim::kGround),
                             qfpsim::make_input_pulse(freq, amplitude)};
    const double x0 = amplitude > 0.0 ? 0.0 : 1.0;
    const double tstop = n_cycles * src.pulse.per;

    const qfpsim::Circuit packaged = qfpsim::build_packaged_cell(mp, pkg, src, x0);
    const qfpsim::Circuit ideal = qfpsim::build_ideal_cell(mp, pkg.r1, pkg.r2, src, x0);
    // Share one resolved step floor so both cells integrate on the same
    // ladder and delta_i isolates the package contribution.
    qfpsim::SolverConfig run_cfg = cfg;
    run_cfg.dt_min = qfpsim::resolved_dt_min(packaged, cfg, tstop);
    const qfpsim::Waveform wp = qfpsim::transient(packaged, run_cfg, tstop, seed);
    const qfpsim::Waveform wi = qfpsim::transient(ideal, run_cfg, tstop, seed);
    const qfpsim::Waveform table = qfpsim::compare_table(wp, wi, "v(in)", "i(M1)");
    qfpsim::write_compare_csv(out, table);

    write_manifest(manifest_path, "compare", params, json::object(), {out});
}

void run_sweep(const json& params, const std::string& manifest_path) {
    const std::string out = params.at("out").get<std::string>();
    const int n_cycles = params.at("n_cycles").get<int>();
    const unsigned workers = params.at("workers").get<unsigned>();
    const qfpsim::SolverConfig cfg = solver_from_json(params.at("solver"));
    const qfpsim::PackageParams pkg = pkg_from_json(params.at("pkg"));

    qfpsim::MemristorParams mp_base;
    mp_base.tau_c = params.at("device").at("tau_c").get<double>();
    mp_base.v_t = params.at("device").at("v_t").get<double>();

    qfpsim::CornerSet corners;
    for (const auto& c : params.at("corners"))
        corners.push_back({c.at("label").get<std::string>(), c.at("r_on").get<double>(),
                           c.at("r_off").get<double>()});
    const auto freqs = params.at("freqs").get<std::vector<double>>();
    const auto amplitudes = params.at("amplitudes").get<std::vector<double>>();
    if (amplitudes.empty())
        throw qfpsim::InvalidParamError("sweep: amplitude list is empty");

    // One grid per amplitude; rows emitted corner-major, frequency next,
    // amplitude innermost.
    std::vector<std::vector<qfpsim::ErrorSummary>> per_amp;
    for (double a : amplitudes)
        per_amp.push_back(
            qfpsim::corner_sweep(corners, freqs, a, mp_base, pkg, cfg, n_cycles, workers));

    std::vector<qfpsim::ErrorSummary> rows;
    for (std::size_t c = 0; c < corners.size(); ++c)
        for (std::size_t f = 0; f < freqs.size(); ++f)
            for (std::size_t a = 0; a < amplitudes.size(); ++a)
                rows.push_back(per_amp[a][c * freqs.size() + f]);
    qfpsim::write_sweep_csv(out, rows);

    json inputs = json::object();
    if (params.contains("stats_csv") && !params.at("stats_csv").is_null()) {
        const std::string p = params.at("stats_csv").get<std::string>();
        inputs[p] = params.at("stats_csv_digest").get<std::string>();
    }
    write_manifest(manifest_path, "sweep", params, inputs, {out});
}

void run_stats(const json& params, const std::string& manifest_path) {
    const std::string in_path = params.at("measurements").get<std::string>();
    const std::string prefix = params.at("out_prefix").get<std::string>();
    const int bins = params.at("bins").get<int>();

    const qfpsim::MeasurementSet ms = qfpsim::read_measurements_csv(in_path);
    const qfpsim::MeasurementStats st = qfpsim::compute_stats(ms);
    const std::string table_path = prefix + "_table.csv";
    const std::string hist_on_path = prefix + "_hist_on.csv";
    const std::string hist_off_path = prefix + "_hist_off.csv";
    qfpsim::write_stats_csv(table_path, st);
    qfpsim::write_histogram_csv(hist_on_path, qfpsim::histogram(ms, qfpsim::MemState::on, bins));
    qfpsim::write_histogram_csv(hist_off_path,
                                qfpsim::histogram(ms, qfpsim::MemState::off, bins));

    json inputs{{in_path, qfpsim::file_digest(in_path)}};
    write_manifest(manifest_path, "stats", params, inputs,
                   {table_path, hist_on_path, hist_off_path});
}

void run_rerun(const std::string& manifest_path, bool verify) {
    json m;
    try {
        m = json::parse(qfpsim::read_text_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw qfpsim::InvalidParamError("manifest '" + manifest_path +
                                        "' is not valid JSON: " + e.what());
    }
    const std::string command = m.at("command").get<std::string>();
    const json params = m.at("params");
    const json inputs = m.at("inputs");

    if (m.at("version").get<std::string>() != qfpsim::kVersion)
        std::cerr << "qfpsim: note: manifest was written by version "
                  << m.at("version").get<std::string>() << ", this tool is " << qfpsim::kVersion
                  << "\n";

    if (command == "sim") {
        check_input_digest(inputs, params.at("netlist").get<std::string>());
        run_sim(params, manifest_path);
    } else if (command == "compare") {
        run_compare(params, manifest_path);
    } else if (command == "sweep") {
        run_sweep(params, manifest_path);
    } else if (command == "stats") {
        check_input_digest(inputs, params.at("measurements").get<std::string>());
        run_stats(params, manifest_path);
    } else {
        throw qfpsim::InvalidParamError("manifest names unknown command '" + command + "'");
    }

    if (verify) {
        const json fresh = json::parse(qfpsim::read_text_file(manifest_path));
        if (fresh.at("outputs") != m.at("outputs"))
            throw qfpsim::Error(
                "rerun outputs differ from the recorded digests (nondeterminism?)");
    }
}

// ---------------------------------------------------------------------------
// Exit-code mapping
// ---------------------------------------------------------------------------

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const qfpsim::IoError*>(&e)) return 3;
    if (dynamic_cast<const qfpsim::ParseError*>(&e) ||
        dynamic_cast<const qfpsim::DanglingNodeError*>(&e) ||
        dynamic_cast<const qfpsim::InvalidParamError*>(&e) ||
        dynamic_cast<const qfpsim::DomainError*>(&e) ||
        dynamic_cast<const qfpsim::InvalidStatsError*>(&e) ||
        dynamic_cast<const qfpsim::EmptyStateError*>(&e) ||
        dynamic_cast<const qfpsim::SpanMismatchError*>(&e) ||
        dynamic_cast<const qfpsim::MissingSignalError*>(&e) ||
        dynamic_cast<const qfpsim::SpanTooShortError*>(&e))
        return 1;
    return 2;  // solver failures and anything unexpected
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transient simulator for packaged memristor synapse cells"};
    app.set_version_flag("--version", std::string(qfpsim::kVersion));
    app.require_subcommand(1);

    // --- sim -------------------------------------------------------------
    auto* sim = app.add_subcommand("sim", "Run a transient over a netlist file");
    std::string sim_netlist, sim_out, sim_tstop;
    SolverFlags sim_solver;
    std::uint64_t sim_seed = 0;
    sim->add_option("netlist", sim_netlist, "Netlist file")->required();
    sim->add_option("--out", sim_out, "Output waveform CSV")->required();
    sim->add_option("--tstop", sim_tstop,
                    "Stop time [s], unit suffixes allowed; default from .tran");
    sim->add_option("--seed", sim_seed, "Run seed for stochastic devices")
        ->capture_default_str();
    add_solver_flags(sim, sim_solver);

    // --- compare ---------------------------------------------------------
    auto* cmp = app.add_subcommand("compare",
                                   "Packaged vs ideal cell at one operating point");
    std::string cmp_corner = "c1", cmp_ron, cmp_roff, cmp_freq, cmp_out;
    std::string cmp_pkg = "10,10,1.2n,25f", cmp_tau = "100n";
    double cmp_amplitude = 0.5, cmp_vt = 0.02;
    int cmp_cycles = 5;
    SolverFlags cmp_solver;
    std::uint64_t cmp_seed = 0;
    cmp->add_option("--corner", cmp_corner, "Corner label c1..c5")->capture_default_str();
    cmp->add_option("--ron", cmp_ron, "Explicit r_on [ohm] (overrides --corner)");
    cmp->add_option("--roff", cmp_roff, "Explicit r_off [ohm] (overrides --corner)");
    cmp->add_option("--freq", cmp_freq, "Pulse frequency [Hz], unit suffixes allowed")
        ->required();
    cmp->add_option("--amplitude", cmp_amplitude, "Plateau voltage [V], sign picks x0")
        ->capture_default_str();
    cmp->add_option("--pkg", cmp_pkg, "Package r1,r2,l,c (0 for l or c = ideal limit)")
        ->capture_default_str();
    cmp->add_option("--tau", cmp_tau, "Device time constant [s]")->capture_default_str();
    cmp->add_option("--vt", cmp_vt, "Device threshold sharpness [V]")->capture_default_str();
    cmp->add_option("--cycles", cmp_cycles, "Number of periods to simulate")
        ->capture_default_str();
    cmp->add_option("--seed", cmp_seed, "Run seed")->capture_default_str();
    cmp->add_option("--out", cmp_out, "Output comparison CSV")->required();
    add_solver_flags(cmp, cmp_solver);

    // --- sweep -----------------------------------------------------------
    auto* swp = app.add_subcommand("sweep", "Corner x frequency x amplitude error grid");
    std::string swp_stats_csv, swp_corners, swp_out;
    std::string swp_freqs = "10k,1meg,100meg,1g", swp_amplitudes = "0.5,-0.5";
    std::string swp_pkg = "10,10,1.2n,25f", swp_tau = "100n";
    double swp_vt = 0.02;
    int swp_cycles = 5;
    unsigned swp_workers = 0;
    SolverFlags swp_solver;
    std::uint64_t swp_seed = 0;
    swp->add_option("--stats-csv", swp_stats_csv,
                    "Derive corners from this measurement CSV");
    swp->add_option("--corners", swp_corners,
                    "Corner labels or r_on:r_off pairs (default: all five)");
    swp->add_option("--freqs", swp_freqs, "Frequency list [Hz]")->capture_default_str();
    swp->add_option("--amplitudes", swp_amplitudes, "Amplitude list [V]")
        ->capture_default_str();
    swp->add_option("--pkg", swp_pkg, "Package r1,r2,l,c")->capture_default_str();
    swp->add_option("--tau", swp_tau, "Device time constant [s]")->capture_default_str();
    swp->add_option("--vt", swp_vt, "Device threshold sharpness [V]")->capture_default_str();
    swp->add_option("--cycles", swp_cycles, "Averaging window in periods")
        ->capture_default_str();
    swp->add_option("--workers", swp_workers,
                    "Concurrent simulations (0 = QFPSIM_WORKERS env or all cores)")
        ->capture_default_str();
    swp->add_option("--seed", swp_seed, "Run seed")->capture_default_str();
    swp->add_option("--out", swp_out, "Output sweep CSV")->required();
    add_solver_flags(swp, swp_solver);

    // --- stats -----------------------------------------------------------
    auto* sts = app.add_subcommand("stats",
                                   "Aggregates and histograms from a measurement CSV");
    std::string sts_in, sts_prefix;
    int sts_bins = 10;
    sts->add_option("measurements", sts_in, "Measurement CSV (cycle,state,resistance_ohm)")
        ->required();
    sts->add_option("--bins", sts_bins, "Histogram bin count")->capture_default_str();
    sts->add_option("--out-prefix", sts_prefix, "Prefix for the three output CSVs")
        ->required();

    // --- rerun -----------------------------------------------------------
    auto* rr = app.add_subcommand("rerun", "Re-execute a run from its manifest");
    std::string rr_manifest;
    bool rr_verify = false;
    rr->add_option("manifest", rr_manifest, "Manifest JSON written by a previous run")
        ->required();
    rr->add_flag("--verify", rr_verify, "Fail if outputs differ from recorded digests");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            json params{{"netlist", sim_netlist},
                        {"tstop", sim_tstop.empty()
                                      ? json(nullptr)
                                      : json(parse_value(sim_tstop, "--tstop"))},
                        {"solver", solver_to_json(sim_solver)},
                        {"seed", sim_seed},
                        {"out", sim_out}};
            run_sim(params, sim_out + ".manifest.json");
        } else if (cmp->parsed()) {
            if (cmp_ron.empty() != cmp_roff.empty())
                throw qfpsim::InvalidParamError("--ron and --roff must be given together");
            qfpsim::Corner corner;
            if (!cmp_ron.empty()) {
                corner.label = "custom";
                corner.r_on = parse_value(cmp_ron, "--ron");
                corner.r_off = parse_value(cmp_roff, "--roff");
                if (!(corner.r_on > 0.0) || !(corner.r_on < corner.r_off))
                    throw qfpsim::InvalidParamError("need 0 < r_on < r_off");
            } else {
                const auto resolved = resolve_corners(qfpsim::default_corner_set(), cmp_corner);
                if (resolved.size() != 1)
                    throw qfpsim::InvalidParamError("--corner expects a single label");
                corner = resolved.front();
            }
            const qfpsim::PackageParams pkg = parse_pkg(cmp_pkg);
            json params{
                {"corner", corner.label},
                {"device",
                 {{"r_on", corner.r_on},
                  {"r_off", corner.r_off},
                  {"tau_c", parse_value(cmp_tau, "--tau")},
                  {"v_t", cmp_vt}}},
                {"frequency", parse_value(cmp_freq, "--freq")},
                {"amplitude", cmp_amplitude},
                {"pkg", {{"r1", pkg.r1}, {"r2", pkg.r2}, {"l", pkg.l}, {"c", pkg.c}}},
                {"n_cycles", cmp_cycles},
                {"solver", solver_to_json(cmp_solver)},
                {"seed", cmp_seed},
                {"out", cmp_out}};
            run_compare(params, cmp_out + ".manifest.json");
        } else if (swp->parsed()) {
            qfpsim::CornerSet base;
            json stats_csv = nullptr, stats_digest = nullptr;
            if (!swp_stats_csv.empty()) {
                base = qfpsim::corners_from_stats(
                    qfpsim::compute_stats(qfpsim::read_measurements_csv(swp_stats_csv)));
                stats_csv = swp_stats_csv;
                stats_digest = qfpsim::file_digest(swp_stats_csv);
            } else {
                base = qfpsim::default_corner_set();
            }
            const qfpsim::CornerSet corners = resolve_corners(base, swp_corners);
            json corner_json = json::array();
            for (const auto& c : corners)
                corner_json.push_back(
                    {{"label", c.label}, {"r_on", c.r_on}, {"r_off", c.r_off}});
            const qfpsim::PackageParams pkg = parse_pkg(swp_pkg);
            json params{
                {"corners", corner_json},
                {"freqs", parse_value_list(swp_freqs, "--freqs")},
                {"amplitudes", parse_value_list(swp_amplitudes, "--amplitudes")},
                {"device", {{"tau_c", parse_value(swp_tau, "--tau")}, {"v_t", swp_vt}}},
                {"pkg", {{"r1", pkg.r1}, {"r2", pkg.r2}, {"l", pkg.l}, {"c", pkg.c}}},
                {"n_cycles", swp_cycles},
                {"workers", resolve_workers(swp_workers)},
                {"solver", solver_to_json(swp_solver)},
                {"seed", swp_seed},
                {"stats_csv", stats_csv},
                {"stats_csv_digest", stats_digest},
                {"out", swp_out}};
            run_sweep(params, swp_out + ".manifest.json");
        } else if (sts->parsed()) {
            json params{{"measurements", sts_in},
                        {"bins", sts_bins},
                        {"out_prefix", sts_prefix}};
            run_stats(params, sts_prefix + ".manifest.json");
        } else if (rr->parsed()) {
            run_rerun(rr_manifest, rr_verify);
        }
    } catch (const std::exception& e) {
        std::cerr << "qfpsim: error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
