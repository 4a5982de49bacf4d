// CSV emission/parsing, file digests, and end-to-end runs of the command-line
// tool (spawned as a subprocess, exit codes and artifacts checked).

#include <catch2/catch_amalgamated.hpp>

#include <qfpsim/analysis.hpp>
#include <qfpsim/io.hpp>
#include <qfpsim/netlist.hpp>
#include <qfpsim/version.hpp>

#include "json.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;
using Catch::Matchers::WithinRel;

namespace {

std::string data_file(const std::string& name) {
    return std::string(QFPSIM_DATA_DIR) + "/" + name;
}

/// Self-cleaning scratch directory for artifacts written by a test case.
struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/qfpsim_io_XXXXXX";
        char* p = mkdtemp(tmpl);
        REQUIRE(p != nullptr);
        path = p;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    [[nodiscard]] std::string file(const std::string& name) const { return path + "/" + name; }
};

/// Runs the CLI binary with the given argument string and returns its exit
/// code. Output is discarded; the tests inspect the files it writes.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(QFPSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

/// Extracts one named column from CSV text whose first line is the header.
std::vector<double> csv_column(const std::string& text, const std::string& name) {
    const auto lines = lines_of(text);
    REQUIRE(!lines.empty());
    const auto header = fields_of(lines[0]);
    std::size_t idx = header.size();
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) idx = k;
    REQUIRE(idx < header.size());
    std::vector<double> out;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto f = fields_of(lines[k]);
        REQUIRE(f.size() == header.size());
        out.push_back(std::strtod(f[idx].c_str(), nullptr));
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Digests
// ---------------------------------------------------------------------------

TEST_CASE("file_digest matches FNV-1a 64 reference vectors") {
    TempDir td;

    qfpsim::write_text_file(td.file("empty.bin"), "");
    CHECK(qfpsim::file_digest(td.file("empty.bin")) == "cbf29ce484222325");

    qfpsim::write_text_file(td.file("abc.bin"), "abc");
    CHECK(qfpsim::file_digest(td.file("abc.bin")) == "e71fa2190541574b");

    qfpsim::write_text_file(td.file("abc2.bin"), "abd");
    CHECK(qfpsim::file_digest(td.file("abc2.bin")) != qfpsim::file_digest(td.file("abc.bin")));

    CHECK_THROWS_AS(qfpsim::file_digest(td.file("does_not_exist")), qfpsim::IoError);
}

// ---------------------------------------------------------------------------
// Measurement CSV
// ---------------------------------------------------------------------------

TEST_CASE("measurement CSV round-trips through write and read exactly") {
    const qfpsim::MeasurementSet ms = qfpsim::synthetic_measurements();
    REQUIRE(!ms.records.empty());

    TempDir td;
    const std::string path = td.file("meas.csv");
    qfpsim::write_measurements_csv(path, ms);

    const qfpsim::MeasurementSet back = qfpsim::read_measurements_csv(path);
    REQUIRE(back.records.size() == ms.records.size());
    for (std::size_t k = 0; k < ms.records.size(); ++k) {
        CHECK(back.records[k].cycle == ms.records[k].cycle);
        CHECK(back.records[k].state == ms.records[k].state);
        CHECK(back.records[k].resistance == ms.records[k].resistance);
    }
}

TEST_CASE("shipped synthetic measurement file matches the generator output") {
    const std::string shipped = qfpsim::read_text_file(data_file("measurements_synthetic.csv"));
    CHECK(shipped == qfpsim::measurements_csv(qfpsim::synthetic_measurements()));
}

TEST_CASE("measurement reader rejects malformed content with line numbers") {
    TempDir td;
    const std::string path = td.file("bad.csv");
    auto with = [&](const std::string& text) {
        qfpsim::write_text_file(path, text);
        return path;
    };

    SECTION("wrong header") {
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,ohms\n0,on,100\n")),
            qfpsim::ParseError, MessageMatches(ContainsSubstring("line 1")));
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,ohms\n")), qfpsim::ParseError,
            MessageMatches(ContainsSubstring("expected header")));
    }
    SECTION("wrong field count carries the offending line number") {
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(
                with("cycle,state,resistance_ohm\n0,on,100\n1,off\n")),
            qfpsim::ParseError, MessageMatches(ContainsSubstring("line 3")));
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(
                with("cycle,state,resistance_ohm\n0,on,100,7\n")),
            qfpsim::ParseError,
            MessageMatches(ContainsSubstring("expected 3 fields, got 4")));
    }
    SECTION("non-integer or negative cycle") {
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,resistance_ohm\nx,on,100\n")),
            qfpsim::ParseError,
            MessageMatches(ContainsSubstring("cycle must be a nonnegative integer")));
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,resistance_ohm\n-1,on,100\n")),
            qfpsim::ParseError, MessageMatches(ContainsSubstring("line 2")));
    }
    SECTION("unknown state token") {
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,resistance_ohm\n0,banana,100\n")),
            qfpsim::ParseError,
            MessageMatches(ContainsSubstring("state must be 'on' or 'off'")));
    }
    SECTION("non-positive or non-numeric resistance") {
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,resistance_ohm\n0,on,zero\n")),
            qfpsim::ParseError,
            MessageMatches(ContainsSubstring("resistance must be a positive number")));
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,resistance_ohm\n0,on,0\n")),
            qfpsim::ParseError,
            MessageMatches(ContainsSubstring("resistance must be a positive number")));
        REQUIRE_THROWS_MATCHES(
            qfpsim::read_measurements_csv(with("cycle,state,resistance_ohm\n0,on,-5\n")),
            qfpsim::ParseError, MessageMatches(ContainsSubstring("line 2")));
    }
    SECTION("CRLF endings and blank lines are tolerated") {
        const auto ms = qfpsim::read_measurements_csv(
            with("cycle,state,resistance_ohm\r\n\r\n0,on,323.4\r\n\n1,off,2924.655\r\n"));
        REQUIRE(ms.records.size() == 2);
        CHECK(ms.records[0].cycle == 0);
        CHECK(ms.records[0].state == qfpsim::MemState::on);
        CHECK(ms.records[0].resistance == 323.4);
        CHECK(ms.records[1].state == qfpsim::MemState::off);
        CHECK(ms.records[1].resistance == 2924.655);
    }
    SECTION("missing file raises IoError, not ParseError") {
        CHECK_THROWS_AS(qfpsim::read_measurements_csv(td.file("nope.csv")), qfpsim::IoError);
    }
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

TEST_CASE("waveform CSV uses a t-first header and full-precision values") {
    qfpsim::Waveform wf;
    wf.t = {0.0, 1e-9};
    wf.names = {"v(a)", "i(L1)"};
    wf.cols = {{0.5, 0.25}, {1.0 / 3.0, -2.5e-6}};

    const std::string expected = "t,v(a),i(L1)\n" + g17(0.0) + "," + g17(0.5) + "," +
                                 g17(1.0 / 3.0) + "\n" + g17(1e-9) + "," + g17(0.25) + "," +
                                 g17(-2.5e-6) + "\n";
    CHECK(qfpsim::waveform_csv(wf) == expected);

    // Full precision means every double survives a text round-trip bit-exactly.
    for (double v : {1.0 / 3.0, 323.4, 2924.655, 6.62607015e-34, -0.1, 1e308})
        CHECK(std::strtod(g17(v).c_str(), nullptr) == v);
}

TEST_CASE("sweep CSV lists one summary row per point") {
    qfpsim::ErrorSummary row;
    row.frequency = 1e6;
    row.corner = "c2";
    row.amplitude = -0.5;
    row.mean_abs = 7.5e-8;
    row.signed_mean = -1.2e-8;
    row.std_dev = 3.0e-8;
    row.max_abs = 2.1e-7;
    row.n_cycles = 5;

    const auto lines = lines_of(qfpsim::sweep_csv({row}));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] ==
          "frequency_hz,corner,amplitude_v,mean_abs_a,signed_mean_a,std_a,max_abs_a,n_cycles");
    const auto f = fields_of(lines[1]);
    REQUIRE(f.size() == 8);
    CHECK(f[0] == g17(1e6));
    CHECK(f[1] == "c2");
    CHECK(f[2] == g17(-0.5));
    CHECK(f[3] == g17(7.5e-8));
    CHECK(f[4] == g17(-1.2e-8));
    CHECK(f[5] == g17(3.0e-8));
    CHECK(f[6] == g17(2.1e-7));
    CHECK(f[7] == "5");
}

TEST_CASE("histogram CSV emits lo/hi/count rows") {
    const std::vector<qfpsim::HistogramBin> bins = {{1.0, 2.5, 2}, {2.5, 4.0, 2}};
    CHECK(qfpsim::histogram_csv(bins) == "bin_lo_ohm,bin_hi_ohm,count\n" + g17(1.0) + "," +
                                             g17(2.5) + ",2\n" + g17(2.5) + "," + g17(4.0) +
                                             ",2\n");
}

TEST_CASE("stats CSV puts the OFF row before the ON row") {
    qfpsim::MeasurementStats st;
    st.on = {300.0, 512.0, 64.0, 10};
    st.off = {2900.0, 7682.0, 1432.0, 12};
    const auto lines = lines_of(qfpsim::stats_csv(st));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "state,mean_ohm,max_ohm,min_ohm,count");
    CHECK(fields_of(lines[1])[0] == "off");
    CHECK(fields_of(lines[2])[0] == "on");
    CHECK(fields_of(lines[1])[4] == "12");
    CHECK(fields_of(lines[2])[4] == "10");
    CHECK(std::strtod(fields_of(lines[1])[1].c_str(), nullptr) == 2900.0);
    CHECK(std::strtod(fields_of(lines[2])[2].c_str(), nullptr) == 512.0);
}

// ---------------------------------------------------------------------------
// CLI: sim
// ---------------------------------------------------------------------------

TEST_CASE("sim subcommand writes a waveform and a manifest sidecar") {
    TempDir td;
    const std::string netlist = data_file("rl_step.cir");
    const std::string out = td.file("wf.csv");

    REQUIRE(run_cli("sim " + netlist + " --out " + out) == 0);

    // RL step (R=20, tau=60 ps) held for 8 tau: i(L1) ends within 0.5% of 25 mA.
    const std::string csv = qfpsim::read_text_file(out);
    const auto il = csv_column(csv, "i(L1)");
    REQUIRE(il.size() > 50);
    CHECK_THAT(il.back(), WithinRel(0.025, 5e-3));
    const auto t = csv_column(csv, "t");
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 480e-12);

    const std::string man_path = out + ".manifest.json";
    const auto man = nlohmann::json::parse(qfpsim::read_text_file(man_path));
    CHECK(man.at("command").get<std::string>() == "sim");
    CHECK(man.at("version").get<std::string>() == std::string(qfpsim::kVersion));
    CHECK(man.at("inputs").at(netlist).get<std::string>() == qfpsim::file_digest(netlist));
    CHECK(man.at("outputs").at(out).get<std::string>() == qfpsim::file_digest(out));
}

TEST_CASE("CLI failures map to the documented exit codes") {
    TempDir td;
    const std::string out = td.file("x.csv");

    SECTION("missing input file is an I/O failure (3)") {
        CHECK(run_cli("sim " + td.file("missing.cir") + " --out " + out) == 3);
        CHECK(run_cli("stats " + td.file("missing.csv") + " --out-prefix " + td.file("p")) == 3);
        CHECK(run_cli("rerun " + td.file("missing.manifest.json")) == 3);
    }
    SECTION("malformed input content is a usage failure (1)") {
        qfpsim::write_text_file(td.file("bad.cir"), "t\nR1 1 10\n.tran 1n\n.end\n");
        CHECK(run_cli("sim " + td.file("bad.cir") + " --out " + out) == 1);

        qfpsim::write_text_file(td.file("dangling.cir"),
                                "t\nV1 in 0 DC 1\nR1 in a 1k\nR2 b 0 1k\n.tran 1n\n.end\n");
        CHECK(run_cli("sim " + td.file("dangling.cir") + " --out " + out) == 1);

        qfpsim::write_text_file(td.file("bad.csv"), "cycle,state,resistance_ohm\n0,on,x\n");
        CHECK(run_cli("stats " + td.file("bad.csv") + " --out-prefix " + td.file("p")) == 1);
    }
    SECTION("invalid parameters are usage failures (1)") {
        CHECK(run_cli("compare --corner c9 --freq 1meg --out " + out) == 1);
        CHECK(run_cli("compare --corner c1 --freq 1meg --pkg 10,10 --out " + out) == 1);
        CHECK(run_cli("compare --ron 400 --freq 1meg --out " + out) == 1);
        CHECK(run_cli("sweep --corners c1 --freqs 0 --out " + out) == 1);
    }
    SECTION("solver breakdown is a numerical failure (2)") {
        CHECK(run_cli("sim " + data_file("rl_step.cir") + " --out " + out +
                      " --reltol 1e-300 --abstol-v 1e-300 --abstol-i 1e-300") == 2);
    }
}

// ---------------------------------------------------------------------------
// CLI: compare
// ---------------------------------------------------------------------------

TEST_CASE("compare subcommand emits the five-column comparison table") {
    TempDir td;
    const std::string out = td.file("cmp.csv");
    REQUIRE(run_cli("compare --corner c1 --freq 1meg --cycles 1 --out " + out) == 0);

    const std::string csv = qfpsim::read_text_file(out);
    const auto lines = lines_of(csv);
    REQUIRE(lines.size() > 100);
    CHECK(lines[0] == "t,v_in,i_packaged,i_ideal,delta_i");

    // delta_i must be the elementwise difference of the two current columns.
    const auto ip = csv_column(csv, "i_packaged");
    const auto ii = csv_column(csv, "i_ideal");
    const auto di = csv_column(csv, "delta_i");
    REQUIRE(ip.size() == di.size());
    for (std::size_t k = 0; k < di.size(); k += 97)
        CHECK_THAT(di[k], Catch::Matchers::WithinAbs(ip[k] - ii[k], 1e-18));

    const auto man = nlohmann::json::parse(qfpsim::read_text_file(out + ".manifest.json"));
    CHECK(man.at("command").get<std::string>() == "compare");
    CHECK(man.at("outputs").at(out).get<std::string>() == qfpsim::file_digest(out));
}

TEST_CASE("compare with --pkg 10,10,0,0 collapses the packaged/ideal delta") {
    TempDir td;
    const std::string out = td.file("deg.csv");
    REQUIRE(run_cli("compare --corner c1 --freq 1meg --cycles 1 --pkg 10,10,0,0 --out " + out) ==
            0);
    double worst = 0.0;
    for (double d : csv_column(qfpsim::read_text_file(out), "delta_i"))
        worst = std::max(worst, std::abs(d));
    CHECK(worst < 1e-8);
}

// ---------------------------------------------------------------------------
// CLI: sweep
// ---------------------------------------------------------------------------

TEST_CASE("sweep subcommand emits amplitude-innermost rows with a manifest") {
    TempDir td;
    const std::string out = td.file("sw.csv");
    REQUIRE(run_cli("sweep --corners c1 --freqs 1meg --cycles 1 --out " + out) == 0);

    const std::string csv = qfpsim::read_text_file(out);
    const auto lines = lines_of(csv);
    REQUIRE(lines.size() == 3); // header + default amplitudes 0.5 and -0.5
    const auto r0 = fields_of(lines[1]);
    const auto r1 = fields_of(lines[2]);
    CHECK(std::strtod(r0[0].c_str(), nullptr) == 1e6);
    CHECK(std::strtod(r1[0].c_str(), nullptr) == 1e6);
    CHECK(r0[1] == "c1");
    CHECK(r1[1] == "c1");
    CHECK(std::strtod(r0[2].c_str(), nullptr) == 0.5);
    CHECK(std::strtod(r1[2].c_str(), nullptr) == -0.5);
    for (const auto& r : {r0, r1}) {
        const double mean_abs = std::strtod(r[3].c_str(), nullptr);
        const double max_abs = std::strtod(r[6].c_str(), nullptr);
        CHECK(mean_abs > 0.0);
        CHECK(max_abs >= mean_abs);
        CHECK(r[7] == "1");
    }

    const auto man = nlohmann::json::parse(qfpsim::read_text_file(out + ".manifest.json"));
    CHECK(man.at("command").get<std::string>() == "sweep");
}

TEST_CASE("sweep accepts explicit ron:roff corner tokens") {
    TempDir td;
    const std::string out = td.file("sw2.csv");
    REQUIRE(run_cli("sweep --corners 323.4:2924.655 --freqs 1meg --amplitudes 0.5 --cycles 1"
                    " --out " +
                    out) == 0);
    const auto lines = lines_of(qfpsim::read_text_file(out));
    REQUIRE(lines.size() == 2);
    CHECK_THAT(lines[1], ContainsSubstring("323.4:2924.655"));
}

// ---------------------------------------------------------------------------
// CLI: stats
// ---------------------------------------------------------------------------

TEST_CASE("stats subcommand writes the aggregate table and both histograms") {
    TempDir td;
    const std::string prefix = td.file("agg");
    REQUIRE(run_cli("stats " + data_file("measurements_synthetic.csv") + " --out-prefix " +
                    prefix) == 0);

    const auto table = lines_of(qfpsim::read_text_file(prefix + "_table.csv"));
    REQUIRE(table.size() == 3);
    CHECK(table[0] == "state,mean_ohm,max_ohm,min_ohm,count");
    const auto off = fields_of(table[1]);
    const auto on = fields_of(table[2]);
    REQUIRE(off[0] == "off");
    REQUIRE(on[0] == "on");
    CHECK(std::strtod(off[1].c_str(), nullptr) == 2924.655);
    CHECK(std::strtod(off[2].c_str(), nullptr) == 7682.6);
    CHECK(std::strtod(off[3].c_str(), nullptr) == 1432.4);
    CHECK(off[4] == "64");
    CHECK(std::strtod(on[1].c_str(), nullptr) == 323.4);
    CHECK(std::strtod(on[2].c_str(), nullptr) == 512.03);
    CHECK(std::strtod(on[3].c_str(), nullptr) == 305.34);
    CHECK(on[4] == "64");

    // Ten default bins per state, counts summing to the per-state record count.
    for (const char* name : {"_hist_on.csv", "_hist_off.csv"}) {
        const auto hist = lines_of(qfpsim::read_text_file(prefix + name));
        REQUIRE(hist.size() == 11);
        CHECK(hist[0] == "bin_lo_ohm,bin_hi_ohm,count");
        long total = 0;
        for (std::size_t k = 1; k < hist.size(); ++k)
            total += std::strtol(fields_of(hist[k])[2].c_str(), nullptr, 10);
        CHECK(total == 64);
    }

    const auto man = nlohmann::json::parse(qfpsim::read_text_file(prefix + ".manifest.json"));
    CHECK(man.at("command").get<std::string>() == "stats");
    CHECK(man.at("outputs").size() == 3);
}

// ---------------------------------------------------------------------------
// CLI: rerun
// ---------------------------------------------------------------------------

TEST_CASE("rerun reproduces recorded outputs byte for byte") {
    TempDir td;
    const std::string netlist = td.file("rl.cir");
    std::filesystem::copy_file(data_file("rl_step.cir"), netlist);
    const std::string out = td.file("wf.csv");
    const std::string man = out + ".manifest.json";

    REQUIRE(run_cli("sim " + netlist + " --out " + out) == 0);
    const std::string digest0 = qfpsim::file_digest(out);

    SECTION("re-execution restores a clobbered output") {
        qfpsim::write_text_file(out, "garbage\n");
        REQUIRE(run_cli("rerun " + man) == 0);
        CHECK(qfpsim::file_digest(out) == digest0);
    }
    SECTION("--verify passes when the run is reproducible") {
        CHECK(run_cli("rerun " + man + " --verify") == 0);
        CHECK(qfpsim::file_digest(out) == digest0);
    }
    SECTION("a modified input file is refused (1)") {
        qfpsim::write_text_file(netlist,
                                qfpsim::read_text_file(netlist) + "* trailing comment\n");
        CHECK(run_cli("rerun " + man) == 1);
    }
    SECTION("a manifest that is not JSON is refused (1)") {
        qfpsim::write_text_file(td.file("junk.manifest.json"), "not json");
        CHECK(run_cli("rerun " + td.file("junk.manifest.json")) == 1);
    }
}

// ---------------------------------------------------------------------------
// CLI: stochastic seeding
// ---------------------------------------------------------------------------

TEST_CASE("sim --seed controls stochastic reproducibility") {
    TempDir td;
    const std::string netlist = td.file("stoch.cir");
    qfpsim::write_text_file(netlist,
                            "stochastic cell under a drive pulse\n"
                            "V1 in 0 PULSE(0 0.5 0 1n 1n 48n 100n)\n"
                            "R1 in a 20\n"
                            "M1 a 0 X0=0.2 MODE=stoch N=1000\n"
                            ".tran 200n\n"
                            ".end\n");

    const std::string a = td.file("a.csv"), b = td.file("b.csv"), c = td.file("c.csv");
    REQUIRE(run_cli("sim " + netlist + " --seed 11 --out " + a) == 0);
    REQUIRE(run_cli("sim " + netlist + " --seed 11 --out " + b) == 0);
    REQUIRE(run_cli("sim " + netlist + " --seed 12 --out " + c) == 0);

    CHECK(qfpsim::file_digest(a) == qfpsim::file_digest(b));
    CHECK(qfpsim::file_digest(a) != qfpsim::file_digest(c));
}
