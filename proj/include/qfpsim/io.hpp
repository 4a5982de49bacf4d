#pragma once

// File I/O: CSV emission for waveforms, sweeps, histograms, and statistics
// tables; measurement CSV parsing; and a small streaming digest used by run
// manifests to fingerprint inputs and outputs.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qfpsim/analysis.hpp"
#include "qfpsim/engine.hpp"
#include "qfpsim/errors.hpp"
#include "qfpsim/netlist.hpp"

namespace qfpsim {

// ---------------------------------------------------------------------------
// Plain file helpers
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + path + "'");
}

/// FNV-1a 64-bit digest of a file's bytes, hex-encoded.
[[nodiscard]] inline std::string file_digest(const std::string& path) {
    const std::string bytes = read_text_file(path);
    const std::uint64_t h = detail::fnv1a64(bytes);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// Header `t,<signal names>`; values at full double precision.
[[nodiscard]] inline std::string waveform_csv(const Waveform& wf) {
    std::string out = "t";
    for (const auto& n : wf.names) out += "," + n;
    out += "\n";
    for (std::size_t k = 0; k < wf.t.size(); ++k) {
        out += detail::format_g17(wf.t[k]);
        for (const auto& col : wf.cols) out += "," + detail::format_g17(col[k]);
        out += "\n";
    }
    return out;
}

inline void write_waveform_csv(const std::string& path, const Waveform& wf) {
    write_text_file(path, waveform_csv(wf));
}

[[nodiscard]] inline std::string sweep_csv(const std::vector<ErrorSummary>& rows) {
    std::string out = "frequency_hz,corner,amplitude_v,mean_abs_a,signed_mean_a,std_a,max_abs_a,n_cycles\n";
    for (const auto& r : rows) {
        out += detail::format_g17(r.frequency) + "," + r.corner + "," +
               detail::format_g17(r.amplitude) + "," + detail::format_g17(r.mean_abs) + "," +
               detail::format_g17(r.signed_mean) + "," + detail::format_g17(r.std_dev) + "," +
               detail::format_g17(r.max_abs) + "," + std::to_string(r.n_cycles) + "\n";
    }
    return out;
}

inline void write_sweep_csv(const std::string& path, const std::vector<ErrorSummary>& rows) {
    write_text_file(path, sweep_csv(rows));
}

[[nodiscard]] inline std::string histogram_csv(const std::vector<HistogramBin>& bins) {
    std::string out = "bin_lo_ohm,bin_hi_ohm,count\n";
    for (const auto& b : bins)
        out += detail::format_g17(b.lo) + "," + detail::format_g17(b.hi) + "," +
               std::to_string(b.count) + "\n";
    return out;
}

inline void write_histogram_csv(const std::string& path, const std::vector<HistogramBin>& bins) {
    write_text_file(path, histogram_csv(bins));
}

/// Aggregate table, OFF state first to match the reference presentation.
[[nodiscard]] inline std::string stats_csv(const MeasurementStats& st) {
    auto row = [](const char* name, const StateStats& s) {
        return std::string(name) + "," + detail::format_g17(s.mean) + "," +
               detail::format_g17(s.max) + "," + detail::format_g17(s.min) + "," +
               std::to_string(s.count) + "\n";
    };
    return "state,mean_ohm,max_ohm,min_ohm,count\n" + row("off", st.off) + row("on", st.on);
}

inline void write_stats_csv(const std::string& path, const MeasurementStats& st) {
    write_text_file(path, stats_csv(st));
}

/// Comparison trace from compare_table(): `t,v_in,i_packaged,i_ideal,delta_i`.
inline void write_compare_csv(const std::string& path, const Waveform& table) {
    std::string out = "t";
    for (const auto& n : table.names) out += "," + n;
    out += "\n";
    for (std::size_t k = 0; k < table.t.size(); ++k) {
        out += detail::format_g17(table.t[k]);
        for (const auto& col : table.cols) out += "," + detail::format_g17(col[k]);
        out += "\n";
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Measurement CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kMeasurementHeader = "cycle,state,resistance_ohm";

[[nodiscard]] inline std::string measurements_csv(const MeasurementSet& ms) {
    std::string out = std::string(kMeasurementHeader) + "\n";
    for (const auto& r : ms.records)
        out += std::to_string(r.cycle) + "," + (r.state == MemState::on ? "on" : "off") + "," +
               detail::format_g17(r.resistance) + "\n";
    return out;
}

inline void write_measurements_csv(const std::string& path, const MeasurementSet& ms) {
    write_text_file(path, measurements_csv(ms));
}

namespace detail {

[[nodiscard]] inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace detail

/// Strict reader for the `cycle,state,resistance_ohm` format. File access
/// problems raise IoError; malformed content raises ParseError carrying the
/// 1-based file line (header = line 1).
[[nodiscard]] inline MeasurementSet read_measurements_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    MeasurementSet ms;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != kMeasurementHeader)
                throw ParseError(line_no, "expected header '" + std::string(kMeasurementHeader) +
                                              "' in " + path);
            continue;
        }
        if (line.empty()) continue;
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != 3)
            throw ParseError(line_no,
                             "expected 3 fields, got " + std::to_string(fields.size()));

        MeasurementRecord rec;
        errno = 0;
        char* end = nullptr;
        const long cyc = std::strtol(fields[0].c_str(), &end, 10);
        if (end == fields[0].c_str() || *end != '\0' || errno != 0 || cyc < 0)
            throw ParseError(line_no,
                             "cycle must be a nonnegative integer, got '" + fields[0] + "'");
        rec.cycle = static_cast<int>(cyc);

        if (fields[1] == "on")
            rec.state = MemState::on;
        else if (fields[1] == "off")
            rec.state = MemState::off;
        else
            throw ParseError(line_no, "state must be 'on' or 'off', got '" + fields[1] + "'");

        errno = 0;
        end = nullptr;
        const double res = std::strtod(fields[2].c_str(), &end);
        if (end == fields[2].c_str() || *end != '\0' || !(res > 0.0) || !std::isfinite(res))
            throw ParseError(line_no,
                             "resistance must be a positive number, got '" + fields[2] + "'");
        rec.resistance = res;
        ms.records.push_back(rec);
    }
    return ms;
}

} // namespace qfpsim
