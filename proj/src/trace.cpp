#include "hmmsim/trace.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hmmsim {

const char* to_string(NodeMode mode) {
    return mode == NodeMode::micro ? "micro" : "macro";
}

void SimulationTrace::append(std::int64_t tick, double t, NodeMode mode, const LayoutPtr& layout,
                             std::span<const double> values) {
    if (values.size() != layout->size()) throw ShapeError("trace row does not match its layout");
    if (!segments_.empty() && !segments_.back().times.empty() && t < segments_.back().times.back()) {
        throw ConfigurationError("trace rows must be appended in time order");
    }
    if (segments_.empty() || (segments_.back().layout != layout &&
                              !(*segments_.back().layout == *layout))) {
        segments_.push_back(TraceSegment{layout, {}, {}, {}, {}});
    }
    auto& seg = segments_.back();
    seg.ticks.push_back(tick);
    seg.times.push_back(t);
    seg.modes.push_back(mode);
    seg.values.insert(seg.values.end(), values.begin(), values.end());
}

void SimulationTrace::reserve(std::size_t rows) {
    if (segments_.empty()) return;
    auto& seg = segments_.back();
    const std::size_t total = seg.size() + rows;
    seg.ticks.reserve(total);
    seg.times.reserve(total);
    seg.modes.reserve(total);
    seg.values.reserve(total * seg.layout->size());
}

std::size_t SimulationTrace::size() const noexcept {
    std::size_t n = 0;
    for (const auto& s : segments_) n += s.size();
    return n;
}

double SimulationTrace::front_time() const {
    if (empty()) throw ComparisonError("trace is empty");
    return segments_.front().times.front();
}

double SimulationTrace::back_time() const {
    if (empty()) throw ComparisonError("trace is empty");
    return segments_.back().times.back();
}

StateVector SimulationTrace::back_state() const {
    if (empty()) throw ComparisonError("trace is empty");
    const auto& seg = segments_.back();
    auto row = seg.row(seg.size() - 1);
    return StateVector(seg.layout, std::vector<double>(row.begin(), row.end()));
}

std::vector<std::string> SimulationTrace::columns() const {
    std::vector<std::string> cols;
    std::unordered_map<std::string, bool> seen;
    for (const auto& seg : segments_) {
        for (const auto& name : seg.layout->names()) {
            if (seen.emplace(name, true).second) cols.push_back(name);
        }
    }
    return cols;
}

// -----------------------------------------------------------------------------
// CSV
// -----------------------------------------------------------------------------

namespace {

void append_number(std::string& line, double v) {
    char buf[40];
    if (std::isnan(v)) {
        line += "nan";
        return;
    }
    const int len = std::snprintf(buf, sizeof(buf), "%.16e", v);
    line.append(buf, static_cast<std::size_t>(len));
}

double parse_number(std::string_view field, int line_no) {
    if (field == "nan") return std::nan("");
    std::string tmp(field);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end == tmp.c_str() || *end != '\0') {
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + tmp + "'", line_no);
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

void write_csv(const SimulationTrace& trace, std::ostream& out, std::int64_t decimate,
               const std::vector<std::string>& columns) {
    if (decimate < 1) throw ParameterError("decimation factor must be >= 1");
    const auto cols = columns.empty() ? trace.columns() : columns;
    std::unordered_map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < cols.size(); ++i) col_index.emplace(cols[i], i);

    std::string line = "t,mode";
    for (const auto& c : cols) {
        line += ',';
        line += c;
    }
    line += '\n';
    out << line;

    std::vector<double> row(cols.size());
    for (const auto& seg : trace.segments()) {
        // Layout index -> output column, npos for states not written.
        std::vector<std::size_t> map(seg.layout->size(), std::string::npos);
        for (std::size_t j = 0; j < map.size(); ++j) {
            if (auto it = col_index.find(seg.layout->name(j)); it != col_index.end()) map[j] = it->second;
        }
        for (std::size_t i = 0; i < seg.size(); ++i) {
            if (seg.modes[i] == NodeMode::micro && seg.ticks[i] % decimate != 0) continue;
            std::fill(row.begin(), row.end(), std::nan(""));
            auto values = seg.row(i);
            for (std::size_t j = 0; j < map.size(); ++j) {
                if (map[j] != std::string::npos) row[map[j]] = values[j];
            }
            line.clear();
            append_number(line, seg.times[i]);
            line += ',';
            line += to_string(seg.modes[i]);
            for (double v : row) {
                line += ',';
                append_number(line, v);
            }
            line += '\n';
            out << line;
        }
    }
}

void write_csv(const SimulationTrace& trace, const std::string& path, std::int64_t decimate,
               const std::vector<std::string>& columns) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot open '" + path + "' for writing");
    write_csv(trace, out, decimate, columns);
    if (!out) throw ConfigurationError("failed writing '" + path + "'");
}

SimulationTrace read_csv(std::istream& in) {
    std::string line;
    int line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty CSV", line_no);
    auto header = split(line);
    if (header.size() < 2 || header[0] != "t" || header[1] != "mode") {
        throw ParseError("CSV header must start with t,mode", line_no);
    }
    std::vector<std::string> cols;
    for (std::size_t i = 2; i < header.size(); ++i) cols.emplace_back(header[i]);

    SimulationTrace trace;
    std::unordered_map<std::string, LayoutPtr> layouts;
    std::vector<double> row(cols.size());
    std::vector<double> present;
    std::int64_t ordinal = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != cols.size() + 2) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(cols.size() + 2) + " fields",
                             line_no);
        }
        const double t = parse_number(fields[0], line_no);
        NodeMode mode;
        if (fields[1] == "micro") {
            mode = NodeMode::micro;
        } else if (fields[1] == "macro") {
            mode = NodeMode::macro;
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": bad mode", line_no);
        }
        std::string key;
        std::vector<std::string> names;
        present.clear();
        for (std::size_t j = 0; j < cols.size(); ++j) {
            row[j] = parse_number(fields[j + 2], line_no);
            if (!std::isnan(row[j])) {
                key += std::to_string(j) + ';';
                names.push_back(cols[j]);
                present.push_back(row[j]);
            }
        }
        auto it = layouts.find(key);
        if (it == layouts.end()) it = layouts.emplace(key, make_layout(names)).first;
        trace.append(ordinal++, t, mode, it->second, present);
    }
    return trace;
}

SimulationTrace read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open '" + path + "'");
    return read_csv(in);
}

}  // namespace hmmsim
