#pragma once

#include "hmmsim/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hmmsim {

enum class NodeMode { micro, macro };

const char* to_string(NodeMode mode);

/// Rows sharing one layout. Values are row-major.
struct TraceSegment {
    LayoutPtr layout;
    std::vector<std::int64_t> ticks;
    std::vector<double> times;
    std::vector<NodeMode> modes;
    std::vector<double> values;

    std::size_t size() const noexcept { return times.size(); }
    std::span<const double> row(std::size_t i) const {
        const std::size_t n = layout->size();
        return std::span<const double>(values).subspan(i * n, n);
    }
};

/// Micro-step accounting for one schedule phase.
struct PhaseStats {
    std::string name;
    double t_start = 0.0;
    double t_end = 0.0;
    std::string mode;
    std::int64_t micro_steps = 0;        ///< every RK4 step taken in the phase
    std::int64_t macro_steps = 0;        ///< forward Euler jumps
    std::int64_t full_cycles = 0;        ///< HMM cycles with the configured H
    std::int64_t cycle_micro_steps = 0;  ///< RK4 steps inside full cycles
    std::int64_t cycle_ticks = 0;        ///< time advanced by full cycles, in units of h
    std::int64_t span_ticks = 0;         ///< phase length in units of h
};

/// Time-sorted state history with micro/macro markers. The layout may change
/// at events; each layout run is kept as its own segment.
class SimulationTrace {
public:
    /// Appends a node. Starts a new segment when the layout changes.
    void append(std::int64_t tick, double t, NodeMode mode, const LayoutPtr& layout,
                std::span<const double> values);
    /// Reserves room for `rows` more rows in the current segment.
    void reserve(std::size_t rows);

    std::size_t size() const noexcept;
    bool empty() const noexcept { return size() == 0; }
    const std::vector<TraceSegment>& segments() const noexcept { return segments_; }

    double front_time() const;
    double back_time() const;
    StateVector back_state() const;

    /// Union of all column names in order of first appearance.
    std::vector<std::string> columns() const;

    std::vector<PhaseStats>& phase_stats() noexcept { return stats_; }
    const std::vector<PhaseStats>& phase_stats() const noexcept { return stats_; }

    /// Set when the run stopped early; the rows recorded so far are kept.
    std::optional<std::string> failure;

private:
    std::vector<TraceSegment> segments_;
    std::vector<PhaseStats> stats_;
};

/// Writes `t,mode,<columns>` with every value at 17 significant digits.
/// Micro rows are emitted when tick % decimate == 0; macro rows always.
/// States absent from a row's layout are written as nan. A non-empty
/// `columns` restricts the output to those states, in that order.
void write_csv(const SimulationTrace& trace, std::ostream& out, std::int64_t decimate = 1,
               const std::vector<std::string>& columns = {});
void write_csv(const SimulationTrace& trace, const std::string& path, std::int64_t decimate = 1,
               const std::vector<std::string>& columns = {});

/// Parses a CSV written by write_csv. Row ticks are the row ordinals.
SimulationTrace read_csv(std::istream& in);
SimulationTrace read_csv(const std::string& path);

}  // namespace hmmsim
