#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace repulse {

/// Process-wide worker count for parallel_for; 1 means serial. Set once at
/// startup (the CLI wires --threads / REPULSE_THREADS here).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
/// worker; each index is processed exactly once, so results are identical to
/// the serial loop whenever fn(i) writes only to slot i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// One double formatted with 17 significant digits (round-trip exact).
std::string format_g17(double x);

/// Rectangular CSV writer; every numeric cell goes through format_g17.
struct CsvWriter {
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(const std::vector<double>& values);
    void add_row_mixed(const std::vector<std::string>& cells);
    void write(const std::string& path) const;
    std::string to_string() const;

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace repulse
