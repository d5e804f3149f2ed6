#include "repulse/util.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <vector>

namespace repulse {

namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_thread_count(std::size_t n) { g_threads.store(n == 0 ? 1 : n); }

std::size_t thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (std::size_t t = 0; t < workers; ++t) {
        const std::size_t lo = n * t / workers;
        const std::size_t hi = n * (t + 1) / workers;
        threads.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        });
    }
    for (std::thread& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(const std::vector<double>& values) {
    if (values.size() != header_.size())
        throw std::invalid_argument("csv row width does not match header");
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_g17(v));
    rows_.push_back(std::move(cells));
}

void CsvWriter::add_row_mixed(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size())
        throw std::invalid_argument("csv row width does not match header");
    rows_.push_back(cells);
}

std::string CsvWriter::to_string() const {
    std::string out;
    for (std::size_t j = 0; j < header_.size(); ++j) {
        if (j > 0) out.push_back(',');
        out += header_[j];
    }
    out.push_back('\n');
    for (const auto& row : rows_) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out.push_back(',');
            out += row[j];
        }
        out.push_back('\n');
    }
    return out;
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const std::string text = to_string();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace repulse
