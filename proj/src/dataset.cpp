#include "repulse/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "repulse/util.hpp"

namespace repulse {

namespace {

bool is_integral_label(double v) {
    return std::isfinite(v) && v >= 0.0 && v == std::floor(v) && v <= 2147483647.0;
}

constexpr char kMagic[4] = {'R', 'P', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct BinReader {
    const unsigned char* data;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > len) throw DatasetError("dataset file ends mid-record");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
        double v = 0.0;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

Dataset load_binary(const std::vector<unsigned char>& bytes, const std::string& path) {
    BinReader r{bytes.data(), bytes.size(), 4};  // magic already checked
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw MalformedHeaderError("dataset version " + std::to_string(version) +
                                   ", expected " + std::to_string(kVersion));
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw MalformedHeaderError("unknown target kind in " + path);
    Dataset ds;
    ds.target_kind = static_cast<TargetKind>(kind);
    ds.name = path;
    ds.inputs = Matrix(n, d);
    for (double& v : ds.inputs.data) v = r.f64();
    ds.targets.resize(n);
    for (double& v : ds.targets) v = r.f64();
    if (!ds.inputs.all_finite()) throw NonFiniteValueError("non-finite input value in " + path);
    for (double v : ds.targets)
        if (!std::isfinite(v)) throw NonFiniteValueError("non-finite target value in " + path);
    return ds;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_double(const std::string& cell, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw DatasetError("unparsable number '" + cell + "' on line " +
                           std::to_string(line_no));
    return v;
}

Dataset load_csv(const std::string& text, const std::string& path,
                 std::optional<TargetKind> expect) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw MalformedHeaderError("empty file: " + path);
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "label")
        throw MalformedHeaderError("expected feat_0,...,label header in " + path);
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "feat_" + std::to_string(j))
            throw MalformedHeaderError("bad feature column name '" + header[j] + "' in " + path);

    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != d + 1)
            throw RowLengthMismatchError("line " + std::to_string(line_no) + " has " +
                                         std::to_string(cells.size()) + " cells, expected " +
                                         std::to_string(d + 1));
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = parse_double(cells[j], line_no);
            if (!std::isfinite(row[j]))
                throw NonFiniteValueError("non-finite value on line " + std::to_string(line_no));
        }
        const double label = parse_double(cells[d], line_no);
        if (!std::isfinite(label))
            throw NonFiniteValueError("non-finite label on line " + std::to_string(line_no));
        rows.push_back(std::move(row));
        targets.push_back(label);
    }
    if (rows.empty()) throw DatasetError("no data rows in " + path);

    bool integral = true;
    for (double v : targets)
        if (!is_integral_label(v)) integral = false;
    TargetKind kind = integral ? TargetKind::ClassLabel : TargetKind::Regression;
    if (expect.has_value()) {
        if (*expect == TargetKind::ClassLabel && !integral)
            throw InvalidLabelError("non-integral label in classification dataset " + path);
        kind = *expect;
    }

    Dataset ds;
    ds.inputs = matrix_from_rows(rows);
    ds.targets = std::move(targets);
    ds.target_kind = kind;
    ds.name = path;
    return ds;
}

}  // namespace

std::size_t Dataset::num_classes() const {
    if (target_kind != TargetKind::ClassLabel)
        throw InvalidLabelError("num_classes on a regression dataset");
    int mx = 0;
    for (double v : targets) {
        if (!is_integral_label(v)) throw InvalidLabelError("non-integral class label");
        mx = std::max(mx, static_cast<int>(v));
    }
    return static_cast<std::size_t>(mx) + 1;
}

std::vector<int> class_labels(const Dataset& ds) {
    std::vector<int> labels;
    labels.reserve(ds.targets.size());
    for (double v : ds.targets) {
        if (!is_integral_label(v))
            throw InvalidLabelError("non-integral class label " + format_g17(v));
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

Dataset load_dataset(const std::string& path, std::optional<TargetKind> expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
        return load_binary(bytes, path);
    return load_csv(std::string(bytes.begin(), bytes.end()), path, expect);
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path + " for writing");
    for (std::size_t j = 0; j < ds.dim(); ++j) out << "feat_" << j << ",";
    out << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) out << format_g17(ds.inputs(i, j)) << ",";
        out << format_g17(ds.targets[i]) << "\n";
    }
    if (!out) throw DatasetError("short write to " + path);
}

void save_dataset_binary(const Dataset& ds, const std::string& path) {
    std::string bytes;
    bytes.append(kMagic, 4);
    put_u16(bytes, kVersion);
    put_u32(bytes, static_cast<std::uint32_t>(ds.size()));
    put_u32(bytes, static_cast<std::uint32_t>(ds.dim()));
    bytes.push_back(static_cast<char>(ds.target_kind));
    for (double v : ds.inputs.data) put_f64(bytes, v);
    for (double v : ds.targets) put_f64(bytes, v);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DatasetError("short write to " + path);
}

}  // namespace repulse
