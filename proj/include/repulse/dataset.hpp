#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "repulse/matrix.hpp"

namespace repulse {

enum class TargetKind : std::uint8_t { ClassLabel = 0, Regression = 1 };

struct Dataset {
    Matrix inputs;                 // N x d
    std::vector<double> targets;   // class labels stored as integral doubles, or floats
    TargetKind target_kind = TargetKind::Regression;
    std::string name;
    std::vector<std::uint8_t> ambiguous;  // empty, or one flag per sample

    std::size_t size() const { return inputs.rows; }
    std::size_t dim() const { return inputs.cols; }
    std::size_t num_classes() const;  // max label + 1; classification only
};

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedHeaderError : DatasetError {
    using DatasetError::DatasetError;
};
struct RowLengthMismatchError : DatasetError {
    using DatasetError::DatasetError;
};
struct NonFiniteValueError : DatasetError {
    using DatasetError::DatasetError;
};
struct InvalidLabelError : DatasetError {
    using DatasetError::DatasetError;
};

/// Targets as validated integer class labels; InvalidLabelError on
/// non-integral or negative values.
std::vector<int> class_labels(const Dataset& ds);

/// Reads either format, sniffed by magic: flat binary ("RPDS") or headed
/// CSV (feat_0,...,feat_{d-1},label). CSV target kind is inferred (integral
/// labels mean classification) unless expect pins it; a non-integral label
/// under an expected ClassLabel kind is an InvalidLabelError.
Dataset load_dataset(const std::string& path,
                     std::optional<TargetKind> expect = std::nullopt);

/// 17 significant digits per value; round-trips doubles through text.
void save_dataset_csv(const Dataset& ds, const std::string& path);

/// Exact binary round trip: magic "RPDS", u16 version, u32 N, u32 d,
/// u8 target kind, f64 inputs row-major, f64 targets. Little-endian.
void save_dataset_binary(const Dataset& ds, const std::string& path);

}  // namespace repulse
