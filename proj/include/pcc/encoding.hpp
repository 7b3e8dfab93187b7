#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/dataset.hpp"
#include "pcc/errors.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

// Geometry of the joint feature/class space plus the mixing weight alpha.
// A sample x with class j maps to the d_z = d_x + n_c vector whose feature
// block is (1-alpha)*x and whose class block is alpha times the indicator
// of j.  alpha = 0 ignores classes, alpha = 1 ignores features.
struct EncodingSpec {
    std::size_t d_x = 0;
    std::size_t n_c = 0;
    double alpha = 0.0;

    EncodingSpec() = default;

    EncodingSpec(std::size_t feature_dim, std::size_t class_count, double a)
        : d_x(feature_dim), n_c(class_count), alpha(a) {
        if (d_x < 1) throw DomainError("EncodingSpec: feature dimension must be >= 1");
        if (n_c < 2) throw DomainError("EncodingSpec: class count must be >= 2");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw DomainError("EncodingSpec: alpha " + std::to_string(a) +
                              " outside [0, 1]");
    }

    std::size_t d_z() const noexcept { return d_x + n_c; }
};

// One-hot class label.  1-based in all text I/O, 0-based in memory.
class ClassIndicator {
public:
    ClassIndicator(std::size_t class_count, std::size_t label_1based)
        : n_c_(class_count) {
        if (label_1based < 1 || label_1based > class_count)
            throw DomainError("ClassIndicator: label " +
                              std::to_string(label_1based) + " outside {1.." +
                              std::to_string(class_count) + "}");
        index0_ = label_1based - 1;
    }

    std::size_t class_count() const noexcept { return n_c_; }
    std::size_t label() const noexcept { return index0_ + 1; }
    std::size_t index0() const noexcept { return index0_; }

private:
    std::size_t n_c_;
    std::size_t index0_;
};

// Writes the encoded vector for one sample into out[0..d_z).  Without a
// label the class block stays zero, which is exactly the test-time input
// (1-alpha) * z0.
inline void encode_instance_into(const EncodingSpec& spec,
                                 std::span<const double> x,
                                 const std::optional<ClassIndicator>& y,
                                 double* out) {
    if (x.size() != spec.d_x)
        throw ShapeError("encode_instance: feature vector has length " +
                         std::to_string(x.size()) + ", expected " +
                         std::to_string(spec.d_x));
    const double fw = 1.0 - spec.alpha;
    for (std::size_t i = 0; i < spec.d_x; ++i) out[i] = fw * x[i];
    for (std::size_t c = 0; c < spec.n_c; ++c) out[spec.d_x + c] = 0.0;
    if (y) {
        if (y->class_count() != spec.n_c)
            throw DomainError("encode_instance: indicator has " +
                              std::to_string(y->class_count()) +
                              " classes, spec has " + std::to_string(spec.n_c));
        out[spec.d_x + y->index0()] = spec.alpha;
    }
}

inline std::vector<double> encode_instance(
    const EncodingSpec& spec, std::span<const double> x,
    const std::optional<ClassIndicator>& y = std::nullopt) {
    std::vector<double> z(spec.d_z());
    encode_instance_into(spec, x, y, z.data());
    return z;
}

// Column i is encode_instance of sample i.  with_labels=false zeroes every
// class block, producing the no-label input sets.
inline DenseMatrix encode_dataset(const EncodingSpec& spec,
                                  const LabeledDataset& data,
                                  bool with_labels) {
    if (data.feature_dim() != spec.d_x)
        throw ShapeError("encode_dataset: dataset feature dimension " +
                         std::to_string(data.feature_dim()) +
                         " does not match spec d_x " + std::to_string(spec.d_x));
    if (data.n_c != spec.n_c)
        throw ShapeError("encode_dataset: dataset has " +
                         std::to_string(data.n_c) + " classes, spec has " +
                         std::to_string(spec.n_c));
    DenseMatrix z(spec.d_z(), data.size());
    for (std::size_t j = 0; j < data.size(); ++j) {
        std::optional<ClassIndicator> y;
        if (with_labels) y.emplace(spec.n_c, data.labels[j]);
        encode_instance_into(
            spec, std::span<const double>(data.features.col(j), spec.d_x), y,
            z.col(j));
    }
    return z;
}

}  // namespace pcc
