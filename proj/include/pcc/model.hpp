#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/dataset.hpp"
#include "pcc/eigensolver.hpp"
#include "pcc/encoding.hpp"
#include "pcc/errors.hpp"
#include "pcc/matrix.hpp"

namespace pcc {

struct TrainingFingerprint {
    std::string dataset;
    std::uint64_t seed = 0;
    std::uint64_t n = 0;
};

// Truncated orthonormal basis of the class-encoded second-moment matrix.
// The basis columns are the model's only learned parameters.
struct PccModel {
    EncodingSpec spec;
    std::size_t n_e = 0;
    DenseMatrix basis;                // d_z x n_e
    std::vector<double> eigenvalues;  // length n_e, non-increasing
    TrainingFingerprint fingerprint;

    std::size_t d_z() const noexcept { return spec.d_z(); }
    std::size_t parameter_count() const noexcept { return n_e * d_z(); }
};

struct Projection {
    std::vector<double> coords;
};

struct Reconstruction {
    std::vector<double> z_hat;
    std::size_t d_x = 0;

    std::span<const double> feature_part() const {
        return {z_hat.data(), d_x};
    }
    std::span<const double> class_part() const {
        return {z_hat.data() + d_x, z_hat.size() - d_x};
    }
};

struct Prediction {
    std::size_t label = 0;         // 1-based
    std::vector<double> scores;    // raw class-block reconstruction
};

// Full-spectrum decomposition of one training set; models for any n_e are
// truncations of the same basis.
struct FittedBasis {
    EncodingSpec spec;
    SpectralDecomposition decomposition;
    TrainingFingerprint fingerprint;

    std::size_t d_z() const noexcept { return spec.d_z(); }

    PccModel truncate(std::size_t n_e) const {
        if (n_e < 1 || n_e > d_z())
            throw DomainError("truncate: n_e " + std::to_string(n_e) +
                              " outside [1, " + std::to_string(d_z()) + "]");
        PccModel m;
        m.spec = spec;
        m.n_e = n_e;
        m.fingerprint = fingerprint;
        m.eigenvalues.assign(decomposition.eigenvalues.begin(),
                             decomposition.eigenvalues.begin() + n_e);
        m.basis = DenseMatrix(d_z(), n_e);
        for (std::size_t k = 0; k < n_e; ++k) {
            const double* src = decomposition.eigenvectors.col(k);
            std::copy(src, src + d_z(), m.basis.col(k));
        }
        return m;
    }
};

// Decomposes the un-centered covariance of the class-encoded training
// matrix.  No mean is subtracted anywhere.
inline FittedBasis fit_full(const EncodingSpec& spec,
                            const LabeledDataset& train,
                            TrainingFingerprint fingerprint = {}) {
    if (train.size() == 0) throw PreconditionError("fit: empty training set");
    const DenseMatrix z = encode_dataset(spec, train, /*with_labels=*/true);
    FittedBasis fb;
    fb.spec = spec;
    fb.decomposition = covariance_eigen(z);
    fb.fingerprint = std::move(fingerprint);
    if (fb.fingerprint.dataset.empty()) fb.fingerprint.dataset = train.name;
    fb.fingerprint.n = train.size();
    return fb;
}

inline PccModel fit(const EncodingSpec& spec, const LabeledDataset& train,
                    std::size_t n_e, TrainingFingerprint fingerprint = {}) {
    return fit_full(spec, train, std::move(fingerprint)).truncate(n_e);
}

// p_k = u_k . z
inline Projection encode(const PccModel& model, std::span<const double> z) {
    if (z.size() != model.d_z())
        throw ShapeError("encode: vector length " + std::to_string(z.size()) +
                         ", expected " + std::to_string(model.d_z()));
    Projection p;
    p.coords.resize(model.n_e);
    for (std::size_t k = 0; k < model.n_e; ++k)
        p.coords[k] = dot(model.basis.col(k), z.data(), model.d_z());
    return p;
}

// z_hat = sum_k p_k u_k
inline Reconstruction decode(const PccModel& model, const Projection& p) {
    if (p.coords.size() != model.n_e)
        throw ShapeError("decode: projection length " +
                         std::to_string(p.coords.size()) + ", expected " +
                         std::to_string(model.n_e));
    Reconstruction r;
    r.d_x = model.spec.d_x;
    r.z_hat.assign(model.d_z(), 0.0);
    for (std::size_t k = 0; k < model.n_e; ++k) {
        const double pk = p.coords[k];
        const double* uk = model.basis.col(k);
        for (std::size_t i = 0; i < model.d_z(); ++i) r.z_hat[i] += pk * uk[i];
    }
    return r;
}

namespace detail {

// Class-block scores of the reconstruction of an encoded vector, plus the
// argmax label (ties resolved to the lowest class index).
inline Prediction predict_encoded(const PccModel& model, const double* z) {
    const std::size_t d_x = model.spec.d_x;
    const std::size_t n_c = model.spec.n_c;
    Prediction out;
    out.scores.assign(n_c, 0.0);
    for (std::size_t k = 0; k < model.n_e; ++k) {
        const double* uk = model.basis.col(k);
        const double pk = dot(uk, z, model.d_z());
        for (std::size_t c = 0; c < n_c; ++c)
            out.scores[c] += pk * uk[d_x + c];
    }
    out.label = 1;
    for (std::size_t c = 1; c < n_c; ++c)
        if (out.scores[c] > out.scores[out.label - 1]) out.label = c + 1;
    return out;
}

}  // namespace detail

// Classifies a bare feature vector: the class block of the encoded input
// is zero and the reconstruction's class block is read out.
inline Prediction predict_class(const PccModel& model,
                                std::span<const double> x) {
    std::vector<double> z = encode_instance(model.spec, x, std::nullopt);
    return detail::predict_encoded(model, z.data());
}

// Same readout with the true class carried in the input encoding.
inline Prediction predict_with_labels(const PccModel& model,
                                      std::span<const double> x,
                                      const ClassIndicator& y) {
    std::vector<double> z = encode_instance(model.spec, x, y);
    return detail::predict_encoded(model, z.data());
}

// --- serialization ------------------------------------------------------
//
// Binary little-endian layout:
//   8 bytes  magic "PCCMDL01"
//   u32      d_x, n_c, n_e
//   f64      alpha
//   u64      N (training sample count)
//   f64[n_e]          eigenvalues
//   f64[d_z * n_e]    basis, column-major
//   u64      CRC-64/XZ of all preceding bytes

namespace detail {

inline std::uint64_t crc64_xz(const unsigned char* data, std::size_t len) {
    static const std::array<std::uint64_t, 256> table = [] {
        std::array<std::uint64_t, 256> t{};
        for (std::uint64_t i = 0; i < 256; ++i) {
            std::uint64_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c >> 1) ^ ((c & 1) ? 0xC96C5795D7870F42ULL : 0);
            t[i] = c;
        }
        return t;
    }();
    std::uint64_t crc = ~0ULL;
    for (std::size_t i = 0; i < len; ++i)
        crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return ~crc;
}

template <typename T>
void append_le(std::vector<unsigned char>& buf, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(raw, raw + sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <typename T>
T read_le(const std::vector<unsigned char>& buf, std::size_t& off) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, buf.data() + off, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(raw, raw + sizeof(T));
    off += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
}

constexpr char kModelMagic[8] = {'P', 'C', 'C', 'M', 'D', 'L', '0', '1'};

}  // namespace detail

inline void save_model(const PccModel& model, const std::string& path) {
    std::vector<unsigned char> buf;
    buf.reserve(44 + 8 * (model.n_e + model.d_z() * model.n_e));  // 36 header + payload + 8 crc
    buf.insert(buf.end(), detail::kModelMagic, detail::kModelMagic + 8);
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(model.spec.d_x));
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(model.spec.n_c));
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(model.n_e));
    detail::append_le<double>(buf, model.spec.alpha);
    detail::append_le<std::uint64_t>(buf, model.fingerprint.n);
    for (double v : model.eigenvalues) detail::append_le<double>(buf, v);
    for (std::size_t k = 0; k < model.n_e; ++k)
        for (std::size_t i = 0; i < model.d_z(); ++i)
            detail::append_le<double>(buf, model.basis(i, k));
    detail::append_le<std::uint64_t>(buf, detail::crc64_xz(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failure on " + path);
}

inline PccModel load_model(const std::string& path) {
    const auto buf = detail::read_binary_file(path);
    if (buf.size() < 44)  // 36-byte header plus the trailing crc
        throw FormatError(path + ": file too small for a model header");
    const std::uint64_t stored_crc = [&] {
        std::size_t off = buf.size() - 8;
        return detail::read_le<std::uint64_t>(buf, off);
    }();
    if (detail::crc64_xz(buf.data(), buf.size() - 8) != stored_crc)
        throw FormatError(path + ": checksum mismatch (truncated or corrupt)");
    if (std::memcmp(buf.data(), detail::kModelMagic, 8) != 0)
        throw FormatError(path + ": bad magic, not a model file");

    std::size_t off = 8;
    const auto d_x = detail::read_le<std::uint32_t>(buf, off);
    const auto n_c = detail::read_le<std::uint32_t>(buf, off);
    const auto n_e = detail::read_le<std::uint32_t>(buf, off);
    const double alpha = detail::read_le<double>(buf, off);
    const auto n = detail::read_le<std::uint64_t>(buf, off);

    const std::size_t d_z = std::size_t{d_x} + n_c;
    if (n_e < 1 || n_e > d_z)
        throw FormatError(path + ": component count " + std::to_string(n_e) +
                          " outside [1, " + std::to_string(d_z) + "]");
    const std::size_t expected = 36 + 8 * (std::size_t{n_e} + d_z * n_e) + 8;
    if (buf.size() != expected)
        throw FormatError(path + ": size " + std::to_string(buf.size()) +
                          " does not match header, expected " +
                          std::to_string(expected));

    PccModel m;
    m.spec = EncodingSpec(d_x, n_c, alpha);
    m.n_e = n_e;
    m.fingerprint.n = n;
    m.eigenvalues.resize(n_e);
    for (std::size_t k = 0; k < n_e; ++k)
        m.eigenvalues[k] = detail::read_le<double>(buf, off);
    m.basis = DenseMatrix(d_z, n_e);
    for (std::size_t k = 0; k < n_e; ++k)
        for (std::size_t i = 0; i < d_z; ++i)
            m.basis(i, k) = detail::read_le<double>(buf, off);
    return m;
}

}  // namespace pcc
