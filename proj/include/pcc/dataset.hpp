#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include "pcc/errors.hpp"
#include "pcc/matrix.hpp"
#include "pcc/rng.hpp"

namespace pcc {

// Feature matrix (one sample per column) with 1-based class labels.
// class_names records the original label identifiers in first-appearance
// order, so class c corresponds to class_names[c-1].
struct LabeledDataset {
    DenseMatrix features;             // d_x x N
    std::vector<std::size_t> labels;  // values in {1..n_c}
    std::size_t n_c = 0;
    std::string name;
    std::vector<std::string> class_names;

    std::size_t feature_dim() const noexcept { return features.rows(); }
    std::size_t size() const noexcept { return features.cols(); }

    std::string class_name(std::size_t label_1based) const {
        if (label_1based >= 1 && label_1based <= class_names.size())
            return class_names[label_1based - 1];
        return std::to_string(label_1based);
    }
};

// Per-dimension divisors mapping the fitting set into [0, 1].
struct Rescaler {
    std::vector<double> divisors;
};

namespace detail {

inline std::vector<unsigned char> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
    if (in.bad()) throw IoError("read failure on " + path);
    return bytes;
}

inline std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in,
                                         const std::string& path) {
    z_stream strm{};
    if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
        throw IoError("zlib init failure for " + path);
    std::vector<unsigned char> out;
    out.resize(std::max<std::size_t>(in.size() * 4, 1 << 16));
    strm.next_in = const_cast<unsigned char*>(in.data());
    strm.avail_in = static_cast<uInt>(in.size());
    std::size_t written = 0;
    int rc;
    do {
        if (written == out.size()) out.resize(out.size() * 2);
        strm.next_out = out.data() + written;
        strm.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&strm, Z_NO_FLUSH);
        written = out.size() - strm.avail_out;
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw FormatError("corrupt gzip stream in " + path);
        }
    } while (rc != Z_STREAM_END);
    inflateEnd(&strm);
    out.resize(written);
    return out;
}

// Loads a file, transparently inflating gzip content.
inline std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
    auto bytes = read_binary_file(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
        return gunzip(bytes, path);
    return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b,
                               std::size_t offset, const std::string& path) {
    if (offset + 4 > b.size())
        throw FormatError(path + ": truncated at byte offset " +
                          std::to_string(offset));
    return (std::uint32_t(b[offset]) << 24) | (std::uint32_t(b[offset + 1]) << 16) |
           (std::uint32_t(b[offset + 2]) << 8) | std::uint32_t(b[offset + 3]);
}

inline std::string file_stem(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace detail

// IDX image/label pair in the classic big-endian layout (magic 0x00000803
// for images, 0x00000801 for labels), plain or gzipped.  Pixels are
// flattened row-major and divided by 255; byte label k becomes class k+1.
inline LabeledDataset load_idx(const std::string& images_path,
                               const std::string& labels_path) {
    const auto img = detail::read_maybe_gzip(images_path);
    const auto lab = detail::read_maybe_gzip(labels_path);

    const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
    if (img_magic != 0x00000803u)
        throw FormatError(images_path + ": bad magic 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", img_magic); return std::string(b); }() +
                          " at byte offset 0, expected 0x00000803");
    const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
    if (lab_magic != 0x00000801u)
        throw FormatError(labels_path + ": bad magic 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", lab_magic); return std::string(b); }() +
                          " at byte offset 0, expected 0x00000801");

    const std::size_t n_img = detail::read_be32(img, 4, images_path);
    const std::size_t rows = detail::read_be32(img, 8, images_path);
    const std::size_t cols = detail::read_be32(img, 12, images_path);
    const std::size_t n_lab = detail::read_be32(lab, 4, labels_path);
    if (n_img != n_lab)
        throw FormatError("image count " + std::to_string(n_img) + " in " +
                          images_path + " does not match label count " +
                          std::to_string(n_lab) + " in " + labels_path);
    const std::size_t d = rows * cols;
    if (img.size() < 16 + n_img * d)
        throw FormatError(images_path + ": truncated payload at byte offset " +
                          std::to_string(img.size()) + ", expected " +
                          std::to_string(16 + n_img * d) + " bytes");
    if (lab.size() < 8 + n_lab)
        throw FormatError(labels_path + ": truncated payload at byte offset " +
                          std::to_string(lab.size()) + ", expected " +
                          std::to_string(8 + n_lab) + " bytes");

    LabeledDataset ds;
    ds.name = detail::file_stem(images_path);
    ds.features = DenseMatrix(d, n_img);
    ds.labels.resize(n_img);
    std::size_t max_label = 0;
    for (std::size_t j = 0; j < n_img; ++j) {
        double* col = ds.features.col(j);
        const unsigned char* px = img.data() + 16 + j * d;
        for (std::size_t i = 0; i < d; ++i)
            col[i] = static_cast<double>(px[i]) / 255.0;
        const std::size_t digit = lab[8 + j];
        ds.labels[j] = digit + 1;
        max_label = std::max(max_label, digit);
    }
    ds.n_c = max_label + 1;
    for (std::size_t c = 0; c < ds.n_c; ++c)
        ds.class_names.push_back(std::to_string(c));
    return ds;
}

// Delimited text table.  Every row is one sample; label_column selects the
// class identifier column (0-based), remaining columns are features in file
// order.  Labels map to 1..n_c in first-appearance order.  A ' ' delimiter
// splits on any whitespace run.
inline LabeledDataset load_table(const std::string& path,
                                 std::size_t label_column,
                                 char delimiter = ',') {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        if (delimiter == ' ') {
            std::size_t i = 0;
            while (i < line.size()) {
                while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
                std::size_t start = i;
                while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
                if (i > start) fields.push_back(line.substr(start, i - start));
            }
        } else {
            std::size_t start = 0;
            for (;;) {
                const auto pos = line.find(delimiter, start);
                fields.push_back(line.substr(start, pos - start));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
        }
        if (!rows.empty() && fields.size() != rows.front().size())
            throw FormatError(path + ": line " + std::to_string(line_no) +
                              ": expected " + std::to_string(rows.front().size()) +
                              " fields, got " + std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw FormatError(path + ": no data rows");
    const std::size_t n_fields = rows.front().size();
    if (label_column >= n_fields)
        throw FormatError(path + ": label column " + std::to_string(label_column) +
                          " out of range, rows have " + std::to_string(n_fields) +
                          " fields");

    LabeledDataset ds;
    ds.name = detail::file_stem(path);
    const std::size_t d_x = n_fields - 1;
    ds.features = DenseMatrix(d_x, rows.size());
    ds.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        std::size_t fi = 0;
        for (std::size_t c = 0; c < n_fields; ++c) {
            if (c == label_column) continue;
            const std::string& tok = fields[c];
            double v = 0.0;
            const auto rc = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (rc.ec != std::errc{} || rc.ptr != tok.data() + tok.size() ||
                !std::isfinite(v))
                throw FormatError(path + ": line " + std::to_string(r + 1) +
                                  ": unparseable numeric value '" + tok + "'");
            ds.features(fi++, r) = v;
        }
        const std::string& lab = fields[label_column];
        auto it = std::find(ds.class_names.begin(), ds.class_names.end(), lab);
        if (it == ds.class_names.end()) {
            ds.class_names.push_back(lab);
            ds.labels[r] = ds.class_names.size();
        } else {
            ds.labels[r] =
                static_cast<std::size_t>(it - ds.class_names.begin()) + 1;
        }
    }
    ds.n_c = ds.class_names.size();
    return ds;
}

// divisor_j = max_i |x_j^(i)|, or 1 when the dimension is identically zero.
inline Rescaler fit_rescaler(const LabeledDataset& data) {
    if (data.size() == 0)
        throw PreconditionError("fit_rescaler: empty dataset");
    Rescaler r;
    r.divisors.assign(data.feature_dim(), 0.0);
    for (std::size_t j = 0; j < data.size(); ++j) {
        const double* col = data.features.col(j);
        for (std::size_t i = 0; i < data.feature_dim(); ++i)
            r.divisors[i] = std::max(r.divisors[i], std::fabs(col[i]));
    }
    for (double& d : r.divisors)
        if (d == 0.0) d = 1.0;
    return r;
}

inline LabeledDataset apply_rescaler(const Rescaler& r,
                                     const LabeledDataset& data) {
    if (r.divisors.size() != data.feature_dim())
        throw ShapeError("apply_rescaler: divisor count " +
                         std::to_string(r.divisors.size()) +
                         " does not match feature dimension " +
                         std::to_string(data.feature_dim()));
    LabeledDataset out = data;
    for (std::size_t j = 0; j < out.size(); ++j) {
        double* col = out.features.col(j);
        for (std::size_t i = 0; i < out.feature_dim(); ++i)
            col[i] /= r.divisors[i];
    }
    return out;
}

namespace detail {

inline LabeledDataset take_columns(const LabeledDataset& data,
                                   const std::vector<std::size_t>& idx) {
    LabeledDataset out;
    out.n_c = data.n_c;
    out.name = data.name;
    out.class_names = data.class_names;
    out.features = DenseMatrix(data.feature_dim(), idx.size());
    out.labels.resize(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const double* src = data.features.col(idx[j]);
        std::copy(src, src + data.feature_dim(), out.features.col(j));
        out.labels[j] = data.labels[idx[j]];
    }
    return out;
}

inline std::vector<std::vector<std::size_t>> indices_by_class(
    const LabeledDataset& data, std::size_t per_class) {
    std::vector<std::vector<std::size_t>> by_class(data.n_c);
    for (std::size_t j = 0; j < data.size(); ++j)
        by_class[data.labels[j] - 1].push_back(j);
    for (std::size_t c = 0; c < data.n_c; ++c)
        if (by_class[c].size() < per_class)
            throw PreconditionError(
                "balanced split: class '" + data.class_name(c + 1) + "' has " +
                std::to_string(by_class[c].size()) + " instances, need " +
                std::to_string(per_class));
    return by_class;
}

inline std::pair<LabeledDataset, LabeledDataset> split_from_choice(
    const LabeledDataset& data,
    const std::vector<std::vector<std::size_t>>& chosen) {
    std::vector<std::size_t> train;
    for (const auto& c : chosen) train.insert(train.end(), c.begin(), c.end());
    std::sort(train.begin(), train.end());
    std::vector<bool> in_train(data.size(), false);
    for (std::size_t j : train) in_train[j] = true;
    std::vector<std::size_t> test;
    for (std::size_t j = 0; j < data.size(); ++j)
        if (!in_train[j]) test.push_back(j);
    return {take_columns(data, train), take_columns(data, test)};
}

}  // namespace detail

// Samples per_class instances of every class without replacement using a
// seeded xoshiro256** stream (classes consumed in ascending order); the
// remainder becomes the test set.  Identical inputs give identical splits
// on every platform.
inline std::pair<LabeledDataset, LabeledDataset> balanced_split(
    const LabeledDataset& data, std::size_t per_class, std::uint64_t seed) {
    auto by_class = detail::indices_by_class(data, per_class);
    Xoshiro256ss rng(seed);
    for (auto& pool : by_class) {
        partial_shuffle(pool, per_class, rng);
        pool.resize(per_class);
    }
    return detail::split_from_choice(data, by_class);
}

// Deterministic variant: the first per_class instances of every class in
// file order form the training set, the remainder the test set.
inline std::pair<LabeledDataset, LabeledDataset> balanced_split_ordered(
    const LabeledDataset& data, std::size_t per_class) {
    auto by_class = detail::indices_by_class(data, per_class);
    for (auto& pool : by_class) pool.resize(per_class);
    return detail::split_from_choice(data, by_class);
}

}  // namespace pcc
