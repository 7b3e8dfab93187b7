#pragma once

// Shared helpers for the test suites: fixture loading and deterministic
// synthetic data.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcc/dataset.hpp"
#include "pcc/matrix.hpp"
#include "pcc/rng.hpp"

namespace pcc_test {

inline std::string source_root() { return PCC_SOURCE_DIR; }

inline std::string fixture_path(const std::string& name) {
    return source_root() + "/tests/fixtures/" + name;
}

inline std::string data_path(const std::string& name) {
    return source_root() + "/data/" + name;
}

// Uniform double in [lo, hi) from our portable generator.
inline double uniform(pcc::Xoshiro256ss& rng, double lo, double hi) {
    const double u =
        static_cast<double>(rng.next() >> 11) * 0x1.0p-53;  // [0, 1)
    return lo + u * (hi - lo);
}

inline pcc::DenseMatrix random_matrix(std::size_t rows, std::size_t cols,
                                      std::uint64_t seed, double lo = -1.0,
                                      double hi = 1.0) {
    pcc::Xoshiro256ss rng(seed);
    pcc::DenseMatrix m(rows, cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = uniform(rng, lo, hi);
    return m;
}

inline pcc::DenseMatrix random_symmetric(std::size_t n, std::uint64_t seed) {
    pcc::DenseMatrix a = random_matrix(n, n, seed);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < j; ++i) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
    return a;
}

struct EigCase {
    int id = 0;
    pcc::DenseMatrix a;
    std::vector<double> eigenvalues;   // descending
    pcc::DenseMatrix eigenvectors;     // columns, same order
};

inline std::vector<EigCase> load_eig_fixtures(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fixture " + path);
    std::vector<EigCase> cases;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("matrix ", 0) != 0) continue;
        EigCase c;
        std::size_t d = 0;
        {
            std::istringstream ss(line.substr(7));
            ss >> c.id >> d;
        }
        c.a = pcc::DenseMatrix(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            std::getline(in, line);
            std::istringstream ss(line);
            for (std::size_t j = 0; j < d; ++j) ss >> c.a(i, j);
        }
        std::getline(in, line);  // "eigenvalues"
        std::getline(in, line);
        {
            std::istringstream ss(line);
            double v;
            while (ss >> v) c.eigenvalues.push_back(v);
        }
        std::getline(in, line);  // "eigenvectors"
        c.eigenvectors = pcc::DenseMatrix(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            std::getline(in, line);
            std::istringstream ss(line);
            for (std::size_t j = 0; j < d; ++j) ss >> c.eigenvectors(i, j);
        }
        std::getline(in, line);  // "end"
        cases.push_back(std::move(c));
    }
    return cases;
}

struct FitCase {
    pcc::LabeledDataset data;
    double alpha = 0.0;
    std::vector<double> eigenvalues;
    pcc::DenseMatrix eigenvectors;
};

inline FitCase load_fit_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fixture " + path);
    FitCase c;
    std::string line;
    std::size_t d_x = 0, n_c = 0, n = 0;
    while (std::getline(in, line)) {
        if (line.rfind("dataset ", 0) == 0) {
            std::istringstream ss(line.substr(8));
            ss >> d_x >> n_c >> n >> c.alpha;
            break;
        }
    }
    std::getline(in, line);  // "features"
    c.data.features = pcc::DenseMatrix(d_x, n);
    for (std::size_t j = 0; j < n; ++j) {
        std::getline(in, line);
        std::istringstream ss(line);
        for (std::size_t i = 0; i < d_x; ++i) ss >> c.data.features(i, j);
    }
    std::getline(in, line);  // "labels"
    std::getline(in, line);
    {
        std::istringstream ss(line);
        std::size_t lab;
        while (ss >> lab) c.data.labels.push_back(lab);
    }
    c.data.n_c = n_c;
    c.data.name = "fit_fixture";
    for (std::size_t i = 1; i <= n_c; ++i)
        c.data.class_names.push_back(std::to_string(i));
    std::getline(in, line);  // "eigenvalues"
    std::getline(in, line);
    {
        std::istringstream ss(line);
        double v;
        while (ss >> v) c.eigenvalues.push_back(v);
    }
    std::getline(in, line);  // "eigenvectors"
    const std::size_t d_z = d_x + n_c;
    c.eigenvectors = pcc::DenseMatrix(d_z, d_z);
    for (std::size_t i = 0; i < d_z; ++i) {
        std::getline(in, line);
        std::istringstream ss(line);
        for (std::size_t j = 0; j < d_z; ++j) ss >> c.eigenvectors(i, j);
    }
    return c;
}

// max |U_k U_k^T - R_k R_k^T| over all entries, for the leading k columns.
inline double projector_diff(const pcc::DenseMatrix& u,
                             const pcc::DenseMatrix& r, std::size_t k) {
    const std::size_t d = u.rows();
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double pu = 0.0, pr = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                pu += u(i, c) * u(j, c);
                pr += r(i, c) * r(j, c);
            }
            worst = std::max(worst, std::fabs(pu - pr));
        }
    return worst;
}

}  // namespace pcc_test
