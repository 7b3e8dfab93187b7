#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pcc/dataset.hpp"
#include "pcc/encoding.hpp"
#include "pcc/errors.hpp"
#include "pcc/model.hpp"
#include "pcc/parallel.hpp"

namespace pcc {

// The three evaluation input sets: training samples with their class block
// carried in the encoding, training samples with the class block zeroed,
// and held-out samples with the class block zeroed.
enum class InputSetKind { WithLabels, TrainNoLabels, TestNoLabels };

constexpr std::array<InputSetKind, 3> kAllInputSets = {
    InputSetKind::WithLabels, InputSetKind::TrainNoLabels,
    InputSetKind::TestNoLabels};

inline const char* to_string(InputSetKind k) {
    switch (k) {
        case InputSetKind::WithLabels: return "with_labels";
        case InputSetKind::TrainNoLabels: return "train_no_labels";
        case InputSetKind::TestNoLabels: return "test_no_labels";
    }
    return "?";
}

// Fraction of samples whose predicted label matches the truth.
inline double evaluate(const PccModel& model, const LabeledDataset& data,
                       InputSetKind kind) {
    if (data.feature_dim() != model.spec.d_x || data.n_c != model.spec.n_c)
        throw ShapeError("evaluate: dataset dimensions do not match the model");
    if (data.size() == 0) throw PreconditionError("evaluate: empty dataset");
    const bool with_labels = kind == InputSetKind::WithLabels;
    std::atomic<std::size_t> correct{0};
    parallel_for(data.size(), 256, [&](std::size_t j0, std::size_t j1) {
        std::vector<double> z(model.d_z());
        std::size_t local = 0;
        for (std::size_t j = j0; j < j1; ++j) {
            std::optional<ClassIndicator> y;
            if (with_labels) y.emplace(model.spec.n_c, data.labels[j]);
            encode_instance_into(
                model.spec,
                std::span<const double>(data.features.col(j), model.spec.d_x),
                y, z.data());
            if (detail::predict_encoded(model, z.data()).label ==
                data.labels[j])
                ++local;
        }
        correct += local;
    });
    return static_cast<double>(correct.load()) /
           static_cast<double>(data.size());
}

// Accuracy surfaces over the hyper-parameter grid, one per input set.
struct GridResult {
    std::vector<double> alphas;      // ascending
    std::vector<std::size_t> n_es;   // ascending
    std::array<DenseMatrix, 3> accuracy;  // |alphas| x |n_es| each
    std::string dataset;
    std::uint64_t seed = 0;
    std::size_t train_n = 0;
    std::size_t test_n = 0;

    double at(InputSetKind k, std::size_t ai, std::size_t ni) const {
        return accuracy[static_cast<std::size_t>(k)](ai, ni);
    }
};

namespace detail {

// Projections of every sample onto the leading k_max basis columns,
// laid out so that all samples for one component are contiguous.
inline DenseMatrix project_columns(const SpectralDecomposition& dec,
                                   const DenseMatrix& z, std::size_t k_max) {
    const std::size_t d = z.rows();
    const std::size_t n = z.cols();
    DenseMatrix pt(n, k_max);  // pt(j, k) = u_k . z_j
    parallel_for(n, 64, [&](std::size_t j0, std::size_t j1) {
        constexpr std::size_t kBlock = 32;
        for (std::size_t k0 = 0; k0 < k_max; k0 += kBlock) {
            const std::size_t k1 = std::min(k0 + kBlock, k_max);
            for (std::size_t j = j0; j < j1; ++j) {
                const double* zj = z.col(j);
                for (std::size_t k = k0; k < k1; ++k)
                    pt(j, k) = dot(dec.eigenvectors.col(k), zj, d);
            }
        }
    });
    return pt;
}

// Accuracy at every requested truncation in one pass: class scores are
// accumulated one component at a time (ascending, matching the order the
// per-sample prediction uses), reading the accuracy off whenever a
// requested n_e is reached.
inline std::vector<double> truncation_sweep(const FittedBasis& fb,
                                            const DenseMatrix& z,
                                            const std::vector<std::size_t>& labels,
                                            const std::vector<std::size_t>& n_es) {
    const std::size_t d_x = fb.spec.d_x;
    const std::size_t n_c = fb.spec.n_c;
    const std::size_t n = z.cols();
    const std::size_t k_max = n_es.empty() ? 0 : n_es.back();
    const DenseMatrix pt = project_columns(fb.decomposition, z, k_max);

    std::vector<double> scores(n * n_c, 0.0);  // sample-major rows of n_c
    std::vector<double> out;
    out.reserve(n_es.size());
    std::size_t next = 0;
    for (std::size_t k = 0; k < k_max; ++k) {
        const double* uy = fb.decomposition.eigenvectors.col(k) + d_x;
        const double* pk = pt.col(k);
        for (std::size_t j = 0; j < n; ++j) {
            double* row = scores.data() + j * n_c;
            const double pj = pk[j];
            for (std::size_t c = 0; c < n_c; ++c) row[c] += pj * uy[c];
        }
        while (next < n_es.size() && n_es[next] == k + 1) {
            std::size_t correct = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double* row = scores.data() + j * n_c;
                std::size_t best = 0;
                for (std::size_t c = 1; c < n_c; ++c)
                    if (row[c] > row[best]) best = c;
                if (best + 1 == labels[j]) ++correct;
            }
            out.push_back(static_cast<double>(correct) /
                          static_cast<double>(n));
            ++next;
        }
    }
    return out;
}

}  // namespace detail

// Sweeps the (alpha, n_e) grid.  One decomposition is computed per alpha
// and every n_e is evaluated by truncating that basis, which yields
// exactly the same predictions as a fresh fit at (alpha, n_e).
// Distinct alphas run in parallel.
inline GridResult grid_search(const LabeledDataset& train,
                              const LabeledDataset& test,
                              std::vector<double> alphas,
                              std::vector<std::size_t> n_es,
                              std::uint64_t seed = 0) {
    if (alphas.empty() || n_es.empty())
        throw PreconditionError("grid_search: empty grid");
    std::sort(alphas.begin(), alphas.end());
    std::sort(n_es.begin(), n_es.end());
    n_es.erase(std::unique(n_es.begin(), n_es.end()), n_es.end());
    // validate up front; workers must not throw
    const std::size_t d_z = train.feature_dim() + train.n_c;
    for (double a : alphas) (void)EncodingSpec(train.feature_dim(), train.n_c, a);
    if (n_es.front() < 1 || n_es.back() > d_z)
        throw DomainError("grid_search: n_e grid outside [1, " +
                          std::to_string(d_z) + "]");
    if (test.feature_dim() != train.feature_dim() || test.n_c != train.n_c)
        throw ShapeError("grid_search: train/test dimension mismatch");
    if (train.size() == 0 || test.size() == 0)
        throw PreconditionError("grid_search: empty train or test set");

    GridResult grid;
    grid.alphas = alphas;
    grid.n_es = n_es;
    grid.dataset = train.name;
    grid.seed = seed;
    grid.train_n = train.size();
    grid.test_n = test.size();
    for (auto& m : grid.accuracy) m = DenseMatrix(alphas.size(), n_es.size());

    parallel_for(alphas.size(), 1, [&](std::size_t a0, std::size_t a1) {
        for (std::size_t ai = a0; ai < a1; ++ai) {
            const EncodingSpec spec(train.feature_dim(), train.n_c, alphas[ai]);
            const FittedBasis fb = fit_full(spec, train);
            for (InputSetKind kind : kAllInputSets) {
                const LabeledDataset& data =
                    kind == InputSetKind::TestNoLabels ? test : train;
                const DenseMatrix z = encode_dataset(
                    spec, data, kind == InputSetKind::WithLabels);
                const std::vector<double> acc =
                    detail::truncation_sweep(fb, z, data.labels, n_es);
                auto& surface = grid.accuracy[static_cast<std::size_t>(kind)];
                for (std::size_t ni = 0; ni < n_es.size(); ++ni)
                    surface(ai, ni) = acc[ni];
            }
        }
    });
    return grid;
}

// Cheapest cell attaining the best accuracy on the target set: among cells
// within 1e-9 of the maximum, the smallest n_e wins, then the smallest
// alpha.
inline std::pair<double, std::size_t> select_hyperparameters(
    const GridResult& grid,
    InputSetKind target = InputSetKind::TrainNoLabels) {
    const auto& surface = grid.accuracy[static_cast<std::size_t>(target)];
    double best = -1.0;
    for (std::size_t ai = 0; ai < grid.alphas.size(); ++ai)
        for (std::size_t ni = 0; ni < grid.n_es.size(); ++ni)
            best = std::max(best, surface(ai, ni));
    for (std::size_t ni = 0; ni < grid.n_es.size(); ++ni)
        for (std::size_t ai = 0; ai < grid.alphas.size(); ++ai)
            if (surface(ai, ni) >= best - 1e-9)
                return {grid.alphas[ai], grid.n_es[ni]};
    throw PreconditionError("select_hyperparameters: empty grid");
}

enum class RescaleScope { TrainOnly, WholeDataset };

// Seeded balanced split followed by per-dimension max rescaling.  The
// divisors come from the training part by default; WholeDataset fits them
// on the full dataset before splitting.
inline std::pair<LabeledDataset, LabeledDataset> prepare_split(
    const LabeledDataset& data, std::size_t per_class, std::uint64_t seed,
    RescaleScope scope = RescaleScope::TrainOnly) {
    auto [train, test] = balanced_split(data, per_class, seed);
    const Rescaler r = scope == RescaleScope::TrainOnly ? fit_rescaler(train)
                                                        : fit_rescaler(data);
    return {apply_rescaler(r, train), apply_rescaler(r, test)};
}

struct MultiRunStats {
    std::array<double, 3> mean{};    // indexed by InputSetKind
    std::array<double, 3> stddev{};  // sample std (n-1), 0 for a single run
    std::size_t runs = 0;
    std::uint64_t base_seed = 0;
    double alpha = 0.0;
    std::size_t n_e = 0;
    std::string dataset;
};

// Repeats split -> rescale -> fit -> evaluate with seeds base_seed + i.
inline MultiRunStats run_multi(const LabeledDataset& data,
                               std::size_t per_class, double alpha,
                               std::size_t n_e, std::size_t runs,
                               std::uint64_t base_seed,
                               RescaleScope scope = RescaleScope::TrainOnly) {
    if (runs < 1) throw PreconditionError("run_multi: need at least one run");
    MultiRunStats stats;
    stats.runs = runs;
    stats.base_seed = base_seed;
    stats.alpha = alpha;
    stats.n_e = n_e;
    stats.dataset = data.name;

    std::array<std::vector<double>, 3> acc;
    for (auto& v : acc) v.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const std::uint64_t seed = base_seed + i;
        auto [train, test] = prepare_split(data, per_class, seed, scope);
        const EncodingSpec spec(train.feature_dim(), train.n_c, alpha);
        const PccModel model =
            fit(spec, train, n_e, TrainingFingerprint{data.name, seed, 0});
        acc[0].push_back(evaluate(model, train, InputSetKind::WithLabels));
        acc[1].push_back(evaluate(model, train, InputSetKind::TrainNoLabels));
        acc[2].push_back(evaluate(model, test, InputSetKind::TestNoLabels));
    }
    for (std::size_t s = 0; s < 3; ++s) {
        double sum = 0.0;
        for (double v : acc[s]) sum += v;
        stats.mean[s] = sum / static_cast<double>(runs);
        double ss = 0.0;
        for (double v : acc[s]) ss += (v - stats.mean[s]) * (v - stats.mean[s]);
        stats.stddev[s] =
            runs > 1 ? std::sqrt(ss / static_cast<double>(runs - 1)) : 0.0;
    }
    return stats;
}

struct BenchmarkConfig {
    double alpha = 0.0;
    std::size_t n_e = 0;
};

struct BenchmarkRow {
    BenchmarkConfig config;
    double accuracy = 0.0;
    std::size_t parameters = 0;
    double fit_seconds = 0.0;
    double eval_seconds = 0.0;
};

struct BenchmarkReport {
    std::string dataset;
    std::size_t train_n = 0;
    std::size_t test_n = 0;
    std::vector<BenchmarkRow> rows;
};

// Fits each configuration on the full training set and reports held-out
// accuracy (class block zeroed), parameter count and wall-clock times.
inline BenchmarkReport benchmark_full(const LabeledDataset& train,
                                      const LabeledDataset& test,
                                      const std::vector<BenchmarkConfig>& configs) {
    using clock = std::chrono::steady_clock;
    BenchmarkReport report;
    report.dataset = train.name;
    report.train_n = train.size();
    report.test_n = test.size();
    for (const BenchmarkConfig& cfg : configs) {
        BenchmarkRow row;
        row.config = cfg;
        const EncodingSpec spec(train.feature_dim(), train.n_c, cfg.alpha);
        const auto t0 = clock::now();
        const PccModel model = fit(spec, train, cfg.n_e);
        const auto t1 = clock::now();
        row.accuracy = evaluate(model, test, InputSetKind::TestNoLabels);
        const auto t2 = clock::now();
        row.parameters = model.parameter_count();
        row.fit_seconds = std::chrono::duration<double>(t1 - t0).count();
        row.eval_seconds = std::chrono::duration<double>(t2 - t1).count();
        report.rows.push_back(row);
    }
    return report;
}

// --- text emitters ------------------------------------------------------

namespace detail {

inline std::string format_fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace detail

// One comma-delimited block per input set: alpha row headers (6 decimals),
// n_e column headers, accuracies with 6 decimals.
inline void write_heatmap(const GridResult& grid, std::ostream& out) {
    out << "# pcc-heatmap v1\n";
    out << "# dataset=" << grid.dataset << " seed=" << grid.seed
        << " N=" << grid.train_n << " Ntest=" << grid.test_n << "\n";
    for (InputSetKind kind : kAllInputSets) {
        out << "# set=" << to_string(kind) << "\n";
        out << "alpha\\ne";
        for (std::size_t ne : grid.n_es) out << "," << ne;
        out << "\n";
        const auto& surface = grid.accuracy[static_cast<std::size_t>(kind)];
        for (std::size_t ai = 0; ai < grid.alphas.size(); ++ai) {
            out << detail::format_fixed6(grid.alphas[ai]);
            for (std::size_t ni = 0; ni < grid.n_es.size(); ++ni)
                out << "," << detail::format_fixed6(surface(ai, ni));
            out << "\n";
        }
        if (kind != InputSetKind::TestNoLabels) out << "\n";
    }
}

inline void emit_heatmap(const GridResult& grid, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_heatmap(grid, out);
    if (!out) throw IoError("write failure on " + path);
}

inline GridResult parse_heatmap(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    GridResult grid;
    std::string line;
    int block = -1;
    std::array<std::vector<std::vector<double>>, 3> values;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# dataset=", 0) == 0) {
            std::istringstream ss(line.substr(2));
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "dataset") grid.dataset = val;
                else if (key == "seed") grid.seed = std::stoull(val);
                else if (key == "N") grid.train_n = std::stoull(val);
                else if (key == "Ntest") grid.test_n = std::stoull(val);
            }
            continue;
        }
        if (line.rfind("# set=", 0) == 0) {
            ++block;
            if (block > 2)
                throw FormatError(path + ": more than three heatmap blocks");
            continue;
        }
        if (line[0] == '#') continue;
        if (line.rfind("alpha\\ne", 0) == 0) {
            if (block == 0) {
                grid.n_es.clear();
                std::istringstream ss(line.substr(8));
                std::string tok;
                while (std::getline(ss, tok, ','))
                    if (!tok.empty()) grid.n_es.push_back(std::stoull(tok));
            }
            continue;
        }
        if (block < 0)
            throw FormatError(path + ": line " + std::to_string(line_no) +
                              ": data before any '# set=' header");
        std::vector<double> vals;
        std::istringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != grid.n_es.size() + 1)
            throw FormatError(path + ": line " + std::to_string(line_no) +
                              ": expected " + std::to_string(grid.n_es.size() + 1) +
                              " values, got " + std::to_string(vals.size()));
        if (block == 0) grid.alphas.push_back(vals[0]);
        values[block].push_back(
            std::vector<double>(vals.begin() + 1, vals.end()));
    }
    if (block != 2)
        throw FormatError(path + ": expected three heatmap blocks, found " +
                          std::to_string(block + 1));
    for (std::size_t s = 0; s < 3; ++s) {
        if (values[s].size() != grid.alphas.size())
            throw FormatError(path + ": block " + std::to_string(s) +
                              " has inconsistent row count");
        grid.accuracy[s] = DenseMatrix(grid.alphas.size(), grid.n_es.size());
        for (std::size_t ai = 0; ai < grid.alphas.size(); ++ai)
            for (std::size_t ni = 0; ni < grid.n_es.size(); ++ni)
                grid.accuracy[s](ai, ni) = values[s][ai][ni];
    }
    return grid;
}

// Rows of (coord_a, coord_b, true_label) for every requested component
// pair, computed from the class-carrying encoding of the given samples.
inline void emit_projections(const PccModel& model, const LabeledDataset& data,
                             const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                             const std::string& path) {
    for (const auto& [a, b] : pairs)
        if (a < 1 || a > model.n_e || b < 1 || b > model.n_e)
            throw DomainError("emit_projections: component pair (" +
                              std::to_string(a) + "," + std::to_string(b) +
                              ") outside [1, " + std::to_string(model.n_e) + "]");
    const DenseMatrix z = encode_dataset(model.spec, data, /*with_labels=*/true);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "# pcc-projections v1\n";
    out << "# dataset=" << data.name << " alpha=" << model.spec.alpha
        << " ne=" << model.n_e << "\n";
    for (const auto& [a, b] : pairs) {
        out << "# pair=" << a << "," << b << "\n";
        const double* ua = model.basis.col(a - 1);
        const double* ub = model.basis.col(b - 1);
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double pa = dot(ua, z.col(j), model.d_z());
            const double pb = dot(ub, z.col(j), model.d_z());
            out << detail::format_fixed6(pa) << ","
                << detail::format_fixed6(pb) << "," << data.labels[j] << "\n";
        }
    }
    if (!out) throw IoError("write failure on " + path);
}

inline void write_multirun(const MultiRunStats& stats, std::ostream& out) {
    out << "# pcc-multirun v1\n";
    out << "# dataset=" << stats.dataset << " alpha=" << stats.alpha
        << " ne=" << stats.n_e << " runs=" << stats.runs
        << " seeds=" << stats.base_seed << ".."
        << stats.base_seed + stats.runs - 1 << "\n";
    out << "set,mean,std\n";
    for (InputSetKind kind : kAllInputSets) {
        const auto s = static_cast<std::size_t>(kind);
        out << to_string(kind) << "," << detail::format_fixed6(stats.mean[s])
            << "," << detail::format_fixed6(stats.stddev[s]) << "\n";
    }
}

inline void write_benchmark(const BenchmarkReport& report, std::ostream& out) {
    out << "# pcc-benchmark v1\n";
    out << "# dataset=" << report.dataset << " N=" << report.train_n
        << " Ntest=" << report.test_n << "\n";
    out << "config,accuracy,parameters,fit_seconds,eval_seconds\n";
    for (const BenchmarkRow& row : report.rows) {
        char cfg[64];
        std::snprintf(cfg, sizeof cfg, "alpha=%g ne=%zu", row.config.alpha,
                      row.config.n_e);
        out << cfg << "," << detail::format_fixed6(row.accuracy) << ","
            << row.parameters << "," << detail::format_fixed6(row.fit_seconds)
            << "," << detail::format_fixed6(row.eval_seconds) << "\n";
    }
    out << "# published reference points: Efficient-CapsNet accuracy=0.99 "
           "parameters=161000; LeNet accuracy=0.99 parameters=60000\n";
}

}  // namespace pcc
