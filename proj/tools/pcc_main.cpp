// Command-line front end: train, predict, grid sweeps, multi-run
// statistics, the full-dataset benchmark, and projection exports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcc/pcc.hpp"

namespace {

struct DataArgs {
    std::string table;
    std::size_t label_col = 0;
    std::string delimiter = ",";
    std::string idx_images, idx_labels;
    std::string idx_test_images, idx_test_labels;

    bool is_idx() const { return !idx_images.empty(); }
};

void add_table_options(CLI::App* cmd, DataArgs& args) {
    cmd->add_option("--data", args.table, "delimited text table");
    cmd->add_option("--label-col", args.label_col,
                    "0-based label column of --data");
    cmd->add_option("--delimiter", args.delimiter,
                    "field delimiter of --data (single character; ' ' splits "
                    "on whitespace)");
}

void add_idx_options(CLI::App* cmd, DataArgs& args, bool with_test) {
    cmd->add_option("--idx-images", args.idx_images,
                    "IDX image file (.gz accepted)");
    cmd->add_option("--idx-labels", args.idx_labels, "IDX label file");
    if (with_test) {
        cmd->add_option("--idx-test-images", args.idx_test_images,
                        "IDX image file of the held-out set");
        cmd->add_option("--idx-test-labels", args.idx_test_labels,
                        "IDX label file of the held-out set");
    }
}

char delimiter_char(const std::string& d) {
    if (d.size() != 1)
        throw pcc::DomainError("--delimiter must be a single character");
    return d[0];
}

pcc::LabeledDataset load_primary(const DataArgs& args) {
    if (args.is_idx()) {
        if (args.idx_labels.empty())
            throw pcc::DomainError("--idx-images requires --idx-labels");
        return pcc::load_idx(args.idx_images, args.idx_labels);
    }
    if (args.table.empty())
        throw pcc::DomainError("either --data or --idx-images is required");
    return pcc::load_table(args.table, args.label_col,
                           delimiter_char(args.delimiter));
}

pcc::RescaleScope parse_scope(const std::string& s) {
    if (s == "train-only") return pcc::RescaleScope::TrainOnly;
    if (s == "whole-dataset") return pcc::RescaleScope::WholeDataset;
    throw pcc::DomainError("--rescale-scope must be 'train-only' or "
                           "'whole-dataset', got '" + s + "'");
}

// "start:step:stop" inclusive; values generated as start + i*step.
std::vector<double> parse_real_range(const std::string& s) {
    double start = 0, step = 0, stop = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &start, &step, &stop) != 3 ||
        step <= 0)
        throw pcc::DomainError("bad range '" + s + "', expected start:step:stop");
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double v = start + i * step;
        if (v > stop + 1e-12) break;
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> parse_index_range(const std::string& s) {
    long start = 0, step = 0, stop = 0;
    if (std::sscanf(s.c_str(), "%ld:%ld:%ld", &start, &step, &stop) != 3 ||
        step <= 0 || start < 1)
        throw pcc::DomainError("bad range '" + s + "', expected start:step:stop");
    std::vector<std::size_t> out;
    for (long v = start; v <= stop; v += step)
        out.push_back(static_cast<std::size_t>(v));
    return out;
}

// "2:3,3:4" -> {(2,3),(3,4)}
std::vector<std::pair<std::size_t, std::size_t>> parse_pairs(
    const std::string& s) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t a = 0, b = 0;
        if (std::sscanf(tok.c_str(), "%zu:%zu", &a, &b) != 2)
            throw pcc::DomainError("bad component pair '" + tok +
                                   "', expected a:b");
        out.emplace_back(a, b);
    }
    if (out.empty()) throw pcc::DomainError("--pairs is empty");
    return out;
}

// "0.9:16,0.02:618" -> benchmark configurations
std::vector<pcc::BenchmarkConfig> parse_configs(const std::string& s) {
    std::vector<pcc::BenchmarkConfig> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        pcc::BenchmarkConfig cfg;
        if (std::sscanf(tok.c_str(), "%lf:%zu", &cfg.alpha, &cfg.n_e) != 2)
            throw pcc::DomainError("bad config '" + tok + "', expected alpha:ne");
        out.push_back(cfg);
    }
    if (out.empty()) throw pcc::DomainError("--configs is empty");
    return out;
}

// Balanced subset pair for image data: the training part is drawn from the
// train file and, by default, the held-out part from the remaining
// train-file instances ('remainder').  'testfile' draws it from the
// provided test files instead.
std::pair<pcc::LabeledDataset, pcc::LabeledDataset> idx_subset_pair(
    const DataArgs& args, std::size_t per_class, const std::string& subset_mode,
    const std::string& test_source, std::uint64_t seed) {
    const pcc::LabeledDataset full = load_primary(args);
    const bool ordered = subset_mode == "ordered";
    if (!ordered && subset_mode != "seeded")
        throw pcc::DomainError("--subset-mode must be 'ordered' or 'seeded'");

    auto pick = [&](const pcc::LabeledDataset& src, std::uint64_t s) {
        return ordered ? pcc::balanced_split_ordered(src, per_class)
                       : pcc::balanced_split(src, per_class, s);
    };

    auto [train, rest] = pick(full, seed);
    if (test_source == "remainder") {
        auto [test, unused] = pick(rest, seed + 1);
        return {std::move(train), std::move(test)};
    }
    if (test_source != "testfile")
        throw pcc::DomainError("--test-source must be 'remainder' or 'testfile'");
    if (args.idx_test_images.empty() || args.idx_test_labels.empty())
        throw pcc::DomainError(
            "--test-source testfile requires --idx-test-images/--idx-test-labels");
    const pcc::LabeledDataset test_full =
        pcc::load_idx(args.idx_test_images, args.idx_test_labels);
    auto [test, unused] = pick(test_full, seed);
    return {std::move(train), std::move(test)};
}

void save_rescaler(const pcc::Rescaler& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw pcc::IoError("cannot open " + path + " for writing");
    out << "# pcc-rescaler v1\n";
    for (double d : r.divisors) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", d);
        out << buf << "\n";
    }
}

pcc::Rescaler load_rescaler(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pcc::IoError("cannot open " + path);
    pcc::Rescaler r;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        r.divisors.push_back(std::stod(line));
    }
    if (r.divisors.empty())
        throw pcc::FormatError(path + ": no divisors found");
    return r;
}

// Feature rows without a label column.
pcc::DenseMatrix load_feature_rows(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw pcc::IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, delimiter)) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw pcc::FormatError(path + ": line " +
                                       std::to_string(line_no) +
                                       ": unparseable value '" + tok + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw pcc::FormatError(path + ": line " + std::to_string(line_no) +
                                   ": inconsistent field count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw pcc::FormatError(path + ": no data rows");
    pcc::DenseMatrix m(rows.front().size(), rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = rows[j][i];
    return m;
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::trunc);
    if (!file) throw pcc::IoError("cannot open " + path + " for writing");
    return file;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"class-encoded principal component classifier"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads,
                   "worker thread cap (default: PCC_THREADS or hardware)");

    DataArgs data;
    double alpha = 0.2;
    std::size_t n_e = 4;
    std::size_t per_class = 0;
    std::uint64_t seed = 42;
    std::size_t runs = 10;
    std::string out_path;
    std::string scope_str = "train-only";
    std::string alpha_grid = "0:0.02:1";
    std::string ne_grid;
    std::string subset_mode = "ordered";
    std::string test_source = "remainder";
    std::string model_path, input_path, rescaler_path, rescaler_out, pairs_str;
    std::string configs_str = "0.9:16,0.02:618";

    auto* fit_cmd = app.add_subcommand("fit", "train a model and save it");
    add_table_options(fit_cmd, data);
    add_idx_options(fit_cmd, data, false);
    fit_cmd->add_option("--alpha", alpha, "class-block weight in [0,1]")
        ->required();
    fit_cmd->add_option("--ne", n_e, "number of retained components")
        ->required();
    fit_cmd->add_option("--per-class", per_class,
                        "training instances per class (0 = use everything)");
    fit_cmd->add_option("--seed", seed, "split seed (default 42)");
    fit_cmd->add_option("--out", out_path, "model file to write")->required();
    fit_cmd->add_option("--rescale-scope", scope_str,
                        "train-only | whole-dataset (tables only)");
    fit_cmd->add_option("--rescaler-out", rescaler_out,
                        "also write the fitted per-dimension divisors");
    fit_cmd->add_option("--subset-mode", subset_mode,
                        "image subsets: ordered | seeded");

    auto* predict_cmd =
        app.add_subcommand("predict", "classify feature vectors from a file");
    predict_cmd->add_option("--model", model_path, "model file")->required();
    predict_cmd->add_option("--input", input_path,
                            "delimited rows of d_x feature values")
        ->required();
    predict_cmd->add_option("--delimiter", data.delimiter, "input delimiter");
    predict_cmd->add_option("--rescaler", rescaler_path,
                            "apply saved divisors before classification");

    auto* grid_cmd =
        app.add_subcommand("grid", "accuracy heatmaps over (alpha, ne)");
    add_table_options(grid_cmd, data);
    add_idx_options(grid_cmd, data, true);
    grid_cmd->add_option("--per-class", per_class,
                         "training instances per class")
        ->required();
    grid_cmd->add_option("--seed", seed, "split seed (default 42)");
    grid_cmd->add_option("--alpha-grid", alpha_grid,
                         "alpha range start:step:stop (default 0:0.02:1)");
    grid_cmd->add_option("--ne-grid", ne_grid,
                         "ne range start:step:stop (default 1:1:d_z)");
    grid_cmd->add_option("--rescale-scope", scope_str,
                         "train-only | whole-dataset (tables only)");
    grid_cmd->add_option("--subset-mode", subset_mode,
                         "image subsets: ordered | seeded");
    grid_cmd->add_option("--test-source", test_source,
                         "image held-out part: remainder | testfile");
    grid_cmd->add_option("--out", out_path, "heatmap file (default stdout)");

    auto* multi_cmd = app.add_subcommand(
        "multirun", "mean and std accuracy over repeated splits");
    add_table_options(multi_cmd, data);
    multi_cmd->add_option("--alpha", alpha)->required();
    multi_cmd->add_option("--ne", n_e)->required();
    multi_cmd->add_option("--per-class", per_class)->required();
    multi_cmd->add_option("--runs", runs, "number of runs (default 10)");
    multi_cmd->add_option("--seed", seed, "base seed; run i uses seed+i");
    multi_cmd->add_option("--rescale-scope", scope_str);
    multi_cmd->add_option("--out", out_path, "report file (default stdout)");

    auto* bench_cmd = app.add_subcommand(
        "bench-mnist", "benchmark on the full image train/test files");
    bench_cmd->add_option("--train-images", data.idx_images)->required();
    bench_cmd->add_option("--train-labels", data.idx_labels)->required();
    bench_cmd->add_option("--test-images", data.idx_test_images)->required();
    bench_cmd->add_option("--test-labels", data.idx_test_labels)->required();
    bench_cmd->add_option("--configs", configs_str,
                          "comma list of alpha:ne (default 0.9:16,0.02:618)");
    bench_cmd->add_option("--out", out_path, "report file (default stdout)");

    auto* proj_cmd = app.add_subcommand(
        "emit-proj", "projection coordinates of the training split");
    add_table_options(proj_cmd, data);
    add_idx_options(proj_cmd, data, false);
    proj_cmd->add_option("--alpha", alpha)->required();
    proj_cmd->add_option("--ne", n_e)->required();
    proj_cmd->add_option("--per-class", per_class,
                         "training instances per class (0 = everything)");
    proj_cmd->add_option("--seed", seed);
    proj_cmd->add_option("--pairs", pairs_str, "component pairs, e.g. 2:3,3:4")
        ->required();
    proj_cmd->add_option("--rescale-scope", scope_str);
    proj_cmd->add_option("--subset-mode", subset_mode);
    proj_cmd->add_option("--out", out_path, "projection file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "pcc: " << e.what() << "\n";
        return 1;
    }

    try {
        if (threads > 0) pcc::set_thread_count(threads);

        if (*fit_cmd) {
            pcc::LabeledDataset train;
            std::size_t test_n = 0;
            std::optional<pcc::Rescaler> rescaler;
            if (data.is_idx()) {
                train = load_primary(data);
                if (per_class > 0) {
                    auto [tr, rest] =
                        subset_mode == "seeded"
                            ? pcc::balanced_split(train, per_class, seed)
                            : pcc::balanced_split_ordered(train, per_class);
                    test_n = rest.size();
                    train = std::move(tr);
                }
            } else {
                const pcc::LabeledDataset full = load_primary(data);
                if (per_class > 0) {
                    auto [tr, te] = pcc::balanced_split(full, per_class, seed);
                    rescaler =
                        parse_scope(scope_str) == pcc::RescaleScope::TrainOnly
                            ? pcc::fit_rescaler(tr)
                            : pcc::fit_rescaler(full);
                    train = pcc::apply_rescaler(*rescaler, tr);
                    test_n = te.size();
                } else {
                    rescaler = pcc::fit_rescaler(full);
                    train = pcc::apply_rescaler(*rescaler, full);
                }
            }
            const pcc::EncodingSpec spec(train.feature_dim(), train.n_c, alpha);
            const pcc::PccModel model =
                pcc::fit(spec, train, n_e,
                         pcc::TrainingFingerprint{train.name, seed, 0});
            pcc::save_model(model, out_path);
            if (!rescaler_out.empty()) {
                if (!rescaler)
                    throw pcc::DomainError(
                        "--rescaler-out applies to table data only");
                save_rescaler(*rescaler, rescaler_out);
            }
            std::printf(
                "fit: dataset=%s N=%zu Ntest=%zu d_x=%zu n_c=%zu alpha=%g "
                "ne=%zu params=%zu -> %s\n",
                train.name.c_str(), train.size(), test_n, train.feature_dim(),
                train.n_c, alpha, n_e, model.parameter_count(),
                out_path.c_str());
        } else if (*predict_cmd) {
            const pcc::PccModel model = pcc::load_model(model_path);
            pcc::DenseMatrix x =
                load_feature_rows(input_path, delimiter_char(data.delimiter));
            if (!rescaler_path.empty()) {
                const pcc::Rescaler r = load_rescaler(rescaler_path);
                if (r.divisors.size() != x.rows())
                    throw pcc::ShapeError("rescaler dimension mismatch");
                for (std::size_t j = 0; j < x.cols(); ++j)
                    for (std::size_t i = 0; i < x.rows(); ++i)
                        x(i, j) /= r.divisors[i];
            }
            if (x.rows() != model.spec.d_x)
                throw pcc::ShapeError(
                    "input rows have " + std::to_string(x.rows()) +
                    " features, model expects " +
                    std::to_string(model.spec.d_x));
            for (std::size_t j = 0; j < x.cols(); ++j) {
                const auto pred = pcc::predict_class(
                    model, std::span<const double>(x.col(j), x.rows()));
                std::printf("%zu", pred.label);
                for (double s : pred.scores) std::printf(",%.9g", s);
                std::printf("\n");
            }
        } else if (*grid_cmd) {
            pcc::LabeledDataset train, test;
            if (data.is_idx()) {
                auto pair = idx_subset_pair(data, per_class, subset_mode,
                                            test_source, seed);
                train = std::move(pair.first);
                test = std::move(pair.second);
            } else {
                auto pair = pcc::prepare_split(load_primary(data), per_class,
                                               seed, parse_scope(scope_str));
                train = std::move(pair.first);
                test = std::move(pair.second);
            }
            const std::size_t d_z = train.feature_dim() + train.n_c;
            const std::vector<std::size_t> nes =
                ne_grid.empty()
                    ? parse_index_range("1:1:" + std::to_string(d_z))
                    : parse_index_range(ne_grid);
            const pcc::GridResult grid = pcc::grid_search(
                train, test, parse_real_range(alpha_grid), nes, seed);
            std::ofstream file;
            pcc::write_heatmap(grid, open_output(file, out_path));
        } else if (*multi_cmd) {
            const auto stats =
                pcc::run_multi(load_primary(data), per_class, alpha, n_e, runs,
                               seed, parse_scope(scope_str));
            std::ofstream file;
            pcc::write_multirun(stats, open_output(file, out_path));
        } else if (*bench_cmd) {
            const pcc::LabeledDataset train =
                pcc::load_idx(data.idx_images, data.idx_labels);
            const pcc::LabeledDataset test =
                pcc::load_idx(data.idx_test_images, data.idx_test_labels);
            const auto report =
                pcc::benchmark_full(train, test, parse_configs(configs_str));
            std::ofstream file;
            pcc::write_benchmark(report, open_output(file, out_path));
        } else if (*proj_cmd) {
            pcc::LabeledDataset train;
            if (data.is_idx()) {
                train = load_primary(data);
                if (per_class > 0)
                    train = (subset_mode == "seeded"
                                 ? pcc::balanced_split(train, per_class, seed)
                                 : pcc::balanced_split_ordered(train, per_class))
                                .first;
            } else {
                const pcc::LabeledDataset full = load_primary(data);
                if (per_class > 0) {
                    auto [tr, te] = pcc::balanced_split(full, per_class, seed);
                    const pcc::Rescaler r =
                        parse_scope(scope_str) == pcc::RescaleScope::TrainOnly
                            ? pcc::fit_rescaler(tr)
                            : pcc::fit_rescaler(full);
                    train = pcc::apply_rescaler(r, tr);
                } else {
                    train = pcc::apply_rescaler(pcc::fit_rescaler(full), full);
                }
            }
            const pcc::EncodingSpec spec(train.feature_dim(), train.n_c, alpha);
            const pcc::PccModel model = pcc::fit(spec, train, n_e);
            pcc::emit_projections(model, train, parse_pairs(pairs_str),
                                  out_path);
        }
        return 0;
    } catch (const pcc::ConvergenceError& e) {
        std::cerr << "pcc: " << e.what() << "\n";
        return 3;
    } catch (const pcc::DomainError& e) {
        std::cerr << "pcc: " << e.what() << "\n";
        return 1;
    } catch (const pcc::ShapeError& e) {
        std::cerr << "pcc: " << e.what() << "\n";
        return 1;
    } catch (const pcc::Error& e) {
        std::cerr << "pcc: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "pcc: " << e.what() << "\n";
        return 3;
    }
}
