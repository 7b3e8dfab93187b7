#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pcc/model.hpp"
#include "test_support.hpp"

using pcc::ClassIndicator;
using pcc::DenseMatrix;
using pcc::EncodingSpec;
using pcc::LabeledDataset;
using pcc::PccModel;

namespace {

LabeledDataset make_synthetic(std::size_t d_x, std::size_t n_c, std::size_t n,
                              std::uint64_t seed) {
    LabeledDataset ds;
    ds.name = "synthetic";
    ds.features = pcc_test::random_matrix(d_x, n, seed, 0.0, 1.0);
    ds.labels.resize(n);
    ds.n_c = n_c;
    for (std::size_t j = 0; j < n; ++j) ds.labels[j] = 1 + j % n_c;
    for (std::size_t c = 1; c <= n_c; ++c)
        ds.class_names.push_back(std::to_string(c));
    return ds;
}

double mean_reconstruction_error(const PccModel& model, const DenseMatrix& z) {
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
        const auto p = pcc::encode(
            model, std::span<const double>(z.col(j), model.d_z()));
        const auto r = pcc::decode(model, p);
        double e2 = 0.0;
        for (std::size_t i = 0; i < model.d_z(); ++i) {
            const double d = z(i, j) - r.z_hat[i];
            e2 += d * d;
        }
        sum += std::sqrt(e2);
    }
    return sum / static_cast<double>(z.cols());
}

// Random orthonormal columns via modified Gram-Schmidt.
DenseMatrix random_orthonormal(std::size_t d, std::size_t k, std::uint64_t seed) {
    DenseMatrix q = pcc_test::random_matrix(d, k, seed);
    for (std::size_t c = 0; c < k; ++c) {
        double* qc = q.col(c);
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t p = 0; p < c; ++p) {
                const double g = pcc::dot(q.col(p), qc, d);
                for (std::size_t i = 0; i < d; ++i) qc[i] -= g * q.col(p)[i];
            }
        const double norm = std::sqrt(pcc::dot(qc, qc, d));
        for (std::size_t i = 0; i < d; ++i) qc[i] /= norm;
    }
    return q;
}

}  // namespace

TEST_CASE("fitting identical copies gives a rank-1 basis") {
    LabeledDataset ds = make_synthetic(4, 2, 5, 61);
    for (std::size_t j = 1; j < 5; ++j) {
        std::copy(ds.features.col(0), ds.features.col(0) + 4, ds.features.col(j));
        ds.labels[j] = ds.labels[0];
    }
    const EncodingSpec spec(4, 2, 0.5);
    const PccModel model = pcc::fit(spec, ds, 6);

    const auto z = pcc::encode_instance(
        spec, std::span<const double>(ds.features.col(0), 4),
        ClassIndicator(2, ds.labels[0]));
    double z2 = 0.0;
    for (double v : z) z2 += v * v;
    CHECK(model.eigenvalues[0] == Catch::Approx(z2).epsilon(1e-12));
    for (std::size_t k = 1; k < 6; ++k)
        CHECK(std::fabs(model.eigenvalues[k]) <= 1e-12);
    const double align =
        std::fabs(pcc::dot(model.basis.col(0), z.data(), 6)) / std::sqrt(z2);
    CHECK(align == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("full basis reconstructs the training encoding") {
    const LabeledDataset ds = make_synthetic(5, 3, 24, 67);
    const EncodingSpec spec(5, 3, 0.4);
    const PccModel model = pcc::fit(spec, ds, spec.d_z());
    const auto z = pcc::encode_dataset(spec, ds, true);
    for (std::size_t j = 0; j < ds.size(); ++j) {
        const auto r = pcc::decode(
            model,
            pcc::encode(model, std::span<const double>(z.col(j), spec.d_z())));
        for (std::size_t i = 0; i < spec.d_z(); ++i)
            CHECK(r.z_hat[i] == Catch::Approx(z(i, j)).margin(1e-8));
    }
}

TEST_CASE("fit matches the offline reference decomposition") {
    const auto fix =
        pcc_test::load_fit_fixture(pcc_test::fixture_path("fit_reference.txt"));
    const EncodingSpec spec(fix.data.feature_dim(), fix.data.n_c, fix.alpha);
    const auto fb = pcc::fit_full(spec, fix.data);
    const std::size_t d_z = spec.d_z();
    REQUIRE(fb.decomposition.eigenvalues.size() == d_z);
    for (std::size_t k = 0; k < d_z; ++k)
        CHECK(fb.decomposition.eigenvalues[k] ==
              Catch::Approx(fix.eigenvalues[k]).margin(1e-8));
    for (std::size_t k = 1; k <= d_z; ++k) {
        if (k < d_z && fix.eigenvalues[k - 1] - fix.eigenvalues[k] <= 1e-8)
            continue;
        CHECK(pcc_test::projector_diff(fb.decomposition.eigenvectors,
                                       fix.eigenvectors, k) <= 1e-7);
    }
}

TEST_CASE("encode projects onto the basis columns") {
    const LabeledDataset ds = make_synthetic(4, 2, 12, 71);
    const EncodingSpec spec(4, 2, 0.3);
    const auto fb = pcc::fit_full(spec, ds);
    const PccModel model = fb.truncate(3);

    SECTION("first basis vector maps to e1") {
        std::vector<double> u1(model.basis.col(0), model.basis.col(0) + 6);
        const auto p = pcc::encode(model, u1);
        CHECK(p.coords[0] == Catch::Approx(1.0).margin(1e-10));
        CHECK(p.coords[1] == Catch::Approx(0.0).margin(1e-10));
        CHECK(p.coords[2] == Catch::Approx(0.0).margin(1e-10));
    }
    SECTION("vectors orthogonal to the basis map to zero") {
        std::vector<double> u6(fb.decomposition.eigenvectors.col(5),
                               fb.decomposition.eigenvectors.col(5) + 6);
        for (double c : pcc::encode(model, u6).coords)
            CHECK(c == Catch::Approx(0.0).margin(1e-10));
    }
    SECTION("coordinates match plain dot products") {
        const DenseMatrix z = pcc_test::random_matrix(6, 1, 73);
        const auto p =
            pcc::encode(model, std::span<const double>(z.col(0), 6));
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(p.coords[k] == pcc::dot(model.basis.col(k), z.col(0), 6));
    }
    SECTION("shape errors") {
        CHECK_THROWS_AS(pcc::encode(model, std::vector<double>{1.0}),
                        pcc::ShapeError);
        CHECK_THROWS_AS(pcc::decode(model, pcc::Projection{{1.0}}),
                        pcc::ShapeError);
    }
}

TEST_CASE("decode is the adjoint reconstruction") {
    const LabeledDataset ds = make_synthetic(3, 2, 10, 79);
    const EncodingSpec spec(3, 2, 0.6);
    const PccModel model = pcc::fit(spec, ds, 2);

    SECTION("unit projection returns the basis column") {
        const auto r = pcc::decode(model, pcc::Projection{{1.0, 0.0}});
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(r.z_hat[i] == model.basis(i, 0));
    }
    SECTION("projection is idempotent") {
        const DenseMatrix z = pcc_test::random_matrix(5, 1, 83);
        const auto once = pcc::decode(
            model, pcc::encode(model, std::span<const double>(z.col(0), 5)));
        const auto twice = pcc::decode(model, pcc::encode(model, once.z_hat));
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(twice.z_hat[i] == Catch::Approx(once.z_hat[i]).margin(1e-10));
    }
}

TEST_CASE("projector of the truncated basis is idempotent") {
    const LabeledDataset ds = make_synthetic(6, 3, 30, 89);
    const EncodingSpec spec(6, 3, 0.35);
    const PccModel model = pcc::fit(spec, ds, 4);
    DenseMatrix ut(4, 9);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < 9; ++i) ut(k, i) = model.basis(i, k);
    const DenseMatrix proj = pcc::matmul(model.basis, ut);
    const DenseMatrix proj2 = pcc::matmul(proj, proj);
    CHECK(pcc::max_abs_diff(proj, proj2) <= 1e-9);
}

TEST_CASE("prediction reads the class block of the reconstruction") {
    const LabeledDataset ds = make_synthetic(4, 3, 21, 97);
    const EncodingSpec spec(4, 3, 0.5);
    const PccModel model = pcc::fit(spec, ds, spec.d_z());

    SECTION("training instance with its label at full rank") {
        for (std::size_t j = 0; j < 6; ++j) {
            const auto pred = pcc::predict_with_labels(
                model, std::span<const double>(ds.features.col(j), 4),
                ClassIndicator(3, ds.labels[j]));
            CHECK(pred.label == ds.labels[j]);
        }
    }
    SECTION("with alpha=0 the label input is irrelevant") {
        const PccModel m0 = pcc::fit(EncodingSpec(4, 3, 0.0), ds, 5);
        for (std::size_t j = 0; j < 6; ++j) {
            const std::span<const double> x(ds.features.col(j), 4);
            const auto a = pcc::predict_class(m0, x);
            const auto b = pcc::predict_with_labels(m0, x, ClassIndicator(3, 2));
            CHECK(a.label == b.label);
            CHECK(a.scores == b.scores);
        }
    }
}

TEST_CASE("australian with labels and four components is perfectly separable") {
    const auto australian =
        pcc::load_table(pcc_test::data_path("australian.dat"), 14, ' ');
    const auto [train, test] = pcc::balanced_split(australian, 200, 42);
    const auto scaled_train =
        pcc::apply_rescaler(pcc::fit_rescaler(train), train);
    const PccModel model =
        pcc::fit(EncodingSpec(14, 2, 0.5), scaled_train, 4);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < scaled_train.size(); ++j) {
        const auto pred = pcc::predict_with_labels(
            model, std::span<const double>(scaled_train.features.col(j), 14),
            ClassIndicator(2, scaled_train.labels[j]));
        if (pred.label == scaled_train.labels[j]) ++correct;
    }
    CHECK(correct == scaled_train.size());
}

TEST_CASE("all-zero input falls back to the lowest class index") {
    // alpha=1 with no label encodes to the zero vector: every class score
    // is exactly zero and the tie resolves to class 1
    const LabeledDataset ds = make_synthetic(4, 3, 12, 101);
    const PccModel model = pcc::fit(EncodingSpec(4, 3, 1.0), ds, 7);
    const auto pred =
        pcc::predict_class(model, std::span<const double>(ds.features.col(0), 4));
    CHECK(pred.label == 1);
    for (double s : pred.scores) CHECK(s == 0.0);
}

TEST_CASE("sign flips of basis columns do not change predictions") {
    const LabeledDataset ds = make_synthetic(5, 3, 18, 103);
    const EncodingSpec spec(5, 3, 0.45);
    const PccModel model = pcc::fit(spec, ds, 5);
    pcc::Xoshiro256ss rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        PccModel flipped = model;
        for (std::size_t k = 0; k < flipped.n_e; ++k)
            if (rng.bounded(2) == 1)
                for (std::size_t i = 0; i < flipped.d_z(); ++i)
                    flipped.basis(i, k) = -flipped.basis(i, k);
        std::vector<double> x(5);
        for (auto& v : x) v = pcc_test::uniform(rng, 0.0, 1.0);
        const auto a = pcc::predict_class(model, x);
        const auto b = pcc::predict_class(flipped, x);
        CHECK(a.label == b.label);
        CHECK(a.scores == b.scores);  // (-u)(-u.z) = u(u.z) exactly
    }
}

TEST_CASE("positive rescaling of the input keeps the label") {
    const LabeledDataset ds = make_synthetic(5, 3, 18, 107);
    const PccModel model = pcc::fit(EncodingSpec(5, 3, 0.45), ds, 4);
    pcc::Xoshiro256ss rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(5), cx(5);
        for (auto& v : x) v = pcc_test::uniform(rng, -1.0, 1.0);
        const double c = pcc_test::uniform(rng, 1e-3, 10.0);
        for (std::size_t i = 0; i < 5; ++i) cx[i] = c * x[i];
        CHECK(pcc::predict_class(model, x).label ==
              pcc::predict_class(model, cx).label);
    }
}

TEST_CASE("reconstruction error is monotone and beats random bases") {
    const LabeledDataset ds = make_synthetic(6, 2, 40, 109);
    const EncodingSpec spec(6, 2, 0.3);
    const auto fb = pcc::fit_full(spec, ds);
    const auto z = pcc::encode_dataset(spec, ds, true);

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n_e = 1; n_e <= spec.d_z(); ++n_e) {
        const double err = mean_reconstruction_error(fb.truncate(n_e), z);
        CHECK(err <= prev + 1e-12);
        prev = err;
    }

    // no random rank-3 basis reconstructs the training set better
    PccModel chosen = fb.truncate(3);
    double chosen_sq = 0.0;
    {
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const auto r = pcc::decode(
                chosen, pcc::encode(chosen, std::span<const double>(
                                                z.col(j), spec.d_z())));
            for (std::size_t i = 0; i < spec.d_z(); ++i) {
                const double d = z(i, j) - r.z_hat[i];
                chosen_sq += d * d;
            }
        }
    }
    for (std::uint64_t seed = 300; seed < 310; ++seed) {
        PccModel random_model = chosen;
        random_model.basis = random_orthonormal(spec.d_z(), 3, seed);
        double rand_sq = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const auto r = pcc::decode(
                random_model,
                pcc::encode(random_model,
                            std::span<const double>(z.col(j), spec.d_z())));
            for (std::size_t i = 0; i < spec.d_z(); ++i) {
                const double d = z(i, j) - r.z_hat[i];
                rand_sq += d * d;
            }
        }
        CHECK(chosen_sq <= rand_sq + 1e-10);
    }
}

TEST_CASE("fit validates its arguments") {
    const LabeledDataset ds = make_synthetic(3, 2, 6, 113);
    const EncodingSpec spec(3, 2, 0.5);
    CHECK_THROWS_AS(pcc::fit(spec, ds, 0), pcc::DomainError);
    CHECK_THROWS_AS(pcc::fit(spec, ds, 6), pcc::DomainError);
    LabeledDataset empty = ds;
    empty.features = DenseMatrix(3, 0);
    empty.labels.clear();
    CHECK_THROWS_AS(pcc::fit(spec, empty, 2), pcc::PreconditionError);
}

TEST_CASE("model files round-trip exactly") {
    const LabeledDataset ds = make_synthetic(5, 3, 20, 127);
    const EncodingSpec spec(5, 3, 0.37);
    PccModel model = pcc::fit(spec, ds, 4, pcc::TrainingFingerprint{"syn", 9, 0});
    const std::string path =
        (std::filesystem::temp_directory_path() / "pcc_model_test.pcc").string();
    pcc::save_model(model, path);
    const PccModel back = pcc::load_model(path);

    CHECK(back.spec.d_x == model.spec.d_x);
    CHECK(back.spec.n_c == model.spec.n_c);
    CHECK(back.spec.alpha == model.spec.alpha);
    CHECK(back.n_e == model.n_e);
    CHECK(back.fingerprint.n == model.fingerprint.n);
    CHECK(back.eigenvalues == model.eigenvalues);
    CHECK(pcc::max_abs_diff(back.basis, model.basis) == 0.0);

    pcc::Xoshiro256ss rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(5);
        for (auto& v : x) v = pcc_test::uniform(rng, -1.0, 1.0);
        const auto a = pcc::predict_class(model, x);
        const auto b = pcc::predict_class(back, x);
        CHECK(a.label == b.label);
        CHECK(a.scores == b.scores);
    }
}

TEST_CASE("model loader rejects damaged files") {
    const LabeledDataset ds = make_synthetic(4, 2, 10, 131);
    const PccModel model = pcc::fit(EncodingSpec(4, 2, 0.5), ds, 3);
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "pcc_model_damage.pcc").string();
    pcc::save_model(model, path);
    const auto bytes = pcc::detail::read_binary_file(path);

    SECTION("truncated file") {
        auto cut = bytes;
        cut.resize(cut.size() - 10);
        const std::string p2 = (dir / "pcc_model_cut.pcc").string();
        std::ofstream(p2, std::ios::binary | std::ios::trunc)
            .write(reinterpret_cast<const char*>(cut.data()),
                   static_cast<std::streamsize>(cut.size()));
        CHECK_THROWS_AS(pcc::load_model(p2), pcc::FormatError);
    }
    SECTION("flipped payload byte") {
        auto bad = bytes;
        bad[20] ^= 0x5a;
        const std::string p2 = (dir / "pcc_model_flip.pcc").string();
        std::ofstream(p2, std::ios::binary | std::ios::trunc)
            .write(reinterpret_cast<const char*>(bad.data()),
                   static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_MATCHES(pcc::load_model(p2), pcc::FormatError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("checksum")));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(pcc::load_model("/nonexistent/model.pcc"), pcc::IoError);
    }
}

TEST_CASE("parameter count is components times joint dimension") {
    PccModel m;
    m.spec = EncodingSpec(784, 10, 0.9);
    m.n_e = 16;
    m.basis = DenseMatrix(794, 16);
    for (std::size_t k = 0; k < 16; ++k) m.basis(k, k) = 1.0;
    m.eigenvalues.assign(16, 1.0);
    CHECK(m.parameter_count() == 12704);

    const std::string path =
        (std::filesystem::temp_directory_path() / "pcc_model_794.pcc").string();
    pcc::save_model(m, path);
    CHECK(pcc::load_model(path).parameter_count() == 12704);
}
