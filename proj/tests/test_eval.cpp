#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "knet/errors.hpp"
#include "knet/eval.hpp"
#include "knet/rng.hpp"
#include "oracles.hpp"
#include "toy_fixture.hpp"

using namespace knet;

namespace {

Classifier constant(Label label, std::size_t input_dim = 2, std::size_t L = 3) {
    return Classifier::from_function("constant", input_dim, L, [=](const Matrix& x) {
        Matrix out(x.rows(), L, 0.0);
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, label) = 1.0;
        return out;
    });
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("accuracy of trivial classifiers") {
    auto test = gen_toy(100, 3);
    CHECK(accuracy(constant(0), test) == doctest::Approx(1.0 / 3.0));

    // Recovers the label from the class-major row order.
    auto oracle_clf = Classifier::from_function("oracle", 2, 3, [&](const Matrix& x) {
        Matrix out(x.rows(), 3, 0.0);
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, test.labels[r]) = 1.0;
        return out;
    });
    CHECK(accuracy(oracle_clf, test) == 1.0);
    CHECK_THROWS_AS(accuracy(constant(0, 3), test), ShapeError);
}

TEST_CASE("accuracy ignores sample order") {
    const auto& f = toy::fixture();
    Classifier clf = Classifier::knn(f.index, 5, &f.prelim);
    LabeledDataset shuffled = f.test;
    std::vector<std::size_t> order(shuffled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(3);
    rng.shuffle(std::span<std::size_t>(order));
    shuffled.vectors = f.test.vectors.gather(order);
    for (std::size_t i = 0; i < order.size(); ++i) shuffled.labels[i] = f.test.labels[order[i]];
    CHECK(accuracy(clf, shuffled) == accuracy(clf, f.test));
}

TEST_CASE("kNN on toy: 1-NN is noisier than 49-NN") {
    const auto& f = toy::fixture();
    const double k1 = accuracy(Classifier::knn(f.index, 1, &f.prelim), f.test);
    const double k49 = accuracy(Classifier::knn(f.index, 49, &f.prelim), f.test);
    CHECK(k1 < k49);
}

TEST_CASE("mad curve of a system against itself is zero") {
    const auto& f = toy::fixture();
    const std::vector<std::size_t> ks{1, 5, 51};
    auto pdfs = knn_pdfs(f.index, f.test_embeddings.vectors, ks);
    for (const auto& p : pdf_mad_curve(pdfs, pdfs, ks)) CHECK(p.value == 0.0);
}

TEST_CASE("curve bounds") {
    const auto& f = toy::fixture();
    const std::vector<std::size_t> ks{1, 11, 51, 101};
    const double L = 3.0;
    for (const auto& p : pdf_mad_curve(f.index, f.knet, f.test_embeddings.vectors, ks)) {
        CHECK(p.value >= 0.0);
        CHECK(p.value <= 2.0 / L);
    }
    auto knn_max = max_pdf_curve(f.index, f.test_embeddings.vectors, ks);
    CHECK(knn_max[0].value == 1.0);
    for (const auto& p : knn_max) CHECK((p.value >= 1.0 / L && p.value <= 1.0));
    for (const auto& p : max_pdf_curve(f.knet, f.test_embeddings.vectors, ks))
        CHECK((p.value >= 1.0 / L && p.value <= 1.0));

    const std::vector<std::size_t> too_big{f.index.size() + 1};
    CHECK_THROWS_AS(max_pdf_curve(f.index, f.test_embeddings.vectors, too_big), RangeError);
}

TEST_CASE("toy smooth-approximation ordering") {
    const auto& f = toy::fixture();
    const std::vector<std::size_t> ks{1, 51};
    auto mad = pdf_mad_curve(f.index, f.knet, f.test_embeddings.vectors, ks);
    auto knn_max = max_pdf_curve(f.index, f.test_embeddings.vectors, ks);
    auto knet_max = max_pdf_curve(f.knet, f.test_embeddings.vectors, ks);
    CHECK(mad[0].value > mad[1].value);
    CHECK(std::abs(knn_max[1].value - knet_max[1].value) < std::abs(knn_max[0].value - knet_max[0].value));
}

TEST_CASE("grid cell centers") {
    BoundingBox box{0.0, 0.0, 1.0, 2.0};
    Matrix pts = grid_points(box, 2, 2);
    CHECK(pts == Matrix::from_rows({{0.25, 0.5}, {0.75, 0.5}, {0.25, 1.5}, {0.75, 1.5}}));
    Matrix center = grid_points(BoundingBox{}, 1, 1);
    CHECK(center(0, 0) == doctest::Approx(0.5));
    CHECK(center(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("boundary raster") {
    LabelGrid uniform = boundary_raster(constant(2), BoundingBox{}, 7, 5);
    CHECK(uniform.cells.size() == 35);
    for (Label l : uniform.cells) CHECK(l == 2);

    auto by_x = Classifier::from_function("left-right", 2, 2, [](const Matrix& x) {
        Matrix out(x.rows(), 2, 0.0);
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, x(r, 0) < 0.5 ? 0 : 1) = 1.0;
        return out;
    });
    LabelGrid single = boundary_raster(by_x, BoundingBox{0.4, 0.0, 0.7, 1.0}, 1, 1);
    CHECK(single.cells == std::vector<Label>{1});
    LabelGrid split = boundary_raster(by_x, BoundingBox{0, 0, 1, 1}, 4, 2);
    CHECK(split.at(0, 0) == 0);
    CHECK(split.at(3, 1) == 1);
    CHECK(boundary_raster(by_x, BoundingBox{0, 0, 1, 1}, 4, 2) == split);

    CHECK_THROWS_AS(boundary_raster(constant(0, 3), BoundingBox{}, 2, 2), UnsupportedError);
    CHECK_THROWS_AS(boundary_raster(constant(0), BoundingBox{}, 0, 2), RangeError);
}

TEST_CASE("toy kNet rasters agree across k") {
    const auto& f = toy::fixture();
    auto a = boundary_raster(Classifier::knet(f.knet, 19, &f.prelim), f.cfg.bbox, 100, 100);
    auto b = boundary_raster(Classifier::knet(f.knet, 49, &f.prelim), f.cfg.bbox, 100, 100);
    const double diff = raster_disagreement(a, b);
    MESSAGE("k=19 vs k=49 disagreement " << diff);
    CHECK(diff < 0.05);
}

TEST_CASE("scatter raster marks sample cells") {
    LabeledDataset ds{Matrix::from_rows({{0.1, 0.1}, {0.9, 0.9}}), {0, 1}, 2};
    LabelGrid g = scatter_raster(ds, BoundingBox{0, 0, 1, 1}, 2, 2);
    CHECK(g.at(0, 0) == 0);
    CHECK(g.at(1, 1) == 1);
    CHECK(g.at(1, 0) == LabelGrid::kBackground);
}

TEST_CASE("ppm output") {
    LabelGrid g{2, 1, {0, LabelGrid::kBackground}};
    std::ostringstream out;
    write_ppm(out, g, 3);
    const std::string text = out.str();
    CHECK(text.rfind("P3\n#", 0) == 0);
    CHECK(text.find("2 1\n255\n") != std::string::npos);
    CHECK(text.find("220 60 60") != std::string::npos);
    CHECK(text.find("255 255 255") != std::string::npos);
    CHECK(palette_color(1, 3) == std::array<unsigned char, 3>{60, 180, 75});
    CHECK(palette_color(2, 3) == std::array<unsigned char, 3>{65, 105, 225});
    CHECK(palette_color(5, 10) != palette_color(6, 10));
}

TEST_CASE("csv output") {
    std::ostringstream curve;
    const std::vector<CurvePoint> points{{1, 0.5}, {51, 0.25}};
    write_curve_csv(curve, points);
    CHECK(curve.str() == "k,value\n1,0.5\n51,0.25\n");

    std::ostringstream table;
    const std::vector<AccuracyRow> rows{{"net", 0, 0.75, 211}, {"knn", 19, 0.5, 24211}};
    write_accuracy_csv(table, rows);
    CHECK(table.str() == "system,k,accuracy,params\nnet,,0.75,211\nknn,19,0.5,24211\n");
}

TEST_CASE("memory accounting") {
    auto big = memory_report(50000, 256, 4330, 870000);
    CHECK(big.knn_values == 12800000);
    CHECK(format_count(big.knn_values) == "12.8M");
    CHECK(format_count(4330) == "4.3K");

    const auto& f = toy::fixture();
    auto toy_report = memory_report(f.index, f.knet, f.prelim);
    CHECK(toy_report.knn_values == 24000);
    CHECK(toy_report.knet_params == 18);
    CHECK(toy_report.prelim_params == f.prelim.param_count());
    CHECK(toy_report.knn_to_knet_ratio == doctest::Approx(24000.0 / 18.0));

    auto empty = memory_report(0, 0, 0, 0);
    CHECK(empty.knn_values == 0);
    CHECK(empty.knn_to_knet_ratio >= 0.0);
}

}  // TEST_SUITE
