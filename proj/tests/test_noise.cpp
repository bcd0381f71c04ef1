#include <cmath>
#include <sstream>

#include "doctest.h"
#include "knet/errors.hpp"
#include "knet/noise.hpp"
#include "noise_stats.hpp"

using namespace knet;

namespace {

void check_row_stochastic(const TransitionMatrix& tm) {
    for (std::size_t r = 0; r < tm.num_labels(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < tm.num_labels(); ++c) {
            CHECK(tm(r, c) >= 0.0);
            CHECK(tm(r, c) <= 1.0);
            sum += tm(r, c);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

bool is_identity(const TransitionMatrix& tm) {
    for (std::size_t r = 0; r < tm.num_labels(); ++r)
        for (std::size_t c = 0; c < tm.num_labels(); ++c)
            if (tm(r, c) != (r == c ? 1.0 : 0.0)) return false;
    return true;
}

}  // namespace

TEST_SUITE("noise") {

TEST_CASE("uniform matrix") {
    auto tm = make_uniform(0.4, 10);
    check_row_stochastic(tm);
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) CHECK(tm(r, c) == doctest::Approx(r == c ? 0.64 : 0.04));
    CHECK(is_identity(make_uniform(0.0, 5)));
    auto half = make_uniform(1.0, 2);
    for (double v : half.rows().values()) CHECK(v == doctest::Approx(0.5));
    CHECK_THROWS_AS(make_uniform(1.5, 3), RangeError);
    CHECK_THROWS_AS(make_uniform(-0.1, 3), RangeError);
}

TEST_CASE("random asymmetric matrix") {
    auto tm = make_random_asym(0.3, 6, 12);
    check_row_stochastic(tm);
    for (std::size_t c = 0; c < 6; ++c) {
        auto [first, second] = tm.flip_targets().at(c);
        CHECK(first != c);
        CHECK(second != c);
        CHECK(first != second);
        CHECK(tm(c, c) == doctest::Approx(0.7));
        CHECK(tm(c, first) == doctest::Approx(0.2));
        CHECK(tm(c, second) == doctest::Approx(0.1));
    }
    CHECK(make_random_asym(0.3, 6, 12).rows() == tm.rows());
    CHECK(is_identity(make_random_asym(0.0, 4, 1)));
    CHECK(is_identity(make_random_asym(0.0, 4, 2)));
    CHECK_THROWS_AS(make_random_asym(0.3, 2, 1), UnsupportedError);
}

TEST_CASE("cyclic option flips to the next class then the third") {
    auto tm = make_random_asym(0.3, 3, 0, true);
    CHECK(tm(0, 1) == doctest::Approx(0.2));
    CHECK(tm(0, 2) == doctest::Approx(0.1));
    CHECK(tm(1, 2) == doctest::Approx(0.2));
    CHECK(tm(1, 0) == doctest::Approx(0.1));
    CHECK(tm(2, 0) == doctest::Approx(0.2));
    CHECK(tm(2, 1) == doctest::Approx(0.1));
}

TEST_CASE("semantic pairs") {
    const std::vector<std::pair<Label, Label>> pairs{{9, 1}};
    auto tm = make_semantic(pairs, 0.4, 10);
    check_row_stochastic(tm);
    CHECK(tm(9, 9) == doctest::Approx(0.6));
    CHECK(tm(9, 1) == doctest::Approx(0.4));
    CHECK(tm(1, 9) == doctest::Approx(0.4));
    CHECK(tm(3, 3) == 1.0);
    CHECK(is_identity(make_semantic({}, 0.4, 10)));
    CHECK(is_identity(make_semantic(pairs, 0.0, 10)));

    const std::vector<std::pair<Label, Label>> overlapping{{0, 1}, {1, 2}};
    CHECK_THROWS_AS(make_semantic(overlapping, 0.2, 5), ValidationError);
    const std::vector<std::pair<Label, Label>> self_pair{{2, 2}};
    CHECK_THROWS_AS(make_semantic(self_pair, 0.2, 5), ValidationError);
}

TEST_CASE("identity matrix flips nothing and keeps features") {
    LabeledDataset ds{Matrix::from_rows({{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}}), {0, 1, 2}, 3};
    auto noisy = apply_noise(ds, make_uniform(0.0, 3), 4);
    CHECK(noisy.dataset == ds);
    for (const auto& f : noisy.record) CHECK_FALSE(f.flipped);
}

TEST_CASE("apply noise is deterministic and preserves features") {
    auto clean = noise_stats::balanced(3, 500);
    auto tm = make_uniform(0.5, 3);
    auto a = apply_noise(clean, tm, 21);
    auto b = apply_noise(clean, tm, 21);
    CHECK(a.dataset == b.dataset);
    CHECK(a.dataset.vectors == clean.vectors);
    for (std::size_t i = 0; i < a.record.size(); ++i) {
        CHECK(a.record[i].original == clean.labels[i]);
        CHECK(a.record[i].resulting == a.dataset.labels[i]);
        CHECK(a.record[i].flipped == (a.record[i].original != a.record[i].resulting));
    }
    CHECK(apply_noise(clean, tm, 22).dataset.labels != a.dataset.labels);
}

TEST_CASE("labels outside the matrix are a range error") {
    LabeledDataset ds{Matrix::from_rows({{0.0}}), {4}, 5};
    CHECK_THROWS_AS(apply_noise(ds, make_uniform(0.1, 3), 1), RangeError);
}

TEST_CASE("empirical flips stay within three sigma") {
    SUBCASE("uniform") {
        auto tm = make_uniform(0.4, 10);
        auto result = noise_stats::check(tm, 20000, 31);
        INFO(result.worst_cell);
        CHECK(result.violations == 0);
    }
    SUBCASE("random asymmetric") {
        auto tm = make_random_asym(0.3, 5, 3);
        auto result = noise_stats::check(tm, 20000, 32);
        INFO(result.worst_cell);
        CHECK(result.violations == 0);
    }
    SUBCASE("semantic") {
        const std::vector<std::pair<Label, Label>> pairs{{9, 1}, {2, 0}};
        auto result = noise_stats::check(make_semantic(pairs, 0.4, 10), 20000, 33);
        INFO(result.worst_cell);
        CHECK(result.violations == 0);
    }
}

TEST_CASE("matrix file round trip") {
    auto tm = make_random_asym(0.3, 4, 9);
    std::stringstream ss;
    tm.save(ss);
    CHECK(ss.str().rfind("TM v1 L=4\n", 0) == 0);
    auto loaded = TransitionMatrix::load(ss);
    CHECK(loaded.rows() == tm.rows());

    std::stringstream not_stochastic("TM v1 L=2\n0.5 0.6\n0 1\n");
    CHECK_THROWS_AS(TransitionMatrix::load(not_stochastic), ValidationError);
    std::stringstream short_rows("TM v1 L=2\n1 0\n");
    CHECK_THROWS_AS(TransitionMatrix::load(short_rows), ParseError);
}

}  // TEST_SUITE
