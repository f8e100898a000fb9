#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fit4cad/persistence.hpp"
#include "helpers.hpp"

#include <random>

using namespace fit4cad;

static void check_same_peaks(const std::vector<GridPeak>& got, const std::vector<GridPeak>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].cell == want[i].cell);
        CHECK(got[i].height == doctest::Approx(want[i].height).epsilon(1e-12));
        CHECK(got[i].persistence == doctest::Approx(want[i].persistence).epsilon(1e-12));
    }
}

TEST_CASE("two-peak profile") {
    std::vector<double> values = {0, 5, 1, 4, 0};
    auto peaks = persistent_maxima(values, {5}, 0.1);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0].cell == std::vector<int>{1});
    CHECK(peaks[0].height == 5.0);
    CHECK(peaks[0].persistence == 5.0);  // global maximum keeps its full height
    CHECK(peaks[1].cell == std::vector<int>{3});
    CHECK(peaks[1].height == 4.0);
    CHECK(peaks[1].persistence == 3.0);  // dies when merging at the saddle value 1
}

TEST_CASE("single nonzero cell") {
    std::vector<double> values(9, 0.0);
    values[4] = 2.5;
    auto peaks = persistent_maxima(values, {3, 3}, 0.5);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].cell == std::vector<int>{1, 1});
    CHECK(peaks[0].height == 2.5);
    CHECK(peaks[0].persistence == 2.5);
}

TEST_CASE("ratio 1.0 keeps only the global maximum") {
    std::vector<double> values = {0, 5, 1, 4, 0, 4.9, 0};
    auto peaks = persistent_maxima(values, {7}, 1.0);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].cell == std::vector<int>{1});
}

TEST_CASE("all-zero grid yields no persistent maxima") {
    std::vector<double> values(12, 0.0);
    CHECK(persistent_maxima(values, {3, 4}, 0.1).empty());
    // the raw sweep still reports the (zero-height) essential class
    auto raw = grid_persistence(values, {3, 4});
    REQUIRE(raw.size() == 1);
    CHECK(raw[0].height == 0.0);
    CHECK(raw[0].persistence == 0.0);
}

TEST_CASE("random 1-D grids match the flood-fill oracle") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> size(1, 48);
    std::uniform_int_distribution<int> level(0, 6);
    for (int trial = 0; trial < 60; ++trial) {
        int n = size(rng);
        std::vector<double> values(n);
        for (double& v : values) v = level(rng);  // ties are common on purpose
        check_same_peaks(grid_persistence(values, {n}),
                         testutil::brute_force_persistence(values, {n}));
    }
}

TEST_CASE("random 2-D grids match the flood-fill oracle") {
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> size(1, 10);
    std::uniform_real_distribution<double> value(0.0, 4.0);
    std::uniform_int_distribution<int> level(0, 4);
    for (int trial = 0; trial < 40; ++trial) {
        int rows = size(rng), cols = size(rng);
        std::vector<double> values(rows * cols);
        bool quantized = trial % 2 == 0;
        for (double& v : values) v = quantized ? double(level(rng)) : value(rng);
        check_same_peaks(grid_persistence(values, {rows, cols}),
                         testutil::brute_force_persistence(values, {rows, cols}));
    }
}

TEST_CASE("persistent_maxima applies the ratio filter to grid_persistence") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> level(0, 5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> values(40);
        for (double& v : values) v = level(rng);
        double vmax = *std::max_element(values.begin(), values.end());
        auto all = grid_persistence(values, {8, 5});
        std::vector<GridPeak> expect;
        for (const auto& p : all)
            if ((p.persistence == p.height && p.height == vmax) || p.persistence > 0.3 * vmax)
                expect.push_back(p);
        check_same_peaks(persistent_maxima(values, {8, 5}, 0.3), expect);
    }
}
