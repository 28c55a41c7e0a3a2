#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nfde/data.hpp"
#include "nfde/errors.hpp"

using nfde::SplitSpec;
using nfde::TimeGrid;
using nfde::TimeSeries;

namespace {

// Scratch file helper; contents are written fresh for each case.
struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& name, const std::string& content) {
        path = (std::filesystem::temp_directory_path() / name).string();
        std::ofstream os(path);
        os << content;
    }
    ~TempCsv() { std::filesystem::remove(path); }
};

} // namespace

TEST_CASE("relaxation generator matches the exponential closed form at alpha = 1") {
    // x(t) = 1 + (x0 - 1) e^{-t}; refined internal grid keeps nodes accurate.
    const TimeGrid grid{0.0, 0.05, 20}; // t in [0, 1]
    const TimeSeries s = nfde::gen_ro(1.0, 0.3, grid);
    REQUIRE(s.size() == 21);
    CHECK(s.times.front() == 0.0);
    CHECK(s.times.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.values[0][0] == 0.3);
    const double exact = 1.0 - 0.7 * std::exp(-1.0);
    CHECK(std::abs(s.values[20][0] - exact) <= 1e-4);
}

TEST_CASE("relaxation generator matches the Mittag-Leffler form at alpha = 0.5") {
    const TimeGrid grid{0.0, 0.05, 20};
    const TimeSeries s = nfde::gen_ro(0.5, 0.3, grid);
    // 1 - 0.7 E_{1/2}(-1) with the erfc closed form as the oracle.
    const double exact = 1.0 - 0.7 * std::exp(1.0) * std::erfc(1.0);
    CHECK(exact == doctest::Approx(0.70069149669093507).epsilon(1e-12));
    CHECK(std::abs(s.values[20][0] - exact) <= 1e-3);
}

TEST_CASE("relaxation series is monotone and bounded") {
    const TimeGrid grid{0.0, 0.2, 50};
    const TimeSeries s = nfde::gen_ro(0.7, 0.3, grid);
    for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s.values[i][0] > s.values[i - 1][0]);
        CHECK(s.values[i][0] < 1.0);
    }
}

TEST_CASE("population generator matches the logistic closed form at alpha = 1") {
    const TimeGrid grid{0.0, 0.1, 100}; // t in [0, 10]
    const TimeSeries s = nfde::gen_pg(1.0, 0.1, 1000.0, 100.0, grid);
    // P(t) = K / (1 + (K/P0 - 1) e^{-rt})
    const double exact = 1000.0 / (1.0 + 9.0 * std::exp(-1.0));
    CHECK(std::abs(s.values[100][0] - exact) <= 0.05);
}

TEST_CASE("population series is monotone and bounded by the carrying capacity") {
    const TimeGrid grid{0.0, 1.0, 60};
    const TimeSeries s = nfde::gen_pg(0.8, 0.1, 1000.0, 100.0, grid);
    for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s.values[i][0] > s.values[i - 1][0]);
        CHECK(s.values[i][0] < 1000.0);
    }
}

TEST_CASE("generators validate their inputs") {
    const TimeGrid grid{0.0, 0.1, 10};
    CHECK_THROWS(nfde::gen_ro(0.0, 0.3, grid));
    CHECK_THROWS(nfde::gen_pg(0.8, 0.1, 0.0, 100.0, grid)); // K must be positive
}

TEST_CASE("csv loading by column name and by index") {
    TempCsv f("nfde_t1.csv", "t,price\n0,1.5\n1,2.5\n2,4.0\n");
    const auto by_name = nfde::load_csv(f.path, "t", "price");
    CHECK(by_name.skipped_rows == 0);
    REQUIRE(by_name.series.size() == 3);
    CHECK(by_name.series.times == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(by_name.series.values[2][0] == 4.0);

    const auto by_index = nfde::load_csv(f.path, "0", "1");
    CHECK(by_index.series.times == by_name.series.times);
    CHECK(by_index.series.values == by_name.series.values);
}

TEST_CASE("csv dates become day offsets from the first data row") {
    TempCsv f("nfde_t2.csv",
              "date,close\n2024-01-01,10\n2024-01-03,12\n2024-01-02,11\n");
    const auto r = nfde::load_csv(f.path, "date", "close");
    REQUIRE(r.series.size() == 3);
    CHECK(r.series.times == std::vector<double>{0.0, 1.0, 2.0}); // sorted ascending
    CHECK(r.series.values[0][0] == 10.0);
    CHECK(r.series.values[1][0] == 11.0);
    CHECK(r.series.values[2][0] == 12.0);
}

TEST_CASE("csv skips unparseable rows and counts them") {
    TempCsv f("nfde_t3.csv", "t,v\n0,1\nbad,2\n1,7\nx,\n2,3\n,,\n3,4\n");
    const auto r = nfde::load_csv(f.path, "t", "v");
    CHECK(r.skipped_rows == 3);
    REQUIRE(r.series.size() == 4);
    CHECK(r.series.times == std::vector<double>{0.0, 1.0, 2.0, 3.0});
}

TEST_CASE("csv deduplicates timestamps keeping the first occurrence") {
    TempCsv f("nfde_t4.csv", "t,v\n0,1\n1,5\n1,6\n2,9\n");
    const auto r = nfde::load_csv(f.path, "t", "v");
    REQUIRE(r.series.size() == 3);
    CHECK(r.series.values[1][0] == 5.0);
}

TEST_CASE("csv error cases") {
    CHECK_THROWS_AS(nfde::load_csv("/nonexistent/x.csv", "0", "1"), nfde::DataError);

    TempCsv one("nfde_t5.csv", "t,v\n0,1\n");
    CHECK_THROWS_AS(nfde::load_csv(one.path, "t", "v"), nfde::DataError);

    TempCsv f("nfde_t6.csv", "t,v\n0,1\n1,2\n");
    CHECK_THROWS_AS(nfde::load_csv(f.path, "missing", "v"), nfde::DataError);
}

TEST_CASE("normalization maps to [0,1] and round trips") {
    TimeSeries s;
    s.times = {0.0, 1.0, 2.0};
    s.values = {{1.0}, {2.0}, {3.0}};
    auto [n, stats] = nfde::normalize(s);
    CHECK(n.values[0][0] == 0.0);
    CHECK(n.values[1][0] == 0.5);
    CHECK(n.values[2][0] == 1.0);
    CHECK(stats.min[0] == 1.0);
    CHECK(stats.max[0] == 3.0);

    const TimeSeries back = nfde::denormalize(n, stats);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(back.values[i][0] == doctest::Approx(s.values[i][0]).epsilon(1e-15));

    const TimeSeries again = nfde::apply_norm(s, stats);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(again.values[i][0] == n.values[i][0]);
}

TEST_CASE("normalization rejects constant dimensions") {
    TimeSeries s;
    s.times = {0.0, 1.0};
    s.values = {{5.0}, {5.0}};
    CHECK_THROWS(nfde::normalize(s));
}

TEST_CASE("reconstruction split copies the series to both sides") {
    TimeSeries s;
    for (int i = 0; i < 5; ++i) {
        s.times.push_back(i);
        s.values.push_back({static_cast<double>(i * i)});
    }
    SplitSpec spec;
    spec.kind = SplitSpec::Kind::reconstruction;
    const nfde::Split sp = nfde::make_split(s, spec);
    CHECK(sp.train.times == s.times);
    CHECK(sp.test.times == s.times);
    CHECK(sp.train.values == s.values);
}

TEST_CASE("extrapolation split by index") {
    TimeSeries s;
    for (int i = 0; i < 6; ++i) {
        s.times.push_back(i);
        s.values.push_back({1.0 * i});
    }
    SplitSpec spec;
    spec.kind = SplitSpec::Kind::extrapolation;
    spec.by_index = true;
    spec.train_count = 3;
    spec.test_count = 2;
    const nfde::Split sp = nfde::make_split(s, spec);
    CHECK(sp.train.times == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(sp.test.times == std::vector<double>{3.0, 4.0});
}

TEST_CASE("extrapolation split by horizon keeps the test a superset window") {
    TimeSeries s;
    for (int i = 0; i < 6; ++i) {
        s.times.push_back(i);
        s.values.push_back({1.0 * i});
    }
    SplitSpec spec;
    spec.kind = SplitSpec::Kind::extrapolation;
    spec.by_index = false;
    spec.train_horizon = 2.0;
    const nfde::Split sp = nfde::make_split(s, spec);
    CHECK(sp.train.times == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(sp.test.times == s.times);
    CHECK(sp.test.times.back() > spec.train_horizon);
}

TEST_CASE("completion split holds out every stride-th point") {
    TimeSeries s;
    for (int i = 0; i < 9; ++i) {
        s.times.push_back(i);
        s.values.push_back({1.0 * i});
    }
    SplitSpec spec;
    spec.kind = SplitSpec::Kind::completion;
    spec.holdout_stride = 3;
    const nfde::Split sp = nfde::make_split(s, spec);
    CHECK(sp.train.times == std::vector<double>{0.0, 1.0, 3.0, 4.0, 6.0, 7.0});
    CHECK(sp.test.times == std::vector<double>{2.0, 5.0, 8.0});
}

TEST_CASE("completion splits are disjoint and cover the series") {
    TimeSeries s;
    for (int i = 0; i < 20; ++i) {
        s.times.push_back(0.5 * i);
        s.values.push_back({1.0 * i});
    }
    for (int stride = 2; stride <= 4; ++stride) {
        SplitSpec spec;
        spec.kind = SplitSpec::Kind::completion;
        spec.holdout_stride = stride;
        const nfde::Split sp = nfde::make_split(s, spec);
        CHECK(sp.train.size() + sp.test.size() == s.size());
        for (double tt : sp.test.times)
            for (double tr : sp.train.times) CHECK(tt != tr);
    }
}

TEST_CASE("series csv round trip preserves values bit-exactly") {
    TimeSeries s;
    s.times = {0.0, 0.1, 0.2};
    s.values = {{0.3}, {0.123456789012345678}, {1e-17}};
    const std::string path =
        (std::filesystem::temp_directory_path() / "nfde_series_rt.csv").string();
    nfde::write_series_csv(s, path);
    const TimeSeries back = nfde::read_series_csv(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.times[i] == s.times[i]);
        CHECK(back.values[i][0] == s.values[i][0]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("generation manifest lands next to the dataset") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "nfde_manifest_t.csv").string();
    const TimeGrid grid{0.0, 0.1, 10};
    nfde::write_generation_manifest(path, "ro", 0.9, grid, 8, {{"x0", 0.3}});
    std::ifstream is(path + ".manifest.json");
    REQUIRE(is.good());
    std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(all.find("\"system\": \"ro\"") != std::string::npos);
    CHECK(all.find("\"alpha\": 0.9") != std::string::npos);
    CHECK(all.find("\"x0\": 0.3") != std::string::npos);
    std::filesystem::remove(path + ".manifest.json");
}
