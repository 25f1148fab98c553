#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ndv/profile.hpp"

using namespace ndv;

TEST_SUITE("profile") {

TEST_CASE("build_profile counts frequencies of frequencies") {
    // sample: 7 x3, 2 x2, 9 x2, 5 x1, 1 x1  ->  f = [2, 2, 1]
    const std::vector<std::int64_t> sample{7, 7, 7, 2, 2, 9, 9, 5, 1};
    const FrequencyProfile p = build_profile(sample, 20);
    CHECK(p.f == std::vector<std::int64_t>{2, 2, 1});
    CHECK(p.d == 5);
    CHECK(p.n == 9);
    CHECK(p.N == 20);
    CHECK(p.r == doctest::Approx(0.45).epsilon(1e-15));
    CHECK_NOTHROW(check_profile(p));

    SUBCASE("f_at is 1-based and zero outside") {
        CHECK(p.f_at(1) == 2);
        CHECK(p.f_at(3) == 1);
        CHECK(p.f_at(0) == 0);
        CHECK(p.f_at(4) == 0);
        CHECK(p.f_at(-2) == 0);
        CHECK(p.max_count() == 3);
    }
    SUBCASE("value identity is irrelevant, only counts matter") {
        const std::vector<std::int64_t> renamed{-1, -1, -1, 42, 42,
                                                 7,  7,  99, 1000000};
        CHECK(build_profile(renamed, 20).f == p.f);
    }
    CHECK_THROWS_AS(build_profile(std::vector<std::int64_t>{}, 5),
                    std::domain_error);
    CHECK_THROWS_AS(build_profile(sample, 8), std::domain_error);  // N < n
}

TEST_CASE("check_profile rejects broken invariants") {
    FrequencyProfile ok{{1, 1, 2}, 4, 9, 900, 0.01};
    CHECK_NOTHROW(check_profile(ok));

    FrequencyProfile bad = ok;
    bad.d = 5;  // sum f_j = 4 != 5
    CHECK_THROWS_AS(check_profile(bad), std::domain_error);

    bad = ok;
    bad.n = 10;  // sum j f_j = 9 != 10 (and r breaks too)
    CHECK_THROWS_AS(check_profile(bad), std::domain_error);

    bad = ok;
    bad.r = 0.02;
    CHECK_THROWS_AS(check_profile(bad), std::domain_error);

    bad = ok;
    bad.f = {-1, 5, 0};  // negative entry; sums still match d=4, n=9
    CHECK_THROWS_AS(check_profile(bad), std::domain_error);

    bad = ok;
    bad.N = 5;  // n > N
    bad.r = 9.0 / 5.0;
    CHECK_THROWS_AS(check_profile(bad), std::domain_error);
}

TEST_CASE("sample_uniform draws without replacement") {
    ColumnData col;
    for (int v = 1; v <= 10; ++v) {
        for (int c = 0; c < v; ++c) col.values.push_back(v);
    }  // 55 rows, value v appears v times

    SUBCASE("rate 1.0 returns a permutation of the column") {
        auto s = sample_uniform(col, 1.0, 7);
        REQUIRE(s.size() == col.values.size());
        auto a = s;
        auto b = col.values;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
    SUBCASE("per-value multiplicity never exceeds the column's") {
        auto s = sample_uniform(col, 0.4, 123);
        CHECK(s.size() == 22);  // max(1, round(0.4 * 55))
        std::map<std::int64_t, int> counts;
        for (auto v : s) ++counts[v];
        for (const auto& [v, c] : counts) {
            CHECK(c <= static_cast<int>(v));
        }
    }
    SUBCASE("deterministic per seed") {
        CHECK(sample_uniform(col, 0.3, 9) == sample_uniform(col, 0.3, 9));
        CHECK(sample_uniform(col, 0.3, 9) != sample_uniform(col, 0.3, 10));
    }
    SUBCASE("tiny rates clamp the sample to one row") {
        CHECK(sample_uniform(col, 1e-9, 3).size() == 1);
    }
    CHECK_THROWS_AS(sample_uniform(col, 0.0, 1), std::domain_error);
    CHECK_THROWS_AS(sample_uniform(col, 1.5, 1), std::domain_error);
    CHECK_THROWS_AS(sample_uniform(ColumnData{}, 0.5, 1), std::domain_error);
}

TEST_CASE("exact_stats scans the full column") {
    ColumnData col{{1, 1, 2, 3, 3, 3}};
    const ExactColumnStats st = exact_stats(col);
    CHECK(st.D == 3);
    CHECK(st.N == 6);
    REQUIRE(st.F.size() == 3);
    CHECK(st.F.at(1) == 1);  // value 2 appears once
    CHECK(st.F.at(2) == 1);  // value 1 appears twice
    CHECK(st.F.at(3) == 1);  // value 3 appears three times
}

TEST_CASE("featurize lays out [f_1.., ln n, ln d, ln N]") {
    const FrequencyProfile toy{{1, 1, 2}, 4, 9, 900, 0.01};

    SUBCASE("zero padding") {
        const auto x = featurize(toy, 10);
        REQUIRE(x.size() == 10);
        CHECK(x[0] == 1.0);
        CHECK(x[1] == 1.0);
        CHECK(x[2] == 2.0);
        for (int i = 3; i < 7; ++i) CHECK(x[i] == 0.0);
        CHECK(x[7] == doctest::Approx(std::log(9.0)).epsilon(1e-15));
        CHECK(x[8] == doctest::Approx(std::log(4.0)).epsilon(1e-15));
        CHECK(x[9] == doctest::Approx(std::log(900.0)).epsilon(1e-15));
    }
    SUBCASE("truncation at H-3") {
        const auto x = featurize(toy, 4);
        REQUIRE(x.size() == 4);
        CHECK(x[0] == 1.0);  // only f_1 fits
        CHECK(x[1] == doctest::Approx(std::log(9.0)));
        CHECK(x[2] == doctest::Approx(std::log(4.0)));
        CHECK(x[3] == doctest::Approx(std::log(900.0)));
    }
    SUBCASE("rescale log-transforms only the profile prefix") {
        const auto x = featurize(toy, 10, true);
        CHECK(x[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
        CHECK(x[2] == doctest::Approx(std::log(3.0)).epsilon(1e-15));
        CHECK(x[3] == 0.0);  // ln(1 + 0)
        CHECK(x[7] == doctest::Approx(std::log(9.0)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(featurize(toy, 3), std::domain_error);
}

}  // TEST_SUITE
