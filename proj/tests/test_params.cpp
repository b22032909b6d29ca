#include <catch_amalgamated.hpp>

#include "ckn/params.hpp"

using namespace ckn;

TEST_CASE("d=3 p=2 lands on the documented FS point") {
    auto fp = make_params(3, 2.0);
    CHECK(fp.lambda_fs == Catch::Approx(1.6).epsilon(1e-15));
    CHECK(fp.a_c == 0.5);
    CHECK(fp.a == Catch::Approx(-0.7649110640673518).margin(1e-12));
    CHECK(fp.b == Catch::Approx(-0.2649110640673518).margin(1e-12));
    CHECK(fp.A_p == 1.0);
    CHECK(fp.B_p == 0.0);
}

TEST_CASE("lambda identities hold to machine precision") {
    for (auto [d, p] : {std::pair{3, 2.0}, {2, 3.0}, {3, 1.5}, {4, 2.5}, {5, 2.0}}) {
        auto fp = make_params(d, p);
        const double t = fp.a_c - fp.a;
        CHECK(fp.lambda_fs ==
              Catch::Approx(4.0 * (d - 1) / ((p + 1) * (p + 1) - 4)).epsilon(1e-15));
        CHECK(t * t == Catch::Approx(fp.lambda_fs).epsilon(1e-14));
        CHECK(fp.a < 0.0);
    }
}

TEST_CASE("b matches the Felli-Schneider curve and the p round trip") {
    for (auto [d, p] : {std::pair{3, 2.0}, {2, 3.0}, {3, 1.5}, {6, 1.5}}) {
        auto fp = make_params(d, p);
        CHECK(fp.b == Catch::Approx(felli_schneider_b(d, fp.a)).margin(1e-14));
        CHECK(p_from_ab(d, fp.a, fp.b) == Catch::Approx(p).epsilon(1e-14));
    }
}

TEST_CASE("d=2 p=3 gives lambda = 1/3") {
    auto fp = make_params(2, 3.0);
    CHECK(fp.lambda_fs == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(fp.a_c == 0.0);
    CHECK(fp.a == Catch::Approx(-std::sqrt(1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("near-critical exponent keeps a < 0") {
    auto fp = make_params(3, 1.01);
    CHECK(fp.lambda_fs == Catch::Approx(8.0 / (2.01 * 2.01 - 4.0)).epsilon(1e-12));
    CHECK(fp.lambda_fs > fp.a_c * fp.a_c);
    CHECK(fp.a < 0.0);
}

TEST_CASE("inputs outside the degenerate regime are rejected") {
    CHECK_THROWS_AS(make_params(3, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_params(1, 2.0), std::invalid_argument);
    // Large p makes sqrt(lambda) <= a_c, i.e. a >= 0.
    CHECK_THROWS_AS(make_params(3, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(make_params(9, 2.0), std::invalid_argument);
}
