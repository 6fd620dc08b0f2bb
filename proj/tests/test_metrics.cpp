#include "splatloc/metrics.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace splatloc;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("sum_abs_diff basics") {
    ImageBuffer black(2, 2, 0.0);
    ImageBuffer white(2, 2, 1.0);
    CHECK(sum_abs_diff(black, black) == 0.0);
    CHECK(sum_abs_diff(black, white) == doctest::Approx(12.0));  // 4 px * 3 ch
    CHECK(sum_abs_diff(white, black) == doctest::Approx(12.0));
}

TEST_CASE("sum_abs_diff matches the brute-force oracle") {
    for (unsigned seed = 0; seed < 5; ++seed) {
        const ImageBuffer a = oracles::random_image(31, 17, seed);
        const ImageBuffer b = oracles::random_image(31, 17, seed + 100);
        CHECK(sum_abs_diff(a, b) == doctest::Approx(oracles::naive_sad(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("sum_abs_diff satisfies the triangle inequality") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        const ImageBuffer a = oracles::random_image(16, 16, 3 * seed);
        const ImageBuffer b = oracles::random_image(16, 16, 3 * seed + 1);
        const ImageBuffer c = oracles::random_image(16, 16, 3 * seed + 2);
        CHECK(sum_abs_diff(a, c) <= sum_abs_diff(a, b) + sum_abs_diff(b, c) + 1e-9);
    }
}

TEST_CASE("sad increases strictly with uniform perturbation magnitude") {
    const ImageBuffer query = oracles::random_image(24, 24, 9);
    double prev = 0.0;
    for (int k = 1; k <= 8; ++k) {
        ImageBuffer shifted = query;
        for (double& v : shifted.data) {
            v = std::min(1.0, v + 0.01 * k);
        }
        const double sad = sum_abs_diff(query, shifted);
        CHECK(sad > prev);
        prev = sad;
    }
}

TEST_CASE("psnr identities and analytic value") {
    const ImageBuffer a = oracles::random_image(20, 20, 4);
    CHECK(psnr(a, a) == 100.0);  // capped

    ImageBuffer b = a;
    for (double& v : b.data) {
        v += 0.1;  // uniform difference, MSE = 0.01
    }
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("psnr matches the direct-formula oracle") {
    for (unsigned seed = 0; seed < 5; ++seed) {
        const ImageBuffer a = oracles::random_image(33, 21, seed + 7);
        const ImageBuffer b = oracles::random_image(33, 21, seed + 77);
        CHECK(psnr(a, b) == doctest::Approx(oracles::naive_psnr(a, b)).epsilon(1e-6));
    }
}

TEST_CASE("ssim identities") {
    const ImageBuffer a = oracles::random_image(32, 32, 15);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    // Constant 0.5 vs its complement: both constant, equal means.
    ImageBuffer half(32, 32, 0.5);
    ImageBuffer complement(32, 32, 0.5);
    CHECK(ssim(half, complement) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssim matches the sliding-window oracle") {
    for (unsigned seed = 0; seed < 4; ++seed) {
        const ImageBuffer a = oracles::random_image(24, 18, seed + 31);
        const ImageBuffer b = oracles::random_image(24, 18, seed + 131);
        CHECK(ssim(a, b) == doctest::Approx(oracles::naive_ssim(a, b)).epsilon(1e-6));
    }
}

TEST_CASE("ssim is symmetric") {
    const ImageBuffer a = oracles::random_image(20, 20, 41);
    const ImageBuffer b = oracles::random_image(20, 20, 42);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("metric contract errors") {
    const ImageBuffer a(16, 16);
    const ImageBuffer b(16, 15);
    CHECK_THROWS_AS(sum_abs_diff(a, b), std::invalid_argument);
    CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    const ImageBuffer tiny(10, 10);
    CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}

TEST_CASE("heuristic values per kind") {
    ImageBuffer black(12, 12, 0.0);
    ImageBuffer white(12, 12, 1.0);
    CHECK(heuristic(HeuristicKind::sad, black, black) == 0.0);
    CHECK(heuristic(HeuristicKind::psnr, black, black) == 0.0);   // 100 - cap
    CHECK(heuristic(HeuristicKind::ssim, black, black) == doctest::Approx(0.0).epsilon(1e-9));

    ImageBuffer small_black(2, 2, 0.0);
    ImageBuffer small_white(2, 2, 1.0);
    CHECK(heuristic(HeuristicKind::sad, small_black, small_white) == doctest::Approx(12.0));

    ImageBuffer a = oracles::random_image(16, 16, 5);
    ImageBuffer b = a;
    for (double& v : b.data) {
        v += 0.1;
    }
    CHECK(heuristic(HeuristicKind::psnr, a, b) == doctest::Approx(80.0).epsilon(1e-12));
}

TEST_CASE("heuristics are nonnegative and symmetric on random pairs") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        const ImageBuffer a = oracles::random_image(16, 16, seed + 61);
        const ImageBuffer b = oracles::random_image(16, 16, seed + 161);
        for (HeuristicKind kind : {HeuristicKind::sad, HeuristicKind::psnr, HeuristicKind::ssim}) {
            const double hab = heuristic(kind, a, b);
            const double hba = heuristic(kind, b, a);
            CHECK(hab >= 0.0);
            CHECK(hab == doctest::Approx(hba).epsilon(1e-9));
        }
    }
}

TEST_CASE("evaluator agrees with the free functions") {
    const ImageBuffer query = oracles::random_image(24, 24, 91);
    const ImageBuffer other = oracles::random_image(24, 24, 92);
    for (HeuristicKind kind : {HeuristicKind::sad, HeuristicKind::psnr, HeuristicKind::ssim}) {
        const HeuristicEvaluator ev(kind, query);
        CHECK(ev(other) == doctest::Approx(heuristic(kind, query, other)).epsilon(1e-12));
    }
}

TEST_CASE("heuristic kind string round trip") {
    for (HeuristicKind kind : {HeuristicKind::sad, HeuristicKind::psnr, HeuristicKind::ssim}) {
        CHECK(heuristic_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(heuristic_kind_from_string("mse"), std::invalid_argument);
}

TEST_SUITE_END();
