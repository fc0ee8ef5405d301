#include <catch_amalgamated.hpp>
#include <kep/prox.hpp>
#include <kep/rng.hpp>
#include "oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using kep::PenaltyKind;
using kep::PenaltyParams;

namespace {

PenaltyParams pp(double eta, double alpha) { return {eta, alpha, 1, std::nullopt}; }

double J(double z, double b, double eta, double alpha)
{
    return 0.5 * (z - b) * (z - b) + oracle::kep_naive(std::abs(b), eta, alpha);
}

/// Lemma bound on the Lipschitz constant of phi^2 over [2t, 2t + 10].
double lipschitz_bound(double t)
{
    const double w = (2 * t + 1) / 3;
    return 4.0 / 3.0 + (2.0 / 3.0) / std::sqrt(w * w * w / (t * t) - 1.0);
}

} // namespace

TEST_CASE("kep_threshold examples")
{
    CHECK(kep::kep_threshold(0.5, pp(1, 0.5)).estimate == 0.0);
    CHECK(kep::kep_threshold(0.0, pp(1, 0.5)).estimate == 0.0);

    const auto d = kep::kep_threshold(2.0, pp(1, 0.5));
    const double root = oracle::bisect([](double b) { return b + 1.0 / std::sqrt(1.0 + b) - 2.0; }, 0.5, 2.0);
    CHECK_THAT(d.estimate, WithinAbs(root, 1e-12));
    CHECK_THAT(d.estimate, WithinAbs(1.34729635533386069770, 1e-14));
    CHECK(std::abs(d.estimate + 1.0 / std::sqrt(1.0 + d.estimate) - 2.0) <= 1e-9);
    CHECK(d.regime == kep::Regime::continuous);
    CHECK(d.threshold_point == 1.0);

    const double brute = kep::oracle_threshold({2.0, pp(1, 0.5), PenaltyKind::kep}, 1e-6);
    CHECK_THAT(d.estimate, WithinAbs(brute, 2e-6));

    CHECK(kep::kep_threshold(-2.0, pp(1, 0.5)).estimate == -d.estimate);
}

TEST_CASE("kep_threshold rejects bad inputs")
{
    CHECK_THROWS_AS(kep::kep_threshold(NAN, pp(1, 1)), kep::domain_error);
    CHECK_THROWS_AS(kep::kep_threshold(INFINITY, pp(1, 1)), kep::domain_error);
    CHECK_THROWS_AS(kep::kep_threshold(1.0, pp(-1, 1)), kep::domain_error);
    CHECK_THROWS_AS(kep::kep_threshold(1.0, {1, 1, 2, std::nullopt}), kep::domain_error);
}

TEST_CASE("discontinuous kep threshold point and jump")
{
    const auto p = pp(2.0, 1.0);   // eta alpha = 2
    const auto d = kep::kep_threshold(0.1, p);
    CHECK(d.regime == kep::Regime::discontinuous);
    CHECK_THAT(d.stationary_point, WithinRel((1.5 * std::cbrt(4.0) - 0.5), 1e-14));
    CHECK(d.threshold_point > d.stationary_point);
    CHECK(kep::kep_threshold(d.threshold_point * (1 - 1e-9), p).estimate == 0.0);
    CHECK(kep::kep_threshold(d.threshold_point * (1 + 1e-9), p).estimate > 0.0);
    CHECK(kep::kep_threshold(0.5 * (d.stationary_point + d.threshold_point), p).estimate == 0.0);

    // Scan across the jump; every output must beat or tie b = 0 and match brute force.
    for (double z = 1.5; z < 3.5; z += 0.01) {
        const double b = kep::kep_threshold(z, p).estimate;
        CHECK(J(z, b, 2.0, 1.0) <= J(z, 0.0, 2.0, 1.0) + 1e-12);
        CHECK_THAT(b, WithinAbs(kep::oracle_threshold({z, p, PenaltyKind::kep}, 1e-4), 2e-4));
    }
}

TEST_CASE("mcp_threshold examples")
{
    CHECK_THAT(kep::mcp_threshold(1.5, pp(1, 0.5)).estimate, WithinAbs(1.0, 1e-15));
    CHECK(kep::mcp_threshold(3.0, pp(1, 0.5)).estimate == 3.0);
    CHECK(kep::mcp_threshold(2.0, pp(1, 0.5)).estimate == 2.0);
    CHECK(kep::mcp_threshold(0.4, pp(1, 2)).estimate == 0.0);
    CHECK(kep::mcp_threshold(-1.5, pp(1, 0.5)).estimate == -1.0);
    CHECK(kep::mcp_threshold(0.9, pp(1, 0.5)).estimate == 0.0);
    CHECK_THROWS_AS(kep::mcp_threshold(NAN, pp(1, 1)), kep::domain_error);
}

TEST_CASE("mcp hard threshold sits where J(0) = J(z)")
{
    // eta alpha = 2: 1/alpha = 0.5 but the exact jump is sqrt(eta/alpha) = 0.7071.
    const auto p = pp(1, 2);
    CHECK_THAT(kep::mcp_threshold(0.1, p).threshold_point, WithinRel(std::sqrt(0.5), 1e-15));
    for (double z : {0.45, 0.6, 0.7, 0.71, 0.8, 1.5}) {
        const double brute = kep::oracle_threshold({z, p, PenaltyKind::mcp}, 1e-5);
        CHECK_THAT(kep::mcp_threshold(z, p).estimate, WithinAbs(brute, 2e-5));
    }
}

TEST_CASE("soft and half thresholds")
{
    CHECK(kep::soft_threshold(1.0, 1.0) == 0.0);
    CHECK(kep::soft_threshold(2.0, 1.0) == 1.0);
    CHECK(kep::soft_threshold(-2.0, 1.0) == -1.0);
    CHECK_THROWS_AS(kep::soft_threshold(1.0, 0.0), kep::domain_error);

    CHECK(kep::half_threshold(0.1, 1.0) == 0.0);
    const double h = kep::half_threshold(2.0, 1.0);
    const double root = oracle::bisect([](double b) { return b - 2.0 + 0.5 / std::sqrt(b); }, 1.0, 2.0);
    CHECK_THAT(h, WithinAbs(root, 1e-12));
    CHECK_THAT(h, WithinAbs(1.60537794047959586119, 1e-14));
    CHECK(kep::half_threshold(-2.0, 1.0) == -h);
    CHECK_THROWS_AS(kep::half_threshold(1.0, -1.0), kep::domain_error);
}

TEST_CASE("half threshold is the global minimizer, with the jump at 1.5 lambda^(2/3)")
{
    CHECK_THAT(kep::half_threshold_point(1.0), WithinAbs(1.5, 1e-15));
    CHECK_THAT(kep::half_threshold_point(8.0), WithinRel(6.0, 1e-15));
    // Tie at the jump: both 0 and lambda^(2/3) attain the minimum; the nonzero one is returned.
    CHECK_THAT(kep::half_threshold(1.5, 1.0), WithinAbs(1.0, 1e-12));
    for (double lambda : {0.5, 1.0, 2.0}) {
        for (double z = 0.2; z < 5; z += 0.05) {
            const double b = kep::half_threshold(z, lambda);
            const auto obj = [&](double v) { return 0.5 * (z - v) * (z - v) + lambda * std::sqrt(std::abs(v)); };
            const double brute = kep::oracle_threshold({z, pp(lambda, 1.0), PenaltyKind::lhalf}, 1e-4);
            CHECK(obj(b) <= obj(brute) + 1e-9);
        }
    }
}

TEST_CASE("oracle_threshold contract")
{
    CHECK(kep::oracle_threshold({0.0, pp(1, 1), PenaltyKind::kep}, 1e-3) == 0.0);
    CHECK_THROWS_AS(kep::oracle_threshold({1.0, pp(1, 1), PenaltyKind::kep}, 0.5), kep::precondition_error);
    CHECK_THROWS_AS(kep::oracle_threshold({1.0, pp(1, 1), PenaltyKind::kep}, 0.0), kep::precondition_error);
    const double mcp = kep::oracle_threshold({2.0, pp(1, 0.5), PenaltyKind::mcp}, 1e-6);
    CHECK_THAT(mcp, WithinAbs(kep::mcp_threshold(2.0, pp(1, 0.5)).estimate, 2e-6));
}

TEST_CASE("thresholding invariants over random triples")
{
    kep::CounterRng rng(2024);
    for (int i = 0; i < 300; ++i) {
        const double z = 20.0 * rng.uniform() - 10.0;
        const double eta = 5.0 * rng.uniform();
        const double alpha = 5.0 * rng.uniform();
        const auto p = pp(eta, alpha);
        for (auto kind : {PenaltyKind::kep, PenaltyKind::mcp}) {
            const auto d = kind == PenaltyKind::kep ? kep::kep_threshold(z, p) : kep::mcp_threshold(z, p);
            CHECK(std::abs(d.estimate) <= std::abs(z));
            CHECK((d.estimate == 0.0 || std::signbit(d.estimate) == std::signbit(z)));
            if (std::abs(z) <= d.threshold_point) CHECK(d.estimate == 0.0);
            CHECK(d.regime == (eta * alpha <= 1.0 && kind == PenaltyKind::kep ? kep::Regime::continuous
                               : eta * alpha < 1.0 && kind == PenaltyKind::mcp ? kep::Regime::continuous
                                                                               : kep::Regime::discontinuous));
            if (std::abs(z) < 1e-2) continue;
            const double brute = kep::oracle_threshold({z, p, kind}, 1e-4);
            CHECK_THAT(d.estimate, WithinAbs(brute, 2e-4));
        }
    }
}

TEST_CASE("fixed-point residual of nonzero kep outputs")
{
    kep::CounterRng rng(5);
    for (int i = 0; i < 500; ++i) {
        const double z = 20.0 * rng.uniform() - 10.0;
        const double eta = 5.0 * rng.uniform();
        const double alpha = std::pow(10.0, 8.0 * rng.uniform() - 6.0);
        const double b = kep::kep_threshold(z, pp(eta, alpha)).estimate;
        if (b == 0.0) continue;
        const double res = b + std::copysign(eta / std::sqrt(2 * alpha * std::abs(b) + 1), b) - z;
        CHECK(std::abs(res) <= 1e-9);
    }
}

TEST_CASE("kep estimate is monotone in z")
{
    for (auto [eta, alpha] : {std::pair{1.0, 0.5}, {1.0, 1.0}, {2.0, 1.5}, {0.3, 8.0}}) {
        const auto p = pp(eta, alpha);
        double prev = -INFINITY;
        for (double z = -8; z <= 8; z += 1e-3) {
            const auto d = kep::kep_threshold(z, p);
            CHECK(d.estimate >= prev);
            if (std::abs(z) > d.threshold_point && d.estimate != 0.0 && prev != 0.0 && z > -8) CHECK(d.estimate > prev);
            prev = d.estimate;
        }
    }
}

TEST_CASE("soft limit as alpha -> 0")
{
    for (double lambda : {0.5, 1.0, 2.0}) {
        double worst = 0.0;
        for (int i = -50; i <= 50; ++i) {
            const double z = 0.1 * i;
            worst = std::max(worst, std::abs(kep::kep_threshold(z, pp(lambda, 1e-10)).estimate -
                                             kep::soft_threshold(z, lambda)));
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("half limit as alpha -> infinity under nesting")
{
    const double alpha = 1e8;
    const auto p = PenaltyParams::from_lambda(1.0, alpha);
    CHECK_THAT(kep::kep_threshold(2.0, p).estimate, WithinAbs(kep::half_threshold(2.0, 1.0), 1e-3));
    for (int i = -50; i <= 50; ++i) {
        const double z = 0.1 * i;
        if (std::abs(z) < 1.3) continue;
        CHECK_THAT(kep::kep_threshold(z, p).estimate, WithinAbs(kep::half_threshold(z, 1.0), 1e-3));
    }
}

TEST_CASE("cubic root branch: phi(2t) = 1")
{
    for (int i = 0; i <= 10; ++i) {
        const double t = 0.1 * i;
        CHECK_THAT(kep::cubic_root_branch(2 * t, t), WithinAbs(1.0, 1e-10));
    }
    // Exactly zero estimate at |z| = eta in the continuous regime.
    CHECK(kep::kep_threshold(0.7, pp(0.7, 1.0)).estimate == 0.0);
    CHECK(kep::kep_threshold(0.7 + 1e-9, pp(0.7, 1.0)).estimate > 0.0);
}

TEST_CASE("cubic root branch: monotone phi and phi^2, Lipschitz bound")
{
    for (int i = 1; i <= 9; ++i) {
        const double t = 0.1 * i;
        const double L = lipschitz_bound(t);
        double prev = kep::cubic_root_branch(2 * t, t);
        double worst = 0.0;
        const double h = 1e-3;
        for (double u = 2 * t + h; u <= 2 * t + 10; u += h) {
            const double v = kep::cubic_root_branch(u, t);
            CHECK(v > prev);
            CHECK(v * v > prev * prev);
            worst = std::max(worst, (v * v - prev * prev) / h);
            prev = v;
        }
        CHECK(worst <= L);
    }
}

TEST_CASE("continuity in z in the continuous regime")
{
    kep::CounterRng rng(9);
    for (int i = 0; i < 200; ++i) {
        const double eta = 0.1 + 2.0 * rng.uniform();
        const double t = 0.05 + 0.85 * rng.uniform();
        const double alpha = t / eta;
        const double z = eta + 1e-5 + 8.0 * rng.uniform();
        const double dz = 1e-6;
        const auto p = pp(eta, alpha);
        const double db = kep::kep_threshold(z + dz, p).estimate - kep::kep_threshold(z, p).estimate;
        CHECK(std::abs(db) <= lipschitz_bound(t) * dz * (1 + 1e-6));
    }
}

TEST_CASE("nesting: threshold point does not shrink as alpha grows")
{
    for (double lambda : {0.25, 1.0}) {
        double prev = 0.0;
        for (int i = 0; i <= 60; ++i) {
            const double alpha = std::pow(10.0, -4 + i * 0.1);
            const double tp = kep::kep_threshold(0.0, PenaltyParams::from_lambda(lambda, alpha)).threshold_point;
            CHECK(tp >= prev * (1 - 1e-12));
            CHECK(tp <= 1.5 * std::cbrt(lambda * lambda) * (1 + 1e-9));
            CHECK(tp >= lambda);
            prev = tp;
        }
    }
}

TEST_CASE("threshold_estimate dispatch")
{
    const auto p = pp(1.0, 0.5);
    CHECK(kep::threshold_estimate(2.0, p, PenaltyKind::kep) == kep::kep_threshold(2.0, p).estimate);
    CHECK(kep::threshold_estimate(2.0, p, PenaltyKind::mcp) == kep::mcp_threshold(2.0, p).estimate);
    CHECK(kep::threshold_estimate(2.0, p, PenaltyKind::l1) == 1.0);
    CHECK(kep::threshold_estimate(2.0, p, PenaltyKind::lhalf) == kep::half_threshold(2.0, 1.0));
}

TEST_CASE("univariate objective")
{
    const kep::UnivariateProblem prob{2.0, pp(1.0, 1.0), PenaltyKind::kep};
    CHECK_THAT(prob.objective(4.0), WithinAbs(2.0 + 2.0, 1e-14));
    CHECK(prob.objective(0.0) == 2.0);
}
