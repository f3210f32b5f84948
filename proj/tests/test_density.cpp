#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rllab/density.hpp"

using namespace rllab;

namespace {

const NormedSpace R = NormedSpace::real_line();
const Box kBox = Box::cube(1, -10, 10);

OperatorGraph poly_subdiff(const char* text) {
    return subdiff_operator(SubdiffEngine::polynomial, parse_func(text), kBox);
}

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int n) {
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) B(i, k) = std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    return B * B.transpose();
}

} // namespace

TEST(CertifyDensity, Examples) {
    // s = (y + y*)/(1 - 2λ) with λ = 1
    const DualPair t1{Vec{2}, DualVec{3}};
    auto r = certify_density(poly_subdiff("-1*x1^2"), t1);
    ASSERT_TRUE(std::holds_alternative<DensityCertificate>(r));
    const auto& c = std::get<DensityCertificate>(r);
    const double s = (2.0 + 3.0) / (1 - 2 * 1.0);
    EXPECT_NEAR(c.witnesses.back().pair.x[0], s, 1e-6);
    EXPECT_EQ(c.witnesses.back().pair.xstar[0], -2 * c.witnesses.back().pair.x[0]);
    EXPECT_LT(c.witnesses.back().gap, 1e-24);

    r = certify_density(poly_subdiff("-0.5*x1^2"), {Vec{0}, DualVec{1}});
    ASSERT_TRUE(std::holds_alternative<RefutationReport>(r));
    const auto& ref = std::get<RefutationReport>(r);
    EXPECT_NEAR(ref.delta, 0.5, 1e-9);
    EXPECT_TRUE(ref.conclusive());
    EXPECT_EQ(ref.eps, 1e-2);

    r = certify_density(identity_graph(R, kBox), {Vec{0}, DualVec{0}});
    ASSERT_TRUE(std::holds_alternative<DensityCertificate>(r));
    EXPECT_EQ(std::get<DensityCertificate>(r).witnesses.front().gap, 0.0);
    EXPECT_EQ(std::get<DensityCertificate>(r).witnesses.size(), 3u);
}

TEST(CertifyDensity, CubicRefutation) {
    const auto r = certify_density(poly_subdiff("x1^3"), {Vec{0}, DualVec{-1}});
    ASSERT_TRUE(std::holds_alternative<RefutationReport>(r));
    const auto& ref = std::get<RefutationReport>(r);
    // oracle: ½(s + 3s² + 1)² is minimised at s = -1/6
    double best = kInf;
    for (int k = -200000; k <= 200000; ++k) {
        const double s = k * 5e-5;
        best = std::min(best, 0.5 * std::pow(s + 3 * s * s + 1, 2));
    }
    EXPECT_NEAR(ref.delta, best, 1e-6);
    EXPECT_NEAR(ref.delta, 0.5 * (11.0 / 12) * (11.0 / 12), 1e-6);
    EXPECT_NEAR(ref.best_pair.x[0], -1.0 / 6, 1e-6);
}

TEST(CertifyDensity, KinkOffTheSearchGrid) {
    // 0.3 and -1 are not grid nodes; the solution (0.3, 0.2) sits on the kink's segment
    auto f = parse_func("abs(x1 - 0.3) + abs(x1 + 1)");
    f.convex();
    const auto A = subdiff_operator(SubdiffEngine::convex1d, f, kBox);
    const auto r = certify_density(A, {Vec{0}, DualVec{0.5}});
    const auto* c = std::get_if<DensityCertificate>(&r);
    ASSERT_NE(c, nullptr);
    EXPECT_NEAR(c->witnesses.back().pair.x[0], 0.3, 1e-9);
    EXPECT_NEAR(c->witnesses.back().pair.xstar[0], 0.2, 1e-9);
}

TEST(CertifyDensityProperty, WitnessesReverify) {
    std::mt19937_64 rng(31);
    const OperatorGraph graphs[] = {poly_subdiff("-0.25*x1^2"), poly_subdiff("-1*x1^2"),
                                    subdiff_operator(SubdiffEngine::convex1d, parse_func("abs(x1)"), kBox),
                                    subdiff_graph(SubdiffEngine::convex1d, parse_func("abs(x1) + 0.5*x1^2"), kBox, 500)};
    for (const auto& A : graphs) {
        for (int k = 0; k < 5; ++k) {
            const DualPair t{Vec{std::uniform_real_distribution<double>(-2, 2)(rng)},
                             DualVec{std::uniform_real_distribution<double>(-2, 2)(rng)}};
            const auto r = certify_density(A, t);
            if (!std::holds_alternative<DensityCertificate>(r)) continue;
            const auto& c = std::get<DensityCertificate>(r);
            double prev = kInf;
            for (const auto& w : c.witnesses) {
                EXPECT_NEAR(rl_gap(R, w.pair, t), w.gap, 1e-12);
                EXPECT_TRUE(A.contains(w.pair, 1e-9));
                EXPECT_LE(w.gap, prev);
                EXPECT_TRUE(w.gap < w.eps || w.gap == 0.0);
                prev = w.gap;
            }
        }
    }
}

TEST(CertifySubdiffDensity, Examples) {
    SubdiffPipelineTrace tr;
    const auto c0 = certify_subdiff_density(parse_func("0"), SubdiffEngine::polynomial, {0, 0, 0, {}, kInf},
                                            {Vec{0}, DualVec{0}}, {}, &tr);
    EXPECT_NEAR(c0.stable_bound.value(), std::sqrt(2.0) + 2.0, 1e-9);
    EXPECT_NEAR(tr.m, 0.0, 1e-12);
    for (const auto& w : c0.witnesses) {
        EXPECT_LT(w.gap, w.eps);
        EXPECT_LE(w.dist_primal, 1e-6);
    }

    auto a = parse_func("abs(x1)");
    a.convex();
    const auto c1 = certify_subdiff_density(a, SubdiffEngine::convex1d, {0, 0, 0, {}, kInf}, {Vec{0}, DualVec{0.5}});
    for (const auto& w : c1.witnesses) {
        EXPECT_EQ(w.pair.x[0], 0.0);
        EXPECT_EQ(w.pair.xstar[0], 0.5);
        EXPECT_EQ(w.gap, 0.0);
    }

    // λ = 0.25: one M across the schedule, consistent with the direct search
    const auto f = parse_func("-0.25*x1^2");
    const DualPair t{Vec{1}, DualVec{1}};
    const auto c2 = certify_subdiff_density(f, SubdiffEngine::polynomial, {0.25, 0, 0, {}, kInf}, t, {}, &tr);
    ASSERT_EQ(c2.witnesses.size(), 3u);
    const double M = c2.stable_bound.value();
    EXPECT_NEAR(M, theorem3_bound(R, {0.25, 0, 0, kBox, -1}, t.x, t.xstar, tr.m), 1e-12);
    for (const auto& w : c2.witnesses) {
        EXPECT_LT(w.gap, w.eps);
        EXPECT_LE(w.dist_primal, M - 1);
        EXPECT_LE(w.dist_dual, M);
    }
    const auto direct = certify_density(poly_subdiff("-0.25*x1^2"), t);
    ASSERT_TRUE(std::holds_alternative<DensityCertificate>(direct));
    // oracle: s = 2(y + y*) = 4
    EXPECT_NEAR(c2.witnesses.back().pair.x[0], 4.0, 1e-5);
    EXPECT_NEAR(std::get<DensityCertificate>(direct).witnesses.back().pair.x[0], 4.0, 1e-6);

    EXPECT_THROW(certify_subdiff_density(parse_func("-1*x1^2"), SubdiffEngine::polynomial, {0.4, 0, 0, {}, kInf}, t),
                 PreconditionError);
}

TEST(MintyExact, Examples) {
    auto m = minty_exact(identity_graph(R, kBox), DualVec{4}, kBox);
    EXPECT_TRUE(m.success);
    EXPECT_EQ(m.s[0], 2.0);
    EXPECT_EQ(m.sstar[0], 2.0);
    EXPECT_EQ(m.gap, 0.0);

    Eigen::MatrixXd A(2, 2);
    A << 2, 0, 0, 3;
    const auto E2 = NormedSpace::euclidean(2);
    m = minty_exact(linear_graph(E2, A, Box::cube(2, -10, 10)), DualVec{3, 4}, Box::cube(2, -10, 10));
    EXPECT_TRUE(m.success);
    EXPECT_EQ(m.s, (Vec{1, 1}));

    Eigen::MatrixXd neg(1, 1);
    neg << -1;
    m = minty_exact(linear_graph(R, neg, kBox), DualVec{1}, kBox);
    EXPECT_FALSE(m.success);
    EXPECT_DOUBLE_EQ(m.residual, 1.0);
}

TEST(MintyExactProperty, SuccessIffZeroGap) {
    std::mt19937_64 rng(12);
    for (int it = 0; it < 40; ++it) {
        const int n = 1 + static_cast<int>(rng() % 8);
        const auto E = NormedSpace::euclidean(n);
        Eigen::MatrixXd A = random_psd(rng, n);
        if (it % 4 == 3) A = -2.0 * Eigen::MatrixXd::Identity(n, n) + A * 0.0; // S + Id = -Id, still surjective
        if (it % 8 == 7) A = -Eigen::MatrixXd::Identity(n, n);                   // S + Id = 0
        DualVec ys(n);
        for (int i = 0; i < n; ++i) ys[i] = std::uniform_real_distribution<double>(-3, 3)(rng);
        const auto m = minty_exact(linear_graph(E, A, Box::cube(n, -50, 50)), ys, Box::cube(n, -50, 50));
        const double scale = 1 + norm_squared(E, m.s) + dual_norm_squared(E, m.sstar) + dual_norm_squared(E, ys);
        EXPECT_EQ(m.success, m.residual <= kMintyTol);
        // gap = ½ residual² in Hilbert mode, so success means gap is zero up to round-off
        EXPECT_NEAR(m.gap, 0.5 * m.residual * m.residual, 1e-13 * scale);
        if (m.success) {
            EXPECT_LE(m.gap, 1e-13 * scale);
        }
    }
}

TEST(MintyDense, Ladder) {
    for (std::size_t N : {10u, 100u, 1000u}) {
        const auto rows = minty_dense({diagonal_ladder(N)}, {ladder_target(N)});
        EXPECT_EQ(rows[0].residual_sq, 0.0);
        EXPECT_EQ(rows[0].preimage_norm, std::sqrt(static_cast<double>(N)));
        for (std::size_t i = 0; i < N; ++i) EXPECT_EQ(rows[0].preimage[i], 1.0);
    }
    const auto t = minty_dense({diagonal_ladder(100)}, {ladder_target(100)}, 10);
    double direct = 0.0;
    for (int n = 11; n <= 100; ++n) direct += 1.0 / (double(n) * n);
    EXPECT_NEAR(t[0].residual_sq, direct, 1e-12);
    EXPECT_NEAR(t[0].residual_sq, 0.0852, 1e-4);

    DualVec e1(10, 0.0);
    e1[0] = 1.0;
    const auto u = minty_dense({diagonal_ladder(10)}, {e1});
    EXPECT_EQ(u[0].preimage[0], 1.0);
    EXPECT_EQ(u[0].preimage_norm, 1.0);
}

TEST(Hyperdense, Examples) {
    auto h = hyperdense_check(identity_graph(R, kBox), DualVec{5}, 5);
    EXPECT_TRUE(h.success);
    EXPECT_EQ(h.best.x[0], 5.0);

    h = hyperdense_check(scalar_graph([](double x) { return x * x * x; }, kBox), DualVec{8}, 2);
    EXPECT_TRUE(h.success);
    EXPECT_NEAR(h.best.x[0], 2.0, 1e-12);

    h = hyperdense_check(zero_graph(R, kBox), DualVec{1}, 3);
    EXPECT_FALSE(h.success);
    EXPECT_EQ(h.best_distance, 1.0);
}

TEST(DensityViaHyperdense, Examples) {
    auto d = density_via_hyperdense(identity_graph(R, kBox), Vec{0}, DualVec{3}, {1e-4});
    ASSERT_EQ(d.certificate.witnesses.size(), 1u);
    EXPECT_EQ(d.certificate.witnesses[0].pair.x[0], 1.5);
    EXPECT_EQ(d.certificate.witnesses[0].pair.xstar[0], 1.5);
    EXPECT_EQ(d.certificate.witnesses[0].gap, 0.0);

    d = density_via_hyperdense(scalar_graph([](double x) { return 3 * x * x; }, Box::cube(1, -5, 5)), Vec{0},
                               DualVec{0});
    for (const auto& w : d.certificate.witnesses) {
        EXPECT_EQ(w.pair.x[0], 0.0);
        EXPECT_EQ(w.gap, 0.0);
    }
    EXPECT_TRUE(d.bounds_ok);

    EXPECT_THROW(density_via_hyperdense(zero_graph(R, kBox), Vec{0}, DualVec{100}, {1e-4}, 3.0), SearchError);
}

TEST(DensityViaHyperdenseProperty, PsdMatrices) {
    std::mt19937_64 rng(41);
    for (int it = 0; it < 20; ++it) {
        const int n = 1 + static_cast<int>(rng() % 5);
        const auto E = NormedSpace::euclidean(n);
        const Eigen::MatrixXd A = random_psd(rng, n);
        Vec y(n);
        DualVec ys(n);
        for (int i = 0; i < n; ++i) {
            y[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
            ys[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
        }
        const auto S = linear_graph(E, A, Box::cube(n, -20, 20));
        const auto d = density_via_hyperdense(S, y, ys, {1e-6});
        const auto& w = d.certificate.witnesses.front();
        EXPECT_LT(w.gap, 1e-6);
        EXPECT_TRUE(d.bounds_ok);
        // oracle: (A + I)s = y* + y
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) rhs(i) = ys[i] + y[i];
        const Eigen::VectorXd s = (A + Eigen::MatrixXd::Identity(n, n)).fullPivLu().solve(rhs);
        for (int i = 0; i < n; ++i) EXPECT_NEAR(w.pair.x[i], s(i), 1e-8);
    }
}

TEST(ApproxMinty, Examples) {
    auto r = approx_minty_difference(identity_graph(R, kBox), {Vec{0}, DualVec{0}}, 0.0);
    EXPECT_EQ(r.point.x[0], 0.0);
    EXPECT_EQ(r.point.xstar[0], 0.0);

    const auto single = sampled_graph(R, {{Vec{1}, DualVec{1}}});
    r = approx_minty_difference(single, {Vec{0}, DualVec{0}}, 2.0 + 1e-12);
    EXPECT_DOUBLE_EQ(r.gap, 2.0);
    EXPECT_LE(std::sqrt(r.distance_sq), 2.0 + 1e-12);
    // Hilbert closed form: u = 1, u* = -1, t = 0
    EXPECT_EQ(r.projection.t[0], 0.0);

    r = approx_minty_difference(subdiff_operator(SubdiffEngine::convex1d, parse_func("abs(x1)"), kBox),
                                {Vec{0}, DualVec{0.5}}, 1e-12);
    EXPECT_NEAR(r.point.x[0], 0.0, 1e-8);
    EXPECT_NEAR(r.point.xstar[0], 0.5, 1e-8);

    EXPECT_THROW(approx_minty_difference(poly_subdiff("-0.5*x1^2"), {Vec{0}, DualVec{1}}, 1e-3), PreconditionError);
}

TEST(ApproxMintyProperty, DistanceBound) {
    std::mt19937_64 rng(55);
    std::vector<DualPair> pairs;
    for (int i = 0; i < 30; ++i) {
        const double x = std::uniform_real_distribution<double>(-3, 3)(rng);
        pairs.push_back({Vec{x}, DualVec{std::sin(3 * x)}});
    }
    const auto A = sampled_graph(R, pairs);
    for (int k = 0; k < 50; ++k) {
        const DualPair t{Vec{std::uniform_real_distribution<double>(-2, 2)(rng)},
                         DualVec{std::uniform_real_distribution<double>(-2, 2)(rng)}};
        const double eps = std::uniform_real_distribution<double>(0.5, 8)(rng);
        try {
            const auto r = approx_minty_difference(A, t, eps);
            EXPECT_LE(r.distance_sq, 2 * eps + 1e-9);
        } catch (const PreconditionError&) {
            // no witness at this eps in the sample
        }
    }
}
