#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rllab/operators.hpp"

using namespace rllab;

namespace {

const NormedSpace R = NormedSpace::real_line();

OperatorGraph abs_subdiff(double lo, double hi) {
    return analytic_graph(R, Box::cube(1, lo, hi), [](const Vec& x, int k) {
        if (x[0] > 0) return std::vector<DualVec>{DualVec{1}};
        if (x[0] < 0) return std::vector<DualVec>{DualVec{-1}};
        std::vector<DualVec> out;
        for (int i = 0; i <= k + 1; ++i) out.push_back(DualVec{-1.0 + 2.0 * i / (k + 1)});
        return out;
    });
}

} // namespace

TEST(GraphSample, Examples) {
    const auto fan = graph_sample(abs_subdiff(-1, 1), 5, 0);
    int at_zero = 0;
    for (const auto& p : fan.pairs()) {
        if (p.x[0] == 0.0) ++at_zero;
    }
    EXPECT_GE(at_zero, 3);

    const auto id = graph_sample(identity_graph(R, Box::cube(1, -1, 1)), 3, 7);
    ASSERT_EQ(id.pairs().size(), 3u);
    for (const auto& p : id.pairs()) EXPECT_EQ(p.x[0], p.xstar[0]);

    const auto c = graph_sample(scalar_graph([](double x) { return std::cos(x); }, Box::cube(1, -10, 10)), 100, 1);
    ASSERT_EQ(c.pairs().size(), 100u);
    for (const auto& p : c.pairs()) EXPECT_EQ(p.xstar[0], std::cos(p.x[0]));

    EXPECT_THROW(graph_sample(identity_graph(R, Box::cube(1, -1, 1)), 0), Error);
}

TEST(GraphSample, DeterministicAndSound) {
    const auto S = abs_subdiff(-2, 2);
    const auto a = graph_sample(S, 200, 42);
    const auto b = graph_sample(S, 200, 42);
    ASSERT_EQ(a.pairs().size(), b.pairs().size());
    for (std::size_t i = 0; i < a.pairs().size(); ++i) {
        EXPECT_EQ(a.pairs()[i].x, b.pairs()[i].x);
        EXPECT_EQ(a.pairs()[i].xstar, b.pairs()[i].xstar);
        EXPECT_TRUE(S.contains(a.pairs()[i]));
    }
}

TEST(ShiftPlusJ, Examples) {
    const Box box = Box::cube(2, -5, 5);
    const auto Z = shift_plus_J(zero_graph(NormedSpace::euclidean(2), box), Vec{0, 0});
    EXPECT_EQ(Z.image(Vec{1.5, -2}).front(), (DualVec{1.5, -2}));

    const auto neg = scalar_graph([](double x) { return -x; }, Box::cube(1, -5, 5));
    const auto zero = shift_plus_J(neg, Vec{0});
    for (double x : {-3.0, 0.0, 0.7, 4.0}) EXPECT_EQ(zero.image(Vec{x}).front()[0], 0.0);

    const auto cube_d = scalar_graph([](double x) { return 3 * x * x; }, Box::cube(1, -5, 5));
    const auto shifted = shift_plus_J(cube_d, Vec{0});
    for (double x : {-2.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(shifted.image(Vec{x}).front()[0], 3 * x * x + x);
}

TEST(ShiftPlusJProperty, HilbertAddsX) {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd A = Eigen::MatrixXd::Random(3, 3);
    const auto S = linear_graph(NormedSpace::euclidean(3), A, Box::cube(3, -4, 4));
    const auto T = shift_plus_J(S, Vec{0, 0, 0});
    for (int k = 0; k < 100; ++k) {
        Vec x(3);
        for (std::size_t i = 0; i < 3; ++i) x[i] = std::uniform_real_distribution<double>(-4, 4)(rng);
        const DualVec lhs = T.image(x).front();
        const DualVec rhs = S.image(x).front() + riesz(S.space(), x);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
    }
}

TEST(ShiftPlusJ, L1FacesSampled) {
    const NormedSpace l1(2, NormKind::p1);
    const auto Z = shift_plus_J(zero_graph(l1, Box::cube(2, -1, 1)), Vec{0, 0});
    const auto img = Z.image(Vec{1, 0});
    EXPECT_EQ(img.size(), 11u);
    const auto J = duality_map(l1, Vec{1, 0});
    for (const auto& z : img) EXPECT_TRUE(J.contains(z));
}

TEST(GraphMinusNegJ, Examples) {
    const Box tb = Box::cube(1, -2, 2);
    const auto zero = graph_minus_negJ(sampled_graph(R, {{Vec{0}, DualVec{0}}}), 41, tb);
    for (const auto& p : zero.pairs()) EXPECT_EQ(p.x[0], -p.xstar[0]);

    const auto one = graph_minus_negJ(sampled_graph(R, {{Vec{1}, DualVec{1}}}), 41, tb);
    bool found = false;
    for (const auto& p : one.pairs()) found |= (p.x[0] == 0.0 && p.xstar[0] == 2.0);
    EXPECT_TRUE(found);

    // A = gra ∂(½x²): pairs with s = t reach (0, 2s)
    std::vector<DualPair> quad;
    for (int i = -20; i <= 20; ++i) quad.push_back({Vec{i * 0.1}, DualVec{i * 0.1}});
    const auto diff = graph_minus_negJ(sampled_graph(R, quad), 41, tb);
    int on_axis = 0;
    for (const auto& p : diff.pairs()) {
        if (std::abs(p.x[0]) < 1e-12) {
            ++on_axis;
            EXPECT_LE(std::abs(p.xstar[0]), 4.0 + 1e-12);
        }
    }
    EXPECT_EQ(on_axis, 41);
}

TEST(GraphMinusNegJProperty, Decomposes) {
    const NormedSpace l1(2, NormKind::p1);
    const std::vector<DualPair> A = {{Vec{1, 2}, DualVec{0.5, -1}}, {Vec{-1, 0}, DualVec{2, 2}}};
    const Box tb = Box::cube(2, -1, 1);
    const auto js = sample_graph_J(l1, tb, 25);
    const auto out = graph_minus_negJ(sampled_graph(l1, A), 25, tb);
    ASSERT_EQ(out.pairs().size(), A.size() * js.size());
    std::size_t idx = 0;
    for (const auto& a : A) {
        for (const auto& t : js) {
            const auto& p = out.pairs()[idx++];
            EXPECT_EQ(p.x, a.x - t.x);
            EXPECT_EQ(p.xstar, a.xstar + t.xstar);
            EXPECT_TRUE(duality_map(l1, t.x).contains(t.xstar));
        }
    }
}

TEST(RangeResidual, Examples) {
    auto r = range_residual(identity_graph(R, Box::cube(1, -10, 10)), DualVec{4}, Box::cube(1, -10, 10));
    EXPECT_DOUBLE_EQ(r.s[0], 2.0);
    EXPECT_EQ(r.residual, 0.0);

    Eigen::MatrixXd neg(1, 1);
    neg(0, 0) = -1;
    r = range_residual(linear_graph(R, neg, Box::cube(1, -10, 10)), DualVec{1}, Box::cube(1, -10, 10));
    EXPECT_DOUBLE_EQ(r.residual, 1.0);
    r = range_residual(scalar_graph([](double x) { return -x; }, Box::cube(1, -10, 10)), DualVec{1},
                       Box::cube(1, -10, 10), 201);
    EXPECT_DOUBLE_EQ(r.residual, 1.0);

    const auto L = diagonal_ladder(10);
    DualVec ys(10);
    for (std::size_t n = 1; n <= 10; ++n) ys[n - 1] = 1.0 / static_cast<double>(n);
    r = range_residual(L, ys, L.domain());
    EXPECT_EQ(r.residual, 0.0);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(r.s[i], 1.0);
    EXPECT_EQ(norm(L.space(), r.s), std::sqrt(10.0));

    EXPECT_THROW(range_residual(identity_graph(NormedSpace(1, NormKind::p1), Box::cube(1, -1, 1)), DualVec{1},
                                Box::cube(1, -1, 1)),
                 Error);
}

TEST(SearchGraph, SampledIsExact) {
    const auto S = sampled_graph(R, {{Vec{2}, DualVec{0}}, {Vec{-1}, DualVec{1}}, {Vec{-3}, DualVec{1}}});
    const auto r = search_graph(S, [](const Vec&, const DualVec& xs) { return std::abs(xs[0] - 1); }, S.domain());
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.pair.x[0], -3.0); // lexicographic tie-break
}
