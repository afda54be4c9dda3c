#include "conjulab/vectorspace.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace conjulab;

TEST(Vectorspace, LinearCombineDense) {
    const Vector a = Vector::dense({1.0, 2.0});
    const Vector b = Vector::dense({3.0, 4.0});
    const Vector sum = linear_combine(1.0, a, 1.0, b);
    EXPECT_EQ(sum.dense_values(), (std::vector<double>{4.0, 6.0}));

    const Vector id = linear_combine(1.0, Vector::dense({1.0, 0.0}), 0.0, Vector::dense({5.0, 5.0}));
    EXPECT_EQ(id.dense_values(), (std::vector<double>{1.0, 0.0}));
}

TEST(Vectorspace, SparseCancellationDropsZeros) {
    const Vector e = Vector::basis(0);
    const Vector z = linear_combine(2.0, e, -2.0, e);
    EXPECT_TRUE(z.is_zero());
    EXPECT_TRUE(z.sparse_entries().empty());
    EXPECT_TRUE(z.support().empty());
}

TEST(Vectorspace, IncompatibleOperandsThrow) {
    EXPECT_THROW(linear_combine(1.0, Vector::dense({1.0}), 1.0, Vector::basis(0)),
                 std::invalid_argument);
    EXPECT_THROW(linear_combine(1.0, Vector::dense({1.0}), 1.0, Vector::dense({1.0, 2.0})),
                 std::invalid_argument);
}

TEST(Vectorspace, SupNorm) {
    EXPECT_EQ(sup_norm(Vector::dense({3.0, -4.0})), 4.0);
    EXPECT_EQ(sup_norm(Vector::sparse({{0, 1.0}, {5, -2.0}})), 2.0);
    EXPECT_EQ(sup_norm(Vector::sparse({})), 0.0);
}

TEST(Vectorspace, Support) {
    const Vector s = Vector::sparse({{-2, 1.0}, {3, 0.5}});
    EXPECT_EQ(s.support(), (std::vector<std::int64_t>{-2, 3}));
    EXPECT_TRUE(Vector::dense({0.0, 0.0}).support().empty());
    EXPECT_EQ(Vector::basis(0).support(), (std::vector<std::int64_t>{0}));
}

TEST(Vectorspace, FarIndicesAreKeptExactly) {
    const Vector a = Vector::sparse({{-1000000000, 0.25}});
    const Vector b = Vector::sparse({{1000000000, -0.5}});
    const Vector c = add(a, b);
    EXPECT_EQ(c.get(-1000000000), 0.25);
    EXPECT_EQ(c.get(1000000000), -0.5);
}

TEST(Vectorspace, TriangleInequalityProperty) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    std::uniform_int_distribution<std::int64_t> idx(-6, 6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> xs(3), ys(3);
        for (auto& v : xs) v = coord(rng);
        for (auto& v : ys) v = coord(rng);
        const Vector x = Vector::dense(xs);
        const Vector y = Vector::dense(ys);
        EXPECT_LE(sup_norm(add(x, y)), sup_norm(x) + sup_norm(y));

        const Vector sx = Vector::sparse({{idx(rng), coord(rng)}, {idx(rng), coord(rng)}});
        const Vector sy = Vector::sparse({{idx(rng), coord(rng)}});
        EXPECT_LE(sup_norm(add(sx, sy)), sup_norm(sx) + sup_norm(sy));
    }
}

TEST(Vectorspace, HomogeneityIsExact) {
    const Vector x = Vector::dense({0.375, -1.5, 2.25});
    for (double alpha : {-2.5, -1.0, 0.0, 0.5, 3.0}) {
        EXPECT_EQ(sup_norm(scale(alpha, x)), std::abs(alpha) * sup_norm(x));
    }
    const Vector s = Vector::sparse({{-3, 0.75}, {11, -0.5}});
    EXPECT_EQ(sup_norm(scale(-2.0, s)), 2.0 * sup_norm(s));
}

TEST(Vectorspace, KeyBytesDistinguishValues) {
    std::string k1, k2, k3;
    Vector::dense({1.0, 2.0}).append_key_bytes(k1);
    Vector::dense({1.0, 2.0}).append_key_bytes(k2);
    Vector::dense({1.0, 2.0000000001}).append_key_bytes(k3);
    EXPECT_EQ(k1, k2);
    EXPECT_NE(k1, k3);
}
