#include "conjulab/perturbations.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "conjulab/errors.hpp"
#include "conjulab/operators.hpp"

using namespace conjulab;

TEST(Perturbations, PrimitiveBounds) {
    const LipMap c = LipMap::constant(Vector::dense({0.1, -0.2}));
    EXPECT_DOUBLE_EQ(c.sup_bound(), 0.2);
    EXPECT_DOUBLE_EQ(c.lip_bound(), 0.0);

    const LipMap s1 = LipMap::sine(0, 0, 0.1, 1.0);
    EXPECT_DOUBLE_EQ(s1.sup_bound(), 0.1);
    EXPECT_DOUBLE_EQ(s1.lip_bound(), 0.1);

    const LipMap s3 = LipMap::sine(0, 0, 0.1, 3.0);
    EXPECT_NEAR(s3.lip_bound(), 0.3, 1e-15);
}

TEST(Perturbations, ClampLinear) {
    Eigen::MatrixXd gain(2, 2);
    gain << 0.1, 0.0, 0.0, 0.1;
    const LipMap m = LipMap::clamp_linear(gain, 2.0);
    EXPECT_DOUBLE_EQ(m.sup_bound(), 0.2);
    EXPECT_DOUBLE_EQ(m.lip_bound(), 0.1);
    const Vector far = Vector::dense({5.0, -5.0});
    EXPECT_NEAR(distance(m.eval(far), Vector::dense({0.2, -0.2})), 0.0, 1e-15);
    EXPECT_THROW(m.eval(Vector::basis(0)), std::invalid_argument);
    EXPECT_THROW(LipMap::clamp_linear(gain, 0.0), std::invalid_argument);
}

TEST(Perturbations, CombinatorBounds) {
    const LipMap half_const = LipMap::scaled(0.5, LipMap::constant(Vector::dense({0.2, 0.0})));
    EXPECT_DOUBLE_EQ(half_const.sup_bound(), 0.1);
    EXPECT_DOUBLE_EQ(half_const.lip_bound(), 0.0);

    const LipMap s = LipMap::sum({LipMap::sine(0, 0, 0.1, 1.0),
                                  LipMap::constant(Vector::dense({0.05, 0.0}))});
    EXPECT_NEAR(s.sup_bound(), 0.15, 1e-15);
    EXPECT_NEAR(s.lip_bound(), 0.1, 1e-15);

    const LipMap zero = LipMap::scaled(0.0, s);
    EXPECT_DOUBLE_EQ(zero.sup_bound(), 0.0);
    EXPECT_DOUBLE_EQ(zero.lip_bound(), 0.0);
    EXPECT_TRUE(zero.is_zero_bound());

    const LipMap comp = LipMap::composed(LipMap::sine(0, 0, 0.1, 2.0), LipMap::sine(0, 0, 0.3, 1.0));
    EXPECT_NEAR(comp.sup_bound(), 0.1, 1e-15);
    EXPECT_NEAR(comp.lip_bound(), 0.2 * 1.3, 1e-15);
}

// Certified bounds dominate sampled estimates on random pairs.
TEST(Perturbations, SampledEstimatesStayBelowCertifiedBounds) {
    const LipMap maps[] = {
        LipMap::sum({LipMap::sine(0, 1, 0.2, 2.0), LipMap::constant(Vector::dense({0.05, -0.1}))}),
        LipMap::composed(LipMap::sine(1, 0, 0.15, 1.5), LipMap::sine(0, 1, 0.2, 1.0)),
        LipMap::scaled(-0.7, LipMap::sine(0, 0, 0.3, 2.5)),
    };
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    for (const auto& m : maps) {
        for (int trial = 0; trial < 10000; ++trial) {
            const Vector x = Vector::dense({coord(rng), coord(rng)});
            const Vector y = Vector::dense({coord(rng), coord(rng)});
            EXPECT_LE(sup_norm(m.eval(x)), m.sup_bound() + 1e-9);
            const double dx = distance(x, y);
            if (dx > 0.0) {
                EXPECT_LE(distance(m.eval(x), m.eval(y)), m.lip_bound() * dx + 1e-9);
            }
        }
    }
}

TEST(Perturbations, SparseEvaluationKeepsFiniteSupport) {
    const LipMap s = LipMap::sine(2, -5, 0.1, 1.0);
    const Vector x = Vector::sparse({{2, 1.5}, {7, -0.25}});
    const Vector out = s.eval(x);
    EXPECT_EQ(out.support(), (std::vector<std::int64_t>{-5}));
    EXPECT_NEAR(out.get(-5), 0.1 * std::sin(1.5), 1e-15);
    // reading an absent coordinate sees zero, so the image is the zero vector
    EXPECT_TRUE(s.eval(Vector::basis(0)).is_zero());
}

TEST(Perturbations, AdmissibilityModes) {
    const PerturbationTuple big({LipMap::constant(Vector::dense({0.3}))});
    EXPECT_TRUE(big.admissible('A', 0.1));    // Lipschitz bound is zero
    EXPECT_FALSE(big.admissible('B', 0.1));   // sup bound exceeds eps
    EXPECT_THROW(big.require_admissible('B', 0.1), admissibility_error);
    const PerturbationTuple sine({LipMap::sine(0, 0, 0.2, 1.0)});
    EXPECT_FALSE(sine.admissible('A', 0.2));  // strict inequality at the boundary
    EXPECT_TRUE(sine.admissible('A', 0.2000001));
}

TEST(Perturbations, TupleDistanceExactCases) {
    const PerturbationTuple a({LipMap::constant(Vector::dense({0.1, 0.0}))});
    const PerturbationTuple b({LipMap::constant(Vector::dense({0.2, 0.0}))});
    const TupleDistance d = tuple_distance(a, b);
    EXPECT_NEAR(d.upper, 0.1, 1e-15);
    EXPECT_TRUE(d.exact);
    EXPECT_FALSE(d.sampled);

    const TupleDistance self = tuple_distance(a, a);
    EXPECT_DOUBLE_EQ(self.upper, 0.0);

    const PerturbationTuple s1({LipMap::sine(0, 0, 0.10, 2.0)});
    const PerturbationTuple s2({LipMap::sine(0, 0, 0.12, 2.0)});
    const TupleDistance ds = tuple_distance(s1, s2);
    EXPECT_NEAR(ds.upper, 0.02, 1e-15);
    EXPECT_TRUE(ds.exact);
}

TEST(Perturbations, TupleDistanceFallsBackToSampled) {
    const PerturbationTuple a({LipMap::sine(0, 0, 0.1, 1.0)});
    const PerturbationTuple b({LipMap::constant(Vector::dense({0.05}))});
    std::vector<Vector> probes{Vector::dense({0.5}), Vector::dense({-2.0})};
    const TupleDistance d = tuple_distance(a, b, probes);
    EXPECT_TRUE(d.sampled);
    EXPECT_NEAR(d.upper, 0.15, 1e-15);  // trivial bound sup + sup'
    EXPECT_GT(d.lower_sampled, 0.0);
    EXPECT_LE(d.lower_sampled, d.upper);
    EXPECT_THROW(
        tuple_distance(a, PerturbationTuple({LipMap::sine(0, 0, 0.1, 1.0), LipMap::sine(0, 0, 0.1, 1.0)})),
        std::invalid_argument);
}

TEST(Perturbations, InvertPerturbedLinear) {
    const SplitOperator op = make_diagonal_operator({2.0});
    const LipMap c = LipMap::constant(Vector::dense({0.3}));
    const Vector x = invert_perturbed(op, c, Vector::dense({1.3}), 1e-12);
    EXPECT_NEAR(x.get(0), 0.5, 1e-12);
}

TEST(Perturbations, InvertPerturbedOddSymmetry) {
    const SplitOperator op = make_diagonal_operator({2.0});
    const LipMap s = LipMap::sine(0, 0, 0.1, 1.0);
    const Vector x = invert_perturbed(op, s, Vector::dense({0.0}), 1e-13);
    EXPECT_NEAR(x.get(0), 0.0, 1e-13);
}

TEST(Perturbations, InvertPerturbedAgainstBisection) {
    // solve 2x + 0.1 sin(x) = 1 by bisection to 1e-12, independently
    auto f = [](double x) { return 2.0 * x + 0.1 * std::sin(x) - 1.0; };
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
    }
    const double root = 0.5 * (lo + hi);

    const SplitOperator op = make_diagonal_operator({2.0});
    const LipMap s = LipMap::sine(0, 0, 0.1, 1.0);
    const Vector x = invert_perturbed(op, s, Vector::dense({1.0}), 1e-13);
    EXPECT_NEAR(x.get(0), root, 1e-11);
}

TEST(Perturbations, InvertPerturbedPreconditions) {
    const SplitOperator op = make_diagonal_operator({0.5, 2.0});  // ||T^{-1}|| = 2
    const LipMap too_steep = LipMap::sine(0, 0, 1.0, 1.0);        // Lip = 1, q = 2
    EXPECT_THROW(invert_perturbed(op, too_steep, Vector::dense({0.0, 0.0}), 1e-10),
                 admissibility_error);
}

// Round trip ||(T+L)(x) - y|| <= tol for 100 random targets of norm <= 10.
TEST(Perturbations, InvertPerturbedRoundTrip) {
    const SplitOperator op = make_diagonal_operator({0.5, 2.0});
    const LipMap L = LipMap::sum({LipMap::sine(0, 1, 0.1, 1.0), LipMap::sine(1, 0, 0.05, 2.0)});
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    const double tol = 1e-10;
    for (int trial = 0; trial < 100; ++trial) {
        const Vector y = Vector::dense({coord(rng), coord(rng)});
        const Vector x = invert_perturbed(op, L, y, tol);
        EXPECT_LE(distance(apply_perturbed(op, L, x), y), tol);
    }
}
