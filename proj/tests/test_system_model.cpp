#include "cemppc/error.hpp"
#include "cemppc/system_model.hpp"

#include <gtest/gtest.h>

using namespace cemppc;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::InvalidInput;
}

} // namespace

TEST(LinearSystem, ShapeValidation) {
    EXPECT_EQ(kind_of([] { LinearSystem(Matrix::Identity(2, 3), Matrix::Ones(2, 1)); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([] { LinearSystem(Matrix::Identity(2, 2), Matrix::Ones(3, 1)); }), ErrorKind::InvalidInput);
    const LinearSystem sys(Matrix::Identity(2, 2), Matrix::Ones(2, 1));
    EXPECT_EQ(sys.n(), 2);
    EXPECT_EQ(sys.m(), 1);
    EXPECT_TRUE(sys.step(Vector::Ones(2), Vector::Ones(1)).isApprox(Vector::Constant(2, 2.0)));
}

TEST(LinearSystem, Stabilizability) {
    EXPECT_TRUE(is_stabilizable(reference_example().system));
    const LinearSystem bad((Matrix(2, 2) << 2, 0, 0, 0.3).finished(), (Matrix(2, 1) << 0, 1).finished());
    EXPECT_FALSE(is_stabilizable(bad));
    EXPECT_EQ(kind_of([&] { require_stabilizable(bad); }), ErrorKind::NonStabilizable);
}

TEST(CostWeights, RejectsIndefinite) {
    EXPECT_EQ(kind_of([] { CostWeights(-Matrix::Identity(2, 2), Matrix::Identity(1, 1)); }), ErrorKind::Domain);
    const CostWeights W(2 * Matrix::Identity(2, 2), Matrix::Identity(1, 1));
    EXPECT_DOUBLE_EQ(W.q_extremes().sigma_max, 2.0);
    EXPECT_DOUBLE_EQ(W.q_extremes().ratio, 1.0);
}

TEST(InputSet, ReferenceExtremes) {
    const auto ext = input_set_extremes(reference_example().input_set);
    EXPECT_NEAR(ext.u_bar, 0.01, 1e-15);
    EXPECT_NEAR(ext.d_bar_u, 0.04, 1e-15);
}

TEST(InputSet, BoxAndSimplexIn2D) {
    // box |u_i| <= 0.5: vertices (±.5, ±.5)
    const InputPolytope box((Matrix(4, 2) << 2, 0, -2, 0, 0, 2, 0, -2).finished());
    auto ext = input_set_extremes(box);
    EXPECT_NEAR(ext.u_bar, 0.5, 1e-14);
    EXPECT_NEAR(ext.d_bar_u, 2.0, 1e-14);
    EXPECT_EQ(polytope_vertices(box).size(), 4u);
    // triangle u1 <= 1, u2 <= 1, -u1 - u2 <= 1: vertices (1,1), (1,-2), (-2,1)
    const InputPolytope tri((Matrix(3, 2) << 1, 0, 0, 1, -1, -1).finished());
    ext = input_set_extremes(tri);
    EXPECT_NEAR(ext.u_bar, 5.0, 1e-12);
    EXPECT_NEAR(ext.d_bar_u, 18.0, 1e-12);
}

TEST(InputSet, CubeIn3D) {
    Matrix F(6, 3);
    F << Matrix::Identity(3, 3), -Matrix::Identity(3, 3);
    const auto ext = input_set_extremes(InputPolytope(F));
    EXPECT_NEAR(ext.u_bar, 3.0, 1e-12);
    EXPECT_NEAR(ext.d_bar_u, 12.0, 1e-12);
}

TEST(InputSet, UnboundedAndUnsupported) {
    EXPECT_EQ(kind_of([] { (void)input_set_extremes(InputPolytope((Matrix(1, 1) << 1).finished())); }),
              ErrorKind::UnboundedSet);
    EXPECT_EQ(kind_of([] { (void)input_set_extremes(InputPolytope((Matrix(2, 2) << 1, 0, -1, 0).finished())); }),
              ErrorKind::UnboundedSet);
    EXPECT_EQ(kind_of([] { (void)input_set_extremes(InputPolytope((Matrix(2, 2) << 1, 0, 0, 1).finished())); }),
              ErrorKind::UnboundedSet);
    EXPECT_EQ(kind_of([] { (void)input_set_extremes(InputPolytope(Matrix::Identity(4, 4))); }),
              ErrorKind::UnsupportedDimension);
}

TEST(EpsilonK, ClosedForm) {
    // u = Kx with K = [k1 k2], Q = qI: ε = min_i 1/(f_i² ‖K‖² / q)
    const Matrix K = (Matrix(1, 2) << -0.5, -0.25).finished();
    const auto ref = reference_example();
    const double expect = 2.0 / (100.0 * K.squaredNorm());
    EXPECT_NEAR(epsilon_K(K, ref.input_set, ref.weights.Q()), expect, 1e-14);
    EXPECT_EQ(epsilon_K(Matrix::Zero(1, 2), ref.input_set, ref.weights.Q()), kInf);
}

TEST(Sampling, StaysInsideBallAndIsDeterministic) {
    const auto ref = reference_example();
    const UncertaintySpec spec{0.05, 0.02};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto est = sample_estimate(ref.system, spec, seed);
        EXPECT_LE((est.A() - ref.system.A()).norm(), spec.delta_A);
        EXPECT_LE((est.B() - ref.system.B()).norm(), spec.delta_B);
    }
    const auto a = sample_estimate(ref.system, spec, 99);
    const auto b = sample_estimate(ref.system, spec, 99);
    EXPECT_EQ(a.A(), b.A());
    EXPECT_EQ(a.B(), b.B());
    const auto on = sample_estimate(ref.system, spec, 5, SamplingOptions{true, 100});
    EXPECT_NEAR((on.A() - ref.system.A()).norm(), spec.delta_A, 1e-12);
    EXPECT_NEAR((on.B() - ref.system.B()).norm(), spec.delta_B, 1e-12);
    const auto exact = sample_estimate(ref.system, UncertaintySpec{}, 1);
    EXPECT_EQ(exact.A(), ref.system.A());
    EXPECT_EQ(kind_of([&] { (void)sample_estimate(ref.system, UncertaintySpec{-1, 0}, 1); }), ErrorKind::InvalidInput);
}

TEST(SystemDefinition, RoundTripAndErrors) {
    auto def = reference_example();
    def.uncertainty = {0.01, 0.02};
    const auto back = parse_system_definition(dump_system_definition(def));
    EXPECT_EQ(back.system.A(), def.system.A());
    EXPECT_EQ(back.input_set.F(), def.input_set.F());
    EXPECT_DOUBLE_EQ(back.uncertainty.delta_B, 0.02);

    EXPECT_EQ(kind_of([] { (void)parse_system_definition("{"); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { (void)parse_system_definition(R"({"A":[[1]],"B":[[1]],"Q":[[1]],"R":[[1]]})"); }),
              ErrorKind::Config);
    EXPECT_EQ(kind_of([] {
                  (void)parse_system_definition(R"({"A":[[1,0],[0]],"B":[[1],[1]],"Q":[[1]],"R":[[1]],"F_u":[[1]]})");
              }),
              ErrorKind::Config);
    try {
        (void)parse_system_definition(R"({"A":[[1,0],[0,1]],"B":[[1],[1]],"Q":[[1,0],[0,1]],"R":[[1]]})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("F_u"), std::string::npos);
    }
}
