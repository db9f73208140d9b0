#include "support.hpp"

#include <gtest/gtest.h>

using namespace packfem;
using namespace packfem::test;

namespace packfem {
inline void PrintTo(ElementShape s, std::ostream* os) { *os << shape_name(s); }
} // namespace packfem

namespace {

class ShapeTableTest : public ::testing::TestWithParam<ElementShape> {};

TEST_P(ShapeTableTest, CountsMatchShape)
{
    const auto& t = shape_table(GetParam());
    EXPECT_EQ(t.nnodes, node_count(GetParam()));
    EXPECT_EQ(t.ngauss, node_count(GetParam()));
}

TEST_P(ShapeTableTest, PartitionOfUnityAndGradientConsistency)
{
    const auto& t = shape_table(GetParam());
    for (int ig = 0; ig < t.ngauss; ++ig) {
        double s = 0.0;
        for (int in = 0; in < t.nnodes; ++in) s += t.N[in][ig];
        EXPECT_NEAR(s, 1.0, 1e-14);
        for (int d = 0; d < 3; ++d) {
            double g = 0.0;
            for (int in = 0; in < t.nnodes; ++in) g += t.dN[d][in][ig];
            EXPECT_NEAR(g, 0.0, 1e-13);
        }
    }
}

TEST_P(ShapeTableTest, WeightsSumToReferenceVolume)
{
    const auto& t = shape_table(GetParam());
    double s = 0.0;
    for (int ig = 0; ig < t.ngauss; ++ig) s += t.w[ig];
    EXPECT_NEAR(s, reference_volume(GetParam()), 1e-14);
}

TEST_P(ShapeTableTest, BasisIsNodalInterpolant)
{
    const auto s = GetParam();
    const auto nodes = reference_nodes(s);
    std::array<double, kMaxNodes> v{};
    std::array<Vec3, kMaxNodes> g{};
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        // Apex of the pyramid is a removable singularity; step just below it.
        Vec3 p = nodes[a];
        if (s == ElementShape::Pyr5 && p[2] == 1.0) p[2] = 1.0 - 1e-12;
        detail::evaluate_basis(s, p, std::span(v.data(), nodes.size()), std::span(g.data(), nodes.size()));
        for (std::size_t b = 0; b < nodes.size(); ++b) EXPECT_NEAR(v[b], a == b ? 1.0 : 0.0, 1e-10) << a << ' ' << b;
    }
}

TEST_P(ShapeTableTest, AffineVolumeAndLinearGradients)
{
    const auto s = GetParam();
    const auto& t = shape_table(s);
    std::mt19937_64 rng(0xC0FFEE + static_cast<unsigned>(s));
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    const double vol_tol = s == ElementShape::Pyr5 ? 1e-10 : 1e-12;
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_affine(rng);
        const auto x = mapped_reference(s, f);
        const auto geo = element_geometry(t, x);
        const double vol = volume_by_tets(s, x);
        double sum = 0.0;
        for (int ig = 0; ig < t.ngauss; ++ig) sum += geo.detJ[ig];
        EXPECT_NEAR(sum, vol, vol_tol * std::max(1.0, vol));

        const Vec3 a{coef(rng), coef(rng), coef(rng)};
        const double b = coef(rng);
        for (int ig = 0; ig < t.ngauss; ++ig)
            for (int e = 0; e < 3; ++e) {
                double g = 0.0;
                for (int in = 0; in < t.nnodes; ++in) g += geo.gradN[e][in][ig] * (a[0] * x[in][0] + a[1] * x[in][1] + a[2] * x[in][2] + b);
                EXPECT_NEAR(g, a[e], 1e-12);
            }
    }
}

INSTANTIATE_TEST_SUITE_P(AllShapes, ShapeTableTest, ::testing::ValuesIn(kAllShapes),
                         [](const auto& info) { return std::string(shape_name(info.param)); });

TEST(Quadrature, TetHasFourPoints) { EXPECT_EQ(shape_table(ElementShape::Tet4).ngauss, 4); }

TEST(Quadrature, HexWeightsSumToOne)
{
    const auto& t = shape_table(ElementShape::Hex8);
    double s = 0.0;
    for (int ig = 0; ig < t.ngauss; ++ig) s += t.w[ig];
    EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(Quadrature, TetLinearIntegral)
{
    // Integral of a linear basis function over the reference tet is V/4.
    const auto& t = shape_table(ElementShape::Tet4);
    for (int in = 0; in < 4; ++in) {
        double s = 0.0;
        for (int ig = 0; ig < 4; ++ig) s += t.w[ig] * t.N[in][ig];
        EXPECT_NEAR(s, (1.0 / 6.0) / 4.0, 1e-15);
    }
}

TEST(Quadrature, TetMassProductsExact)
{
    // Integral of N_i N_j over the reference tet: V/10 on the diagonal, V/20 off it.
    const auto& t = shape_table(ElementShape::Tet4);
    const double V = 1.0 / 6.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int ig = 0; ig < 4; ++ig) s += t.w[ig] * t.N[i][ig] * t.N[j][ig];
            EXPECT_NEAR(s, i == j ? V / 10.0 : V / 20.0, 1e-15);
        }
}

TEST(Quadrature, HexIntegratesTrilinearProductsExactly)
{
    // Integral of N_0 N_0 on the unit cube is (1/3)^3.
    const auto& t = shape_table(ElementShape::Hex8);
    double s = 0.0;
    for (int ig = 0; ig < 8; ++ig) s += t.w[ig] * t.N[0][ig] * t.N[0][ig];
    EXPECT_NEAR(s, 1.0 / 27.0, 1e-15);
}

TEST(Quadrature, PyramidRuleExactOnLowDegreeMonomials)
{
    // Over the pyramid |x|,|y| <= 1 - z: int 1 = 4/3, int z = 1/3, int z^2 = 2/15,
    // int x^2 = 4/15, int z^3 = 1/15.
    const auto& t = shape_table(ElementShape::Pyr5);
    auto integrate = [&](auto f) {
        double s = 0.0;
        for (int ig = 0; ig < t.ngauss; ++ig) s += t.w[ig] * f(t.points[ig]);
        return s;
    };
    EXPECT_NEAR(integrate([](const Vec3&) { return 1.0; }), 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(integrate([](const Vec3& p) { return p[2]; }), 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(integrate([](const Vec3& p) { return p[2] * p[2]; }), 2.0 / 15.0, 1e-14);
    EXPECT_NEAR(integrate([](const Vec3& p) { return p[0] * p[0]; }), 4.0 / 15.0, 1e-14);
    EXPECT_NEAR(integrate([](const Vec3& p) { return p[2] * p[2] * p[2]; }), 1.0 / 15.0, 1e-14);
    EXPECT_NEAR(integrate([](const Vec3& p) { return p[0] * p[1]; }), 0.0, 1e-14);
}

TEST(Geometry, ReferenceTetVolume)
{
    const auto nodes = reference_nodes(ElementShape::Tet4);
    const auto g = element_geometry(shape_table(ElementShape::Tet4), nodes);
    EXPECT_NEAR(g.detJ[0] + g.detJ[1] + g.detJ[2] + g.detJ[3], 1.0 / 6.0, 1e-15);
}

TEST(Geometry, UnitCubeVolume)
{
    const auto g = element_geometry(shape_table(ElementShape::Hex8), reference_nodes(ElementShape::Hex8));
    double s = 0.0;
    for (int ig = 0; ig < 8; ++ig) s += g.detJ[ig];
    EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Geometry, ScalingByTwoMultipliesDetByEight)
{
    const auto& t = shape_table(ElementShape::Tet4);
    std::vector<Vec3> x{{0.1, 0.2, 0.0}, {1.3, 0.1, 0.2}, {0.2, 0.9, 0.1}, {0.3, 0.2, 1.1}};
    const auto g1 = element_geometry(t, x);
    for (auto& p : x)
        for (auto& c : p) c *= 2.0;
    const auto g2 = element_geometry(t, x);
    for (int ig = 0; ig < 4; ++ig) EXPECT_DOUBLE_EQ(g2.detJ[ig], 8.0 * g1.detJ[ig]);
}

TEST(Geometry, SingularJacobianThrows)
{
    std::vector<Vec3> flat{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    try {
        element_geometry(shape_table(ElementShape::Tet4), flat, 42);
        FAIL() << "expected GeometryError";
    } catch (const GeometryError& e) {
        EXPECT_EQ(e.element(), 42u);
        EXPECT_NE(std::string(e.what()).find("singular"), std::string::npos);
    }
}

TEST(Geometry, WrongNodeCountThrows)
{
    std::vector<Vec3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    EXPECT_THROW(element_geometry(shape_table(ElementShape::Tet4), three), Error);
}

} // namespace
