#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace packfem;
using namespace packfem::test;

namespace {

std::size_t mesh_count(const Mesh& m, ElementShape s) { return m.count(s); }

TEST(BoxMesh, AllHexTwoCubed)
{
    const auto m = generate_box_mesh(2, 2, 2, MixPolicy::AllHex);
    EXPECT_EQ(m.node_count(), 27u);
    EXPECT_EQ(m.element_count(), 8u);
    EXPECT_EQ(mesh_count(m, ElementShape::Hex8), 8u);
}

TEST(BoxMesh, SingleCellSixTets)
{
    const auto m = generate_box_mesh(1, 1, 1, MixPolicy::AllTet);
    EXPECT_EQ(m.node_count(), 8u);
    EXPECT_EQ(m.element_count(), 6u);
    EXPECT_EQ(mesh_count(m, ElementShape::Tet4), 6u);
}

TEST(BoxMesh, MixedCensusMatchesGolden)
{
    std::ifstream in(fixture("mixed_4x4x4.census"));
    ASSERT_TRUE(in) << "missing census fixture";
    std::map<std::string, std::size_t> golden;
    std::string key;
    std::size_t value = 0;
    while (in >> key >> value) golden[key] = value;

    const auto m = generate_box_mesh(4, 4, 4, MixPolicy::Mixed);
    EXPECT_EQ(m.node_count(), golden.at("nodes"));
    std::size_t smallest = SIZE_MAX;
    for (auto s : kAllShapes) {
        EXPECT_EQ(m.count(s), golden.at(std::string(shape_name(s)))) << shape_name(s);
        EXPECT_GT(m.count(s), 0u);
        smallest = std::min(smallest, m.count(s));
    }
    EXPECT_EQ(m.count(ElementShape::Pyr5), smallest);
    for (auto s : {ElementShape::Tet4, ElementShape::Pri6, ElementShape::Hex8}) EXPECT_GT(m.count(s), m.count(ElementShape::Pyr5));
}

TEST(BoxMesh, MixedNeedsThreeLayers)
{
    EXPECT_THROW(generate_box_mesh(2, 2, 2, MixPolicy::Mixed), Error);
    EXPECT_NO_THROW(generate_box_mesh(1, 1, 3, MixPolicy::Mixed));
}

TEST(BoxMesh, ZeroCellsRejected) { EXPECT_THROW(generate_box_mesh(0, 1, 1, MixPolicy::AllHex), Error); }

TEST(BoxMesh, CountsVolumesAndConformityOverRandomSizes)
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t nx = dim(rng), ny = dim(rng), nz = dim(rng);
        for (auto mix : {MixPolicy::AllTet, MixPolicy::AllHex, MixPolicy::Mixed}) {
            if (mix == MixPolicy::Mixed && nz < 3) continue;
            SCOPED_TRACE(::testing::Message() << nx << "x" << ny << "x" << nz << " mix " << static_cast<int>(mix));
            const auto m = generate_box_mesh(nx, ny, nz, mix);
            if (mix == MixPolicy::AllHex) {
                EXPECT_EQ(m.element_count(), nx * ny * nz);
                EXPECT_EQ(m.node_count(), (nx + 1) * (ny + 1) * (nz + 1));
            }
            if (mix == MixPolicy::AllTet) {
                EXPECT_EQ(m.element_count(), 6 * nx * ny * nz);
            }
            EXPECT_TRUE(validate(m).empty());

            // Volumes add up to the unit cube.
            double vol = 0.0;
            for (const auto& b : m.blocks)
                for (std::size_t e = 0; e < b.size(); ++e) {
                    const auto x = gather_coords(m, b.element(e));
                    const auto g = element_geometry(shape_table(b.shape), std::span(x.data(), b.element(e).size()));
                    for (int ig = 0; ig < node_count(b.shape); ++ig) vol += g.detJ[ig];
                }
            EXPECT_NEAR(vol, 1.0, 1e-12);

            // Conforming: every interior face is shared by exactly two elements and
            // boundary faces lie on the cube surface.
            const auto keys = face_keys(m);
            for (std::size_t i = 0; i < keys.size();) {
                std::size_t j = i + 1;
                while (j < keys.size() && keys[j] == keys[i]) ++j;
                EXPECT_LE(j - i, 2u);
                if (j - i == 1) {
                    bool on_surface = false;
                    for (int c = 0; c < 3; ++c) {
                        bool all0 = true, all1 = true;
                        for (index_t v : keys[i])
                            if (v != kPad) {
                                all0 = all0 && m.nodes[v][c] == 0.0;
                                all1 = all1 && m.nodes[v][c] == 1.0;
                            }
                        on_surface = on_surface || all0 || all1;
                    }
                    EXPECT_TRUE(on_surface);
                }
                i = j;
            }

            const auto g = node_adjacency(m);
            for (std::size_t v = 0; v < g.size(); ++v) {
                const auto nb = g.neighbors(v);
                EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
                for (index_t w : nb) {
                    EXPECT_NE(w, v);
                    const auto back = g.neighbors(w);
                    EXPECT_TRUE(std::binary_search(back.begin(), back.end(), static_cast<index_t>(v)));
                }
            }
        }
    }
}

TEST(Adjacency, SingleTetIsK4)
{
    const auto g = node_adjacency(single_element(ElementShape::Tet4, {reference_nodes(ElementShape::Tet4).begin(),
                                                                       reference_nodes(ElementShape::Tet4).end()}));
    EXPECT_EQ(g.size(), 4u);
    EXPECT_EQ(g.edge_count(), 6u);
    for (std::size_t v = 0; v < 4; ++v) EXPECT_EQ(g.degree(v), 3u);
}

TEST(Adjacency, TwoTetsSharingFace)
{
    const auto g = node_adjacency(two_tets());
    EXPECT_EQ(g.size(), 5u);
    EXPECT_EQ(g.edge_count(), 9u);
}

TEST(Adjacency, HexCenterDegreeMatchesBruteForce)
{
    const auto m = generate_box_mesh(2, 2, 2, MixPolicy::AllHex);
    const index_t center = 13;
    ASSERT_EQ(m.nodes[center], (Vec3{0.5, 0.5, 0.5}));
    std::set<index_t> seen;
    for (const auto& b : m.blocks)
        for (std::size_t e = 0; e < b.size(); ++e) {
            const auto el = b.element(e);
            if (std::find(el.begin(), el.end(), center) == el.end()) continue;
            for (index_t v : el)
                if (v != center) seen.insert(v);
        }
    EXPECT_EQ(seen.size(), 26u);
    EXPECT_EQ(node_adjacency(m).degree(center), seen.size());
}

TEST(Adjacency, FromEdgesDropsDuplicatesAndLoops)
{
    const Edges e{{0, 1}, {1, 0}, {2, 2}, {1, 2}};
    const auto g = AdjacencyGraph::from_edges(3, e);
    EXPECT_EQ(g.edge_count(), 2u);
    EXPECT_EQ(g.degree(2), 1u);
}

TEST(Validate, GeneratedMeshIsClean) { EXPECT_TRUE(validate(generate_box_mesh(3, 3, 3, MixPolicy::Mixed)).empty()); }

TEST(Validate, SwappedTetIsInverted)
{
    auto m = single_element(ElementShape::Tet4, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    std::swap(m.blocks[0].connectivity[1], m.blocks[0].connectivity[2]);
    const auto d = validate(m);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].kind, Defect::Kind::InvertedElement);
    EXPECT_NE(d[0].message.find("inverted element"), std::string::npos);
}

TEST(Validate, CoincidentNodes)
{
    auto m = single_element(ElementShape::Tet4, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    m.nodes.push_back({1, 0, 0});
    const auto d = validate(m);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].kind, Defect::Kind::DuplicateNode);
    EXPECT_EQ(d[0].index, 4u);
    EXPECT_NE(d[0].message.find("duplicate node"), std::string::npos);
}

TEST(Validate, OutOfRangeAndRepeated)
{
    Mesh m;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.blocks.push_back({ElementShape::Tet4, {0, 1, 2, 9, 0, 1, 1, 3}});
    const auto d = validate(m);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0].kind, Defect::Kind::IndexOutOfRange);
    EXPECT_EQ(d[1].kind, Defect::Kind::RepeatedNode);
}

TEST(Boundary, CubeSurfaceNodes)
{
    const auto m = generate_box_mesh(3, 3, 3, MixPolicy::AllHex);
    EXPECT_EQ(boundary_nodes(m).size(), 64u - 8u);
    const auto mixed = generate_box_mesh(3, 3, 3, MixPolicy::Mixed);
    for (index_t v : boundary_nodes(mixed)) {
        const auto& x = mixed.nodes[v];
        EXPECT_TRUE(x[0] == 0 || x[0] == 1 || x[1] == 0 || x[1] == 1 || x[2] == 0 || x[2] == 1);
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

std::string expect_parse_error(const std::string& text, std::size_t line)
{
    std::istringstream in(text);
    try {
        read_mesh(in);
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), line) << e.what();
        return e.what();
    }
    ADD_FAILURE() << "no parse error";
    return {};
}

TEST(MeshIo, RoundTripIsIdentity)
{
    for (auto m : {generate_box_mesh(1, 1, 1, MixPolicy::AllTet), generate_box_mesh(3, 2, 4, MixPolicy::Mixed)}) {
        std::stringstream buf;
        write_mesh(m, buf);
        EXPECT_EQ(read_mesh(buf), m);
    }
}

TEST(MeshIo, RoundTripExactCoordinates)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    Mesh m;
    for (int i = 0; i < 4; ++i) m.nodes.push_back({u(rng), u(rng) * 1e-9, u(rng) * 1e17});
    m.blocks.push_back({ElementShape::Tet4, {0, 1, 2, 3}});
    std::stringstream buf;
    write_mesh(m, buf);
    EXPECT_EQ(read_mesh(buf), m);
}

TEST(MeshIo, FieldsRoundTrip)
{
    const auto m = generate_box_mesh(1, 1, 1, MixPolicy::AllHex);
    std::vector<NamedField> f{{"temper", std::vector<double>(8, 0.1)}, {"c", {0, 1, 2, 3, 4, 5, 6, 7}}};
    std::stringstream buf;
    write_mesh(m, buf, f);
    const auto back = read_mesh_file(buf);
    EXPECT_EQ(back.mesh, m);
    EXPECT_EQ(back.fields, f);
}

TEST(MeshIo, FileRoundTrip)
{
    const auto path = (scratch_dir() / "roundtrip.pfm").string();
    const auto m = generate_box_mesh(2, 2, 3, MixPolicy::Mixed);
    write_mesh(m, path);
    EXPECT_EQ(read_mesh(path), m);
}

TEST(MeshIo, ShortNodeBlock)
{
    const auto msg = expect_parse_error("PACKFEM-MESH 1\nnodes 5\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements TET4 1\n0 1 2 3\n", 7);
    EXPECT_NE(msg.find("node block"), std::string::npos);
}

TEST(MeshIo, EmptyElementSection)
{
    const auto msg = expect_parse_error("PACKFEM-MESH 1\nnodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements TET4 2\n", 7);
    EXPECT_NE(msg.find("TET4"), std::string::npos);
}

TEST(MeshIo, MalformedHeader) { expect_parse_error("PACKFEM-MESH 2\nnodes 0\n", 1); }

TEST(MeshIo, IndexOutOfRange)
{
    const auto msg = expect_parse_error("PACKFEM-MESH 1\nnodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements TET4 1\n0 1 2 4\n", 8);
    EXPECT_NE(msg.find("out of range"), std::string::npos);
}

TEST(MeshIo, MissingFileIsError) { EXPECT_THROW(read_mesh(std::string("/nonexistent/dir/none.pfm")), Error); }

} // namespace
