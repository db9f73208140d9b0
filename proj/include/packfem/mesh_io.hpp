#pragma once

#include "packfem/mesh.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Text format, one record per line:
//
//   PACKFEM-MESH 1
//   nodes <N>
//   x y z                               (N lines)
//   elements <TET4|PYR5|PRI6|HEX8> <M>
//   i0 i1 ...                           (M lines, 0-based node ids)
//   field <name> <N>                    (optional, after the elements)
//   value                               (N lines)

namespace packfem {

struct NamedField {
    std::string name;
    std::vector<double> values;

    bool operator==(const NamedField&) const = default;
};

struct MeshFile {
    Mesh mesh;
    std::vector<NamedField> fields;
};

namespace detail {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty line split into tokens; false at end of input.
    bool next(std::vector<std::string_view>& tokens)
    {
        while (std::getline(in_, line_)) {
            ++number_;
            if (!line_.empty() && line_.back() == '\r') line_.pop_back();
            tokens.clear();
            std::string_view rest(line_);
            while (true) {
                const auto b = rest.find_first_not_of(" \t");
                if (b == std::string_view::npos) break;
                rest.remove_prefix(b);
                const auto e = rest.find_first_of(" \t");
                tokens.push_back(rest.substr(0, e));
                if (e == std::string_view::npos) break;
                rest.remove_prefix(e);
            }
            if (!tokens.empty()) return true;
        }
        ++number_;
        return false;
    }

    std::size_t line() const noexcept { return number_; }

private:
    std::istream& in_;
    std::string line_;
    std::size_t number_ = 0;
};

template <class T>
bool parse_number(std::string_view s, T& out)
{
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline std::size_t parse_count(const LineReader& r, std::string_view s, std::string_view what)
{
    std::size_t n = 0;
    if (!parse_number(s, n)) throw ParseError(r.line(), "invalid " + std::string(what) + " count '" + std::string(s) + "'");
    return n;
}

} // namespace detail

inline MeshFile read_mesh_file(std::istream& in)
{
    detail::LineReader r(in);
    std::vector<std::string_view> tok;
    MeshFile out;
    Mesh& mesh = out.mesh;

    if (!r.next(tok) || tok.size() != 2 || tok[0] != "PACKFEM-MESH" || tok[1] != "1")
        throw ParseError(r.line(), "malformed header, expected 'PACKFEM-MESH 1'");
    if (!r.next(tok) || tok.size() != 2 || tok[0] != "nodes") throw ParseError(r.line(), "malformed header, expected 'nodes <N>'");
    const std::size_t nnodes = detail::parse_count(r, tok[1], "node");
    mesh.nodes.resize(nnodes);
    const std::size_t nodes_line = r.line();

    for (std::size_t i = 0; i < nnodes; ++i) {
        if (!r.next(tok)) throw ParseError(nodes_line, "node block truncated: expected " + std::to_string(nnodes) + " nodes, got " + std::to_string(i));
        Vec3 p{};
        if (tok.size() != 3 || !detail::parse_number(tok[0], p[0]) || !detail::parse_number(tok[1], p[1]) || !detail::parse_number(tok[2], p[2])) {
            if (tok[0] == "elements" || tok[0] == "field")
                throw ParseError(r.line(), "node block truncated: expected " + std::to_string(nnodes) + " nodes, got " + std::to_string(i));
            throw ParseError(r.line(), "node block: expected 'x y z'");
        }
        mesh.nodes[i] = p;
    }

    bool pending = r.next(tok);
    while (pending && tok[0] == "elements") {
        if (tok.size() != 3) throw ParseError(r.line(), "malformed element header, expected 'elements <SHAPE> <count>'");
        const auto shape = parse_shape(tok[1]);
        if (!shape) throw ParseError(r.line(), "unknown element shape '" + std::string(tok[1]) + "'");
        const std::size_t count = detail::parse_count(r, tok[2], "element");
        for (const auto& b : mesh.blocks)
            if (b.shape == *shape) throw ParseError(r.line(), "duplicate element block " + std::string(tok[1]));
        ElementBlock block{*shape, {}};
        const int nn = node_count(*shape);
        block.connectivity.reserve(count * nn);
        const std::string label = "element block " + std::string(tok[1]);
        const std::size_t header_line = r.line();
        for (std::size_t e = 0; e < count; ++e) {
            if (!r.next(tok) || tok[0] == "elements" || tok[0] == "field")
                throw ParseError(header_line, label + " truncated: expected " + std::to_string(count) + " elements, got " + std::to_string(e));
            if (tok.size() != static_cast<std::size_t>(nn))
                throw ParseError(r.line(), label + ": expected " + std::to_string(nn) + " node ids");
            for (auto t : tok) {
                index_t v = 0;
                if (!detail::parse_number(t, v)) throw ParseError(r.line(), label + ": invalid node id '" + std::string(t) + "'");
                if (v >= nnodes) throw ParseError(r.line(), label + ": node index " + std::to_string(v) + " out of range");
                block.connectivity.push_back(v);
            }
        }
        mesh.blocks.push_back(std::move(block));
        pending = r.next(tok);
    }

    while (pending && tok[0] == "field") {
        if (tok.size() != 3) throw ParseError(r.line(), "malformed field header, expected 'field <name> <N>'");
        NamedField f{std::string(tok[1]), {}};
        const std::size_t n = detail::parse_count(r, tok[2], "field");
        if (n != nnodes) throw ParseError(r.line(), "field " + f.name + ": length " + std::to_string(n) + " differs from node count");
        f.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!r.next(tok) || tok.size() != 1 || !detail::parse_number(tok[0], f.values[i]))
                throw ParseError(r.line(), "field " + f.name + ": expected " + std::to_string(n) + " values, got " + std::to_string(i));
        }
        out.fields.push_back(std::move(f));
        pending = r.next(tok);
    }

    if (pending) throw ParseError(r.line(), "unexpected record '" + std::string(tok[0]) + "'");
    canonicalize(mesh);
    return out;
}

inline Mesh read_mesh(std::istream& in) { return read_mesh_file(in).mesh; }

inline Mesh read_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

inline MeshFile read_mesh_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open mesh file '" + path + "'");
    return read_mesh_file(in);
}

inline void write_mesh(const Mesh& mesh, std::ostream& out, std::span<const NamedField> fields = {})
{
    char buf[96];
    out << "PACKFEM-MESH 1\n";
    out << "nodes " << mesh.node_count() << '\n';
    for (const auto& p : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const auto& b : mesh.blocks) {
        out << "elements " << shape_name(b.shape) << ' ' << b.size() << '\n';
        for (std::size_t e = 0; e < b.size(); ++e) {
            const auto el = b.element(e);
            for (std::size_t i = 0; i < el.size(); ++i) out << (i ? " " : "") << el[i];
            out << '\n';
        }
    }
    for (const auto& f : fields) {
        out << "field " << f.name << ' ' << f.values.size() << '\n';
        for (double v : f.values) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            out << buf;
        }
    }
}

inline void write_mesh(const Mesh& mesh, const std::string& path, std::span<const NamedField> fields = {})
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write mesh file '" + path + "'");
    write_mesh(mesh, out, fields);
    if (!out) throw Error("write failed for '" + path + "'");
}

} // namespace packfem
