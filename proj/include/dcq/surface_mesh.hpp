#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dcq {

using Vec3 = Eigen::Vector3d;

// Global edge: v0 < v1. tri[0] traverses v0 -> v1 in its cyclic order (sign +1), tri[1] the reverse.
// local[k] is the local index (= opposite vertex) of the edge in tri[k].
struct Edge {
    int v0 = -1, v1 = -1;
    std::array<int, 2> tri{-1, -1};
    std::array<int, 2> local{-1, -1};
};

struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    // filled by finalize()
    std::vector<Edge> edges;
    std::vector<std::array<int, 3>> tri_edges; // local edge k is opposite local vertex k
    std::vector<std::array<int, 3>> tri_signs;
    std::vector<Vec3> normals;
    std::vector<double> areas;
    std::vector<int> component;
    int n_components = 0;
    double h = 0;        // max circumscribed-circle diameter
    double max_edge = 0; // max element diameter
    int level = -1;      // nominal refinement level for generated meshes
    std::vector<int> parent; // parent triangle in the next coarser mesh of a hierarchy

    int nv() const { return static_cast<int>(vertices.size()); }
    int nt() const { return static_cast<int>(triangles.size()); }
    int ne() const { return static_cast<int>(edges.size()); }
    int euler() const { return nv() - ne() + nt(); }

    Vec3 vertex(int t, int k) const { return vertices[triangles[t][k]]; }
    Vec3 centroid(int t) const { return (vertex(t, 0) + vertex(t, 1) + vertex(t, 2)) / 3.0; }

    double edge_length(int e) const { return (vertices[edges[e].v1] - vertices[edges[e].v0]).norm(); }

    double diameter(int t) const
    {
        double d = 0;
        for (int k = 0; k < 3; ++k) d = std::max(d, (vertex(t, k) - vertex(t, (k + 1) % 3)).norm());
        return d;
    }

    // Signed volume enclosed by the surface (positive for outward orientation).
    double signed_volume() const
    {
        double v = 0;
        for (int t = 0; t < nt(); ++t) v += vertex(t, 0).dot(vertex(t, 1).cross(vertex(t, 2))) / 6.0;
        return v;
    }

    // Builds edges and geometry; repairs orientation by flood fill and flips each component outward.
    void finalize(bool repair_orientation = true)
    {
        for (const auto& t : triangles) {
            for (int k = 0; k < 3; ++k)
                if (t[k] < 0 || t[k] >= nv()) throw MeshError("triangle references a missing vertex");
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw MeshError("degenerate triangle");
        }
        auto edge_map = collect_edges();
        for (const auto& [key, list] : edge_map)
            if (list.size() != 2) {
                std::ostringstream os;
                os << "non-manifold edge (" << key.first << ", " << key.second << ") shared by " << list.size()
                   << " triangle(s)";
                throw MeshError(os.str());
            }
        orient(edge_map, repair_orientation);
        edge_map = collect_edges();
        build_edges(edge_map);
        build_geometry();
    }

private:
    using EdgeKey = std::pair<int, int>;
    using EdgeMap = std::map<EdgeKey, std::vector<std::pair<int, int>>>; // (triangle, local index)

    EdgeMap collect_edges() const
    {
        EdgeMap m;
        for (int t = 0; t < nt(); ++t)
            for (int k = 0; k < 3; ++k) {
                int a = triangles[t][(k + 1) % 3], b = triangles[t][(k + 2) % 3];
                m[{std::min(a, b), std::max(a, b)}].push_back({t, k});
            }
        return m;
    }

    // true if triangle t traverses a -> b
    bool traverses(int t, int a, int b) const
    {
        for (int k = 0; k < 3; ++k)
            if (triangles[t][k] == a && triangles[t][(k + 1) % 3] == b) return true;
        return false;
    }

    void orient(const EdgeMap& em, bool repair)
    {
        std::vector<std::vector<std::pair<int, EdgeKey>>> nb(nt());
        for (const auto& [key, list] : em) {
            nb[list[0].first].push_back({list[1].first, key});
            nb[list[1].first].push_back({list[0].first, key});
        }
        component.assign(nt(), -1);
        n_components = 0;
        std::vector<char> flip(nt(), 0);
        for (int seed = 0; seed < nt(); ++seed) {
            if (component[seed] >= 0) continue;
            std::queue<int> q;
            q.push(seed);
            component[seed] = n_components;
            while (!q.empty()) {
                int t = q.front();
                q.pop();
                for (auto [u, key] : nb[t]) {
                    // consistent when the two triangles traverse the shared edge oppositely
                    bool tf = traverses(t, key.first, key.second) != (flip[t] != 0);
                    if (component[u] < 0) {
                        component[u] = n_components;
                        bool uf = traverses(u, key.first, key.second);
                        flip[u] = (uf == tf) ? 1 : 0;
                        q.push(u);
                    } else {
                        bool uf = traverses(u, key.first, key.second) != (flip[u] != 0);
                        if (uf == tf) throw MeshError("surface is not orientable");
                    }
                }
            }
            ++n_components;
        }
        bool any_flip = std::any_of(flip.begin(), flip.end(), [](char c) { return c != 0; });
        if (any_flip && !repair) throw MeshError("inconsistent triangle orientation");
        for (int t = 0; t < nt(); ++t)
            if (flip[t]) std::swap(triangles[t][1], triangles[t][2]);
        // outward per component
        std::vector<double> vol(n_components, 0.0);
        for (int t = 0; t < nt(); ++t)
            vol[component[t]] += vertex(t, 0).dot(vertex(t, 1).cross(vertex(t, 2)));
        for (int t = 0; t < nt(); ++t)
            if (vol[component[t]] < 0) std::swap(triangles[t][1], triangles[t][2]);
    }

    void build_edges(const EdgeMap& em)
    {
        edges.clear();
        tri_edges.assign(nt(), {-1, -1, -1});
        tri_signs.assign(nt(), {0, 0, 0});
        for (const auto& [key, list] : em) {
            Edge e;
            e.v0 = key.first;
            e.v1 = key.second;
            int idx = static_cast<int>(edges.size());
            for (auto [t, k] : list) {
                bool plus = traverses(t, e.v0, e.v1);
                int slot = plus ? 0 : 1;
                if (e.tri[slot] >= 0) throw MeshError("inconsistent orientation at an edge");
                e.tri[slot] = t;
                e.local[slot] = k;
                tri_edges[t][k] = idx;
                tri_signs[t][k] = plus ? 1 : -1;
            }
            edges.push_back(e);
        }
    }

    void build_geometry()
    {
        normals.resize(nt());
        areas.resize(nt());
        h = 0;
        max_edge = 0;
        for (int t = 0; t < nt(); ++t) {
            Vec3 a = vertex(t, 0), b = vertex(t, 1), c = vertex(t, 2);
            Vec3 n = (b - a).cross(c - a);
            double nn = n.norm();
            if (!(nn > 0)) throw MeshError("zero-area triangle");
            areas[t] = 0.5 * nn;
            normals[t] = n / nn;
            double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
            h = std::max(h, la * lb * lc / (2.0 * areas[t]));
            max_edge = std::max({max_edge, la, lb, lc});
        }
    }
};

inline SurfaceMesh icosphere(int level, double radius = 1.0)
{
    if (level < 0 || level > 7) throw ConfigError("icosphere level must be in 0..7");
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    SurfaceMesh m;
    m.vertices = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                  {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& v : m.vertices) v.normalize();
    m.triangles = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                   {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                   {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    std::vector<int> parent;
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            int id = static_cast<int>(m.vertices.size()) - 1;
            mid[key] = id;
            return id;
        };
        std::vector<std::array<int, 3>> next;
        parent.clear();
        for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
            auto [a, b, c] = m.triangles[t];
            int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
            for (int i = 0; i < 4; ++i) parent.push_back(t);
        }
        m.triangles = std::move(next);
    }
    for (auto& v : m.vertices) v *= radius;
    m.finalize(false);
    m.level = level;
    m.parent = parent;
    return m;
}

// Two axis-aligned unit cubes, x in [-1-gap/2, -gap/2] and [gap/2, 1+gap/2], y,z in [0,1];
// each face split into divisions^2 squares of two triangles.
inline SurfaceMesh two_cubes(double gap, int divisions = 1)
{
    if (!(gap > 0)) throw ConfigError("two_cubes: gap must be positive");
    if (divisions < 1) throw ConfigError("two_cubes: divisions must be >= 1");
    SurfaceMesh m;
    const int n = divisions;
    for (int cube = 0; cube < 2; ++cube) {
        const double x0 = cube == 0 ? -1.0 - gap / 2 : gap / 2;
        std::map<std::array<int, 3>, int> ids;
        auto vid = [&](int i, int j, int k) {
            std::array<int, 3> key{i, j, k};
            auto it = ids.find(key);
            if (it != ids.end()) return it->second;
            m.vertices.push_back({x0 + double(i) / n, double(j) / n, double(k) / n});
            int id = static_cast<int>(m.vertices.size()) - 1;
            ids[key] = id;
            return id;
        };
        // faces: fixed axis, fixed value (0 or n); orientation fixed afterwards by finalize()
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side)
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) {
                        auto g = [&](int u, int v) {
                            std::array<int, 3> c{};
                            c[axis] = side * n;
                            c[(axis + 1) % 3] = u;
                            c[(axis + 2) % 3] = v;
                            return vid(c[0], c[1], c[2]);
                        };
                        int p00 = g(a, b), p10 = g(a + 1, b), p11 = g(a + 1, b + 1), p01 = g(a, b + 1);
                        if (side == 1) {
                            m.triangles.push_back({p00, p10, p11});
                            m.triangles.push_back({p00, p11, p01});
                        } else {
                            m.triangles.push_back({p00, p11, p10});
                            m.triangles.push_back({p00, p01, p11});
                        }
                    }
    }
    m.finalize(true);
    return m;
}

namespace detail {
inline std::string next_data_line(std::istream& in, int& line_no)
{
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        auto pos = line.find('#');
        if (pos != std::string::npos) line.resize(pos);
        if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    throw MeshError("unexpected end of file after line " + std::to_string(line_no));
}

inline MeshError parse_error(int line_no, const std::string& what)
{
    return MeshError("parse error at line " + std::to_string(line_no) + ": " + what);
}
} // namespace detail

inline SurfaceMesh read_off(std::istream& in)
{
    int ln = 0;
    std::string head = detail::next_data_line(in, ln);
    std::istringstream hs(head);
    std::string tag;
    hs >> tag;
    if (tag.rfind("OFF", 0) != 0) throw detail::parse_error(ln, "missing OFF header");
    int nv = -1, nf = -1, ne = 0;
    if (!(hs >> nv)) {
        std::istringstream cs(detail::next_data_line(in, ln));
        if (!(cs >> nv >> nf >> ne)) throw detail::parse_error(ln, "bad counts line");
    } else if (!(hs >> nf)) {
        throw detail::parse_error(ln, "bad counts line");
    }
    if (nv < 0 || nf < 0) throw detail::parse_error(ln, "negative counts");
    SurfaceMesh m;
    for (int i = 0; i < nv; ++i) {
        std::istringstream ls(detail::next_data_line(in, ln));
        Vec3 v;
        if (!(ls >> v.x() >> v.y() >> v.z())) throw detail::parse_error(ln, "bad vertex");
        m.vertices.push_back(v);
    }
    for (int i = 0; i < nf; ++i) {
        std::istringstream ls(detail::next_data_line(in, ln));
        int k = 0;
        std::array<int, 3> t{};
        if (!(ls >> k) || k != 3) throw detail::parse_error(ln, "only triangular faces are supported");
        if (!(ls >> t[0] >> t[1] >> t[2])) throw detail::parse_error(ln, "bad face");
        for (int j = 0; j < 3; ++j)
            if (t[j] < 0 || t[j] >= nv) throw detail::parse_error(ln, "vertex index out of range");
        m.triangles.push_back(t);
    }
    m.finalize(true);
    return m;
}

// Gmsh 2.x ASCII; keeps type-2 (triangle) elements, skips points and lines.
inline SurfaceMesh read_msh2(std::istream& in)
{
    int ln = 0;
    std::string line;
    SurfaceMesh m;
    std::map<long, int> node_index;
    bool have_nodes = false;
    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "$MeshFormat") {
            std::istringstream ls(detail::next_data_line(in, ln));
            double ver = 0;
            int ft = 0;
            if (!(ls >> ver >> ft)) throw detail::parse_error(ln, "bad $MeshFormat");
            if (ver < 2.0 || ver >= 3.0 || ft != 0) throw detail::parse_error(ln, "only msh v2 ASCII is supported");
        } else if (line == "$Nodes") {
            std::istringstream cs(detail::next_data_line(in, ln));
            long n = 0;
            if (!(cs >> n)) throw detail::parse_error(ln, "bad node count");
            for (long i = 0; i < n; ++i) {
                std::istringstream ls(detail::next_data_line(in, ln));
                long id;
                Vec3 v;
                if (!(ls >> id >> v.x() >> v.y() >> v.z())) throw detail::parse_error(ln, "bad node");
                node_index[id] = static_cast<int>(m.vertices.size());
                m.vertices.push_back(v);
            }
            have_nodes = true;
        } else if (line == "$Elements") {
            if (!have_nodes) throw detail::parse_error(ln, "$Elements before $Nodes");
            std::istringstream cs(detail::next_data_line(in, ln));
            long n = 0;
            if (!(cs >> n)) throw detail::parse_error(ln, "bad element count");
            for (long i = 0; i < n; ++i) {
                std::istringstream ls(detail::next_data_line(in, ln));
                long id;
                int type, ntags;
                if (!(ls >> id >> type >> ntags)) throw detail::parse_error(ln, "bad element");
                for (int k = 0; k < ntags; ++k) {
                    long tag;
                    if (!(ls >> tag)) throw detail::parse_error(ln, "bad element tags");
                }
                if (type == 15 || type == 1) continue;
                if (type != 2) throw detail::parse_error(ln, "unsupported element type " + std::to_string(type));
                std::array<int, 3> t{};
                for (int k = 0; k < 3; ++k) {
                    long nid;
                    if (!(ls >> nid)) throw detail::parse_error(ln, "bad triangle");
                    auto it = node_index.find(nid);
                    if (it == node_index.end()) throw detail::parse_error(ln, "unknown node " + std::to_string(nid));
                    t[k] = it->second;
                }
                m.triangles.push_back(t);
            }
        }
    }
    if (m.triangles.empty()) throw MeshError("mesh file contains no triangles");
    // drop unreferenced nodes (msh files often carry volume or geometry points)
    std::vector<int> used(m.vertices.size(), -1);
    std::vector<Vec3> verts;
    for (auto& t : m.triangles)
        for (int& v : t) {
            if (used[v] < 0) {
                used[v] = static_cast<int>(verts.size());
                verts.push_back(m.vertices[v]);
            }
            v = used[v];
        }
    m.vertices = std::move(verts);
    m.finalize(true);
    return m;
}

inline SurfaceMesh load_mesh(const std::string& path, const std::string& format = "")
{
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file " + path);
    std::string fmt = format;
    if (fmt.empty()) {
        auto dot = path.rfind('.');
        std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
        fmt = ext == "msh" ? "msh" : "off";
    }
    if (fmt == "off") return read_off(in);
    if (fmt == "msh" || fmt == "gmsh") return read_msh2(in);
    throw ConfigError("unknown mesh format '" + fmt + "'");
}

inline void write_off(std::ostream& out, const SurfaceMesh& m)
{
    out << "OFF\n" << m.nv() << ' ' << m.nt() << ' ' << m.ne() << '\n';
    out << std::setprecision(17);
    for (const auto& v : m.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : m.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void write_dof_table(std::ostream& out, const SurfaceMesh& m)
{
    out << "dof,v0,v1,tri_plus,tri_minus,length\n" << std::setprecision(17);
    for (int e = 0; e < m.ne(); ++e) {
        const auto& ed = m.edges[e];
        out << e << ',' << ed.v0 << ',' << ed.v1 << ',' << ed.tri[0] << ',' << ed.tri[1] << ',' << m.edge_length(e)
            << '\n';
    }
}

// Greedy coloring such that triangles sharing a vertex get different colors.
inline std::vector<std::vector<int>> color_triangles(const SurfaceMesh& m)
{
    std::vector<std::vector<int>> v2t(m.nv());
    for (int t = 0; t < m.nt(); ++t)
        for (int v : m.triangles[t]) v2t[v].push_back(t);
    std::vector<int> color(m.nt(), -1);
    int ncol = 0;
    for (int t = 0; t < m.nt(); ++t) {
        std::vector<char> used(ncol + 1, 0);
        for (int v : m.triangles[t])
            for (int u : v2t[v])
                if (color[u] >= 0) used[color[u]] = 1;
        int c = 0;
        while (used[c]) ++c;
        color[t] = c;
        ncol = std::max(ncol, c + 1);
    }
    std::vector<std::vector<int>> out(ncol);
    for (int t = 0; t < m.nt(); ++t) out[color[t]].push_back(t);
    return out;
}

} // namespace dcq
