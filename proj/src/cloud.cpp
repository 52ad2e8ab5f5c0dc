#include "rtn/cloud.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rtn {

namespace {

Vec3 centroid(const PointCloud& c) {
    Vec3 sum = Vec3::Zero();
    for (const Vec3& p : c.points) sum += p;
    return sum / static_cast<double>(c.size());
}

void require_nonempty(const PointCloud& c, const char* op) {
    if (c.points.empty()) {
        throw std::invalid_argument(std::string(op) + ": empty cloud");
    }
}

}  // namespace

PointCloud centralize(const PointCloud& c) {
    require_nonempty(c, "centralize");
    const Vec3 m = centroid(c);
    PointCloud out;
    out.name = c.name;
    out.points.reserve(c.size());
    for (const Vec3& p : c.points) out.points.push_back(p - m);
    return out;
}

PointCloud normalize_unit_sphere(const PointCloud& c) {
    require_nonempty(c, "normalize_unit_sphere");
    double max_norm = 0.0;
    for (const Vec3& p : c.points) max_norm = std::max(max_norm, p.norm());
    if (max_norm <= 0.0) {
        throw std::invalid_argument("normalize_unit_sphere: degenerate all-zero cloud");
    }
    PointCloud out;
    out.name = c.name;
    out.points.reserve(c.size());
    const double inv = 1.0 / max_norm;
    for (const Vec3& p : c.points) out.points.push_back(p * inv);
    return out;
}

std::vector<int> farthest_point_sampling(const PointCloud& c, int m) {
    require_nonempty(c, "farthest_point_sampling");
    const int n = static_cast<int>(c.size());
    if (m < 1 || m > n) {
        throw std::invalid_argument("farthest_point_sampling: m out of range");
    }
    const Vec3 ctr = centroid(c);
    int first = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double d = (c.points[static_cast<size_t>(i)] - ctr).squaredNorm();
        if (d > best) {
            best = d;
            first = i;
        }
    }
    std::vector<int> picked;
    picked.reserve(static_cast<size_t>(m));
    picked.push_back(first);
    std::vector<double> min_d2(static_cast<size_t>(n),
                               std::numeric_limits<double>::infinity());
    for (int step = 1; step < m; ++step) {
        const Vec3& last = c.points[static_cast<size_t>(picked.back())];
        int next = -1;
        double next_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            double& d2 = min_d2[static_cast<size_t>(i)];
            d2 = std::min(d2, (c.points[static_cast<size_t>(i)] - last).squaredNorm());
            if (d2 > next_d2) {
                next_d2 = d2;
                next = i;
            }
        }
        picked.push_back(next);
    }
    return picked;
}

NeighborTable knn(const PointCloud& c, int k) {
    require_nonempty(c, "knn");
    const int n = static_cast<int>(c.size());
    if (k < 1 || k >= n) throw std::invalid_argument("knn: need 1 <= k < n");
    NeighborTable table;
    table.k = k;
    table.indices.resize(static_cast<size_t>(n));
    std::vector<std::pair<double, int>> dist(static_cast<size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        dist.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dist.emplace_back(
                (c.points[static_cast<size_t>(i)] - c.points[static_cast<size_t>(j)]).squaredNorm(), j);
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        auto& row = table.indices[static_cast<size_t>(i)];
        row.reserve(static_cast<size_t>(k));
        for (int t = 0; t < k; ++t) row.push_back(dist[static_cast<size_t>(t)].second);
    }
    return table;
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    require_nonempty(a, "chamfer_distance");
    require_nonempty(b, "chamfer_distance");
    auto directed_mean = [](const PointCloud& from, const PointCloud& to) {
        double sum = 0.0;
        for (const Vec3& p : from.points) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to.points) {
                best = std::min(best, (p - q).squaredNorm());
            }
            sum += std::sqrt(best);
        }
        return sum / static_cast<double>(from.size());
    };
    return directed_mean(a, b) + directed_mean(b, a);
}

namespace {

CloudFormat format_from_path(const std::string& path) {
    const auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == "xyz") return CloudFormat::XYZ;
    if (ext == "off") return CloudFormat::OFF;
    throw std::invalid_argument("read_cloud: unknown format for '" + path + "'");
}

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

bool parse_triple(const std::string& text, Vec3& out) {
    std::istringstream ss(text);
    if (!(ss >> out.x() >> out.y() >> out.z())) return false;
    return out.allFinite();
}

PointCloud read_xyz(std::istream& in, const std::string& path) {
    PointCloud c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Vec3 p;
        if (!parse_triple(line, p)) parse_fail(path, lineno, "expected 'x y z'");
        c.points.push_back(p);
    }
    if (c.points.empty()) parse_fail(path, lineno, "no points in file");
    return c;
}

PointCloud read_off(std::istream& in, const std::string& path) {
    std::string line;
    int lineno = 0;
    auto next_content_line = [&]() {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            return true;
        }
        return false;
    };
    if (!next_content_line()) parse_fail(path, lineno, "missing OFF header");
    long nv = -1, nf = 0, ne = 0;
    std::string rest;
    if (line.rfind("OFF", 0) == 0) {
        rest = line.substr(3);
    } else {
        parse_fail(path, lineno, "missing OFF keyword");
    }
    std::istringstream header(rest);
    if (!(header >> nv >> nf >> ne)) {
        // counts on their own line
        if (!next_content_line()) parse_fail(path, lineno, "missing vertex counts");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) parse_fail(path, lineno, "bad vertex counts");
    }
    if (nv < 1) parse_fail(path, lineno, "OFF file declares no vertices");
    PointCloud c;
    c.points.reserve(static_cast<size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line()) parse_fail(path, lineno, "unexpected end of vertex list");
        Vec3 p;
        if (!parse_triple(line, p)) parse_fail(path, lineno, "bad vertex line");
        c.points.push_back(p);
    }
    // faces ignored
    return c;
}

}  // namespace

PointCloud read_cloud(const std::string& path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_cloud: cannot open '" + path + "'");
    PointCloud c = format == CloudFormat::XYZ ? read_xyz(in, path) : read_off(in, path);
    c.name = path;
    return c;
}

PointCloud read_cloud(const std::string& path) {
    return read_cloud(path, format_from_path(path));
}

void write_cloud(const PointCloud& c, const std::string& path, CloudFormat format) {
    require_nonempty(c, "write_cloud");
    std::ofstream out(path, std::ios::binary);  // '\n' endings everywhere
    if (!out) throw std::runtime_error("write_cloud: cannot open '" + path + "'");
    char buf[128];
    if (format == CloudFormat::OFF) {
        out << "OFF\n" << c.size() << " 0 0\n";
    }
    for (const Vec3& p : c.points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
        out << buf;
    }
    if (!out) throw std::runtime_error("write_cloud: write failed for '" + path + "'");
}

PointCloud apply_rotation(const Mat3& r, const PointCloud& c) {
    PointCloud out;
    out.name = c.name;
    out.points = rotate_points(r, c.points);
    return out;
}

}  // namespace rtn
