#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "rtn/cloud.hpp"

using namespace rtn;

namespace {

PointCloud random_cloud(Rng& rng, int n, double scale = 1.0) {
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        c.points.emplace_back(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                              rng.uniform(-scale, scale));
    }
    return c;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("centralize") {
    PointCloud c;
    c.points = {{1, 1, 1}, {3, 1, 1}};
    const PointCloud out = centralize(c);
    CHECK((out.points[0] - Vec3(-1, 0, 0)).norm() < 1e-15);
    CHECK((out.points[1] - Vec3(1, 0, 0)).norm() < 1e-15);

    Rng rng(1);
    const PointCloud r = centralize(random_cloud(rng, 100));
    Vec3 sum = Vec3::Zero();
    for (const Vec3& p : r.points) sum += p;
    CHECK((sum / 100.0).norm() < 1e-12);

    const PointCloud again = centralize(r);
    for (size_t i = 0; i < r.size(); ++i) CHECK((again.points[i] - r.points[i]).norm() < 1e-12);
}

TEST_CASE("normalize_unit_sphere") {
    PointCloud c;
    c.points = {{0, 0, 2}, {0, 0, -2}};
    const PointCloud out = normalize_unit_sphere(c);
    CHECK((out.points[0] - Vec3(0, 0, 1)).norm() < 1e-15);
    CHECK((out.points[1] - Vec3(0, 0, -1)).norm() < 1e-15);

    Rng rng(2);
    const PointCloud r = centralize(random_cloud(rng, 64, 3.0));
    const PointCloud n = normalize_unit_sphere(r);
    double max_norm = 0.0;
    for (const Vec3& p : n.points) max_norm = std::max(max_norm, p.norm());
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
    // similarity transform: distance ratios preserved
    const double ratio = (n.points[1] - n.points[0]).norm() / (r.points[1] - r.points[0]).norm();
    for (size_t i = 0; i < r.size(); ++i) {
        for (size_t j = i + 1; j < r.size(); ++j) {
            const double d0 = (r.points[j] - r.points[i]).norm();
            const double d1 = (n.points[j] - n.points[i]).norm();
            CHECK(std::abs(d1 - ratio * d0) < 1e-12);
        }
    }

    PointCloud zero;
    zero.points = {{0, 0, 0}};
    CHECK_THROWS_AS(normalize_unit_sphere(zero), std::invalid_argument);
}

TEST_CASE("farthest point sampling on the unit cube") {
    PointCloud cube;
    for (int x : {0, 1}) {
        for (int y : {0, 1}) {
            for (int z : {0, 1}) cube.points.emplace_back(x, y, z);
        }
    }
    // all corners are equidistant from the centroid: tie rule picks index 0,
    // and the farthest point from corner 0 is the opposite corner 7
    const std::vector<int> idx = farthest_point_sampling(cube, 2);
    CHECK(idx[0] == 0);
    CHECK(idx[1] == 7);

    // brute-force max-min oracle for the second pick
    double best = -1.0;
    int best_j = -1;
    for (int j = 0; j < 8; ++j) {
        const double d = (cube.points[static_cast<size_t>(j)] - cube.points[0]).squaredNorm();
        if (d > best) {
            best = d;
            best_j = j;
        }
    }
    CHECK(best_j == idx[1]);

    // m = n covers all indices
    const std::vector<int> all = farthest_point_sampling(cube, 8);
    CHECK(std::set<int>(all.begin(), all.end()).size() == 8);

    CHECK_THROWS_AS(farthest_point_sampling(cube, 9), std::invalid_argument);
}

TEST_CASE("fps spreads better than random subsets") {
    Rng rng(5);
    const PointCloud c = random_cloud(rng, 64);
    const int m = 8;
    auto min_pairwise = [&](const std::vector<int>& sel) {
        double best = 1e300;
        for (size_t i = 0; i < sel.size(); ++i) {
            for (size_t j = i + 1; j < sel.size(); ++j) {
                best = std::min(best, (c.points[static_cast<size_t>(sel[i])] -
                                       c.points[static_cast<size_t>(sel[j])])
                                          .norm());
            }
        }
        return best;
    };
    const double fps_spread = min_pairwise(farthest_point_sampling(c, m));
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> sel;
        std::set<int> used;
        while (static_cast<int>(sel.size()) < m) {
            const int i = static_cast<int>(rng.below(64));
            if (used.insert(i).second) sel.push_back(i);
        }
        CHECK(fps_spread >= min_pairwise(sel));
    }
}

TEST_CASE("fps determinism") {
    Rng rng(6);
    const PointCloud c = random_cloud(rng, 128);
    CHECK(farthest_point_sampling(c, 16) == farthest_point_sampling(c, 16));
}

TEST_CASE("knn tie rule and exactness") {
    PointCloud collinear;
    collinear.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    const NeighborTable t = knn(collinear, 1);
    CHECK(t.indices[1][0] == 0);  // both endpoints at distance 1, smaller index wins

    const NeighborTable full = knn(collinear, 2);
    CHECK(full.indices[0] == std::vector<int>{1, 2});
    CHECK(full.indices[2] == std::vector<int>{1, 0});

    CHECK_THROWS_AS(knn(collinear, 3), std::invalid_argument);
}

TEST_CASE("knn matches exhaustive-sort oracle") {
    Rng rng(7);
    for (int n : {64, 256}) {
        const PointCloud c = random_cloud(rng, n);
        const int k = 9;
        const NeighborTable t = knn(c, k);
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<double, int>> all;
            for (int j = 0; j < n; ++j) {
                if (j != i) {
                    all.emplace_back((c.points[static_cast<size_t>(i)] -
                                      c.points[static_cast<size_t>(j)])
                                         .squaredNorm(),
                                     j);
                }
            }
            std::sort(all.begin(), all.end());
            for (int e = 0; e < k; ++e) {
                CHECK(t.indices[static_cast<size_t>(i)][static_cast<size_t>(e)] ==
                      all[static_cast<size_t>(e)].second);
            }
        }
    }
}

TEST_CASE("chamfer distance definition") {
    PointCloud a, b;
    a.points = {{0, 0, 0}};
    b.points = {{1, 0, 0}};
    CHECK(chamfer_distance(a, a) == 0.0);
    CHECK(chamfer_distance(a, b) == doctest::Approx(2.0));
    CHECK(chamfer_distance(b, a) == doctest::Approx(2.0));

    PointCloud empty;
    CHECK_THROWS_AS(chamfer_distance(a, empty), std::invalid_argument);
}

TEST_CASE("chamfer matches double-loop oracle on random clouds") {
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const PointCloud a = random_cloud(rng, 32 + trial);
        const PointCloud b = random_cloud(rng, 64 - trial);
        double d_ab = 0.0, d_ba = 0.0;
        for (const Vec3& p : a.points) {
            double best = 1e300;
            for (const Vec3& q : b.points) best = std::min(best, (p - q).norm());
            d_ab += best;
        }
        for (const Vec3& q : b.points) {
            double best = 1e300;
            for (const Vec3& p : a.points) best = std::min(best, (q - p).norm());
            d_ba += best;
        }
        const double oracle = d_ab / a.size() + d_ba / b.size();
        CHECK(std::abs(chamfer_distance(a, b) - oracle) < 1e-12);
        CHECK(chamfer_distance(a, b) == chamfer_distance(b, a));
    }
}

TEST_CASE("chamfer is invariant under simultaneous rotation") {
    Rng rng(9);
    const PointCloud a = random_cloud(rng, 48);
    const PointCloud b = random_cloud(rng, 48);
    const double base = chamfer_distance(a, b);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat3 r = random_rotation_haar(rng);
        CHECK(std::abs(chamfer_distance(apply_rotation(r, a), apply_rotation(r, b)) - base) <
              1e-9);
    }
}

TEST_CASE("xyz roundtrip is bitwise exact") {
    Rng rng(10);
    const PointCloud c = random_cloud(rng, 50);
    const auto path = temp_file("rtn_test_roundtrip.xyz");
    write_cloud(c, path.string());
    const PointCloud back = read_cloud(path.string(), CloudFormat::XYZ);
    REQUIRE(back.size() == c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        CHECK(back.points[i].x() == c.points[i].x());
        CHECK(back.points[i].y() == c.points[i].y());
        CHECK(back.points[i].z() == c.points[i].z());
    }
    std::filesystem::remove(path);
}

TEST_CASE("xyz parsing") {
    const auto path = temp_file("rtn_test_parse.xyz");
    {
        std::ofstream out(path);
        out << "# comment line\n1.0 2.0 3.0\n\n4 5 6 # trailing comment\n";
    }
    const PointCloud c = read_cloud(path.string(), CloudFormat::XYZ);
    REQUIRE(c.size() == 2);
    CHECK(c.points[0] == Vec3(1, 2, 3));
    CHECK(c.points[1] == Vec3(4, 5, 6));

    {
        std::ofstream out(path);
        out << "1.0 2.0\n";
    }
    CHECK_THROWS_WITH_AS(read_cloud(path.string(), CloudFormat::XYZ),
                         doctest::Contains(":1:"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("off reader takes vertices and ignores faces") {
    const auto path = temp_file("rtn_test_cube.off");
    {
        std::ofstream out(path);
        out << "OFF\n8 6 0\n";
        for (int x : {0, 1}) {
            for (int y : {0, 1}) {
                for (int z : {0, 1}) out << x << " " << y << " " << z << "\n";
            }
        }
        out << "4 0 1 3 2\n4 4 5 7 6\n4 0 1 5 4\n4 2 3 7 6\n4 0 2 6 4\n4 1 3 7 5\n";
    }
    const PointCloud c = read_cloud(path.string());
    CHECK(c.size() == 8);
    CHECK(c.points[7] == Vec3(1, 1, 1));
    std::filesystem::remove(path);
}

TEST_CASE("unknown format rejected") {
    CHECK_THROWS_AS(read_cloud("foo.ply"), std::invalid_argument);
}
