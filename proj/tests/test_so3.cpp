#include <doctest.h>

#include <cmath>

#include "rtn/so3.hpp"

using namespace rtn;

namespace {

double max_abs_diff(const Mat3& a, const Mat3& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("euler_to_matrix basic cases") {
    CHECK(max_abs_diff(euler_to_matrix({0, 0, 0}), Mat3::Identity()) < 1e-15);

    Mat3 rz90;
    rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK(max_abs_diff(euler_to_matrix({kPi / 2, 0, 0}), rz90) < 1e-12);

    // hand-multiplied Ry(pi/2) * Rz(pi/2), cross-checked against the
    // matrix-product oracle below
    Mat3 expected;
    expected << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    CHECK(max_abs_diff(euler_to_matrix({kPi / 2, kPi / 2, 0}), expected) < 1e-12);
    CHECK(max_abs_diff(rot_y(kPi / 2) * rot_z(kPi / 2), expected) < 1e-12);
}

TEST_CASE("composition consistency over random triples") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const EulerZYZ e = random_euler_uniform(rng);
        const Mat3 composed = euler_to_matrix({0, 0, e.gamma}) *
                              euler_to_matrix({0, e.beta, 0}) *
                              euler_to_matrix({e.alpha, 0, 0});
        CHECK(max_abs_diff(euler_to_matrix(e), composed) < 1e-12);
    }
}

TEST_CASE("matrix_to_euler basic cases") {
    EulerZYZ e = matrix_to_euler(Mat3::Identity());
    CHECK(e.alpha == 0.0);
    CHECK(e.beta == 0.0);
    CHECK(e.gamma == 0.0);

    Mat3 ry90;
    ry90 << 0, 0, 1, 0, 1, 0, -1, 0, 0;
    e = matrix_to_euler(ry90);
    CHECK(e.alpha == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e.beta == doctest::Approx(kPi / 2));
    CHECK(e.gamma == doctest::Approx(0.0).epsilon(1e-12));

    Mat3 m;
    m << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    e = matrix_to_euler(m);
    CHECK(e.alpha == doctest::Approx(kPi / 2));
    CHECK(e.beta == doctest::Approx(kPi / 2));
    CHECK(e.gamma == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("matrix_to_euler rejects non-rotations") {
    Mat3 bad = Mat3::Identity() * 2.0;
    CHECK_THROWS_AS(matrix_to_euler(bad), std::invalid_argument);
    bad = Mat3::Identity();
    bad(0, 0) = -1;  // det = -1 reflection
    CHECK_THROWS_AS(matrix_to_euler(bad), std::invalid_argument);
}

TEST_CASE("roundtrip over Haar-random rotations") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 r = random_rotation_haar(rng);
        CHECK(is_rotation_matrix(r));
        const Mat3 back = euler_to_matrix(matrix_to_euler(r));
        CHECK(max_abs_diff(r, back) < 1e-9);
    }
}

TEST_CASE("gimbal canonicalization at the poles") {
    for (double beta : {0.0, 1e-10, kPi, kPi - 1e-10}) {
        const Mat3 r = euler_to_matrix({1.3, beta, 0.0});
        const EulerZYZ e = matrix_to_euler(r);
        CHECK(e.gamma == 0.0);
        CHECK(max_abs_diff(euler_to_matrix(e), r) < 1e-9);
    }
    // gamma folded into alpha at beta = 0
    const EulerZYZ e = matrix_to_euler(rot_z(1.0) * rot_z(0.5));
    CHECK(e.alpha == doctest::Approx(1.5));
    CHECK(e.gamma == 0.0);
}

TEST_CASE("inverse is transpose") {
    CHECK(max_abs_diff(inverse(Mat3::Identity()), Mat3::Identity()) == 0.0);
    Mat3 expected;
    expected << 0, 1, 0, -1, 0, 0, 0, 0, 1;
    CHECK(max_abs_diff(inverse(rot_z(kPi / 2)), expected) < 1e-12);
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 r = random_rotation_haar(rng);
        CHECK(max_abs_diff(r * inverse(r), Mat3::Identity()) < 1e-12);
    }
}

TEST_CASE("geodesic distance") {
    Rng rng(17);
    const Mat3 r = random_rotation_haar(rng);
    CHECK(geodesic_distance(r, r) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(geodesic_distance(Mat3::Identity(), rot_z(kPi)) == doctest::Approx(kPi));
    CHECK(geodesic_distance(Mat3::Identity(), rot_z(kPi / 6)) == doctest::Approx(kPi / 6));
    const Mat3 r2 = random_rotation_haar(rng);
    CHECK(geodesic_distance(r, r2) == doctest::Approx(geodesic_distance(r2, r)));
}

TEST_CASE("haar sampling statistics") {
    // E[trace] = 0 under Haar measure
    Rng rng(19);
    double mean_tr = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) mean_tr += random_rotation_haar(rng).trace();
    mean_tr /= n;
    CHECK(std::abs(mean_tr) < 0.02);
}

TEST_CASE("euler-uniform sampling matches Haar trace statistics") {
    Rng rng(23);
    double mean_tr = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) mean_tr += euler_to_matrix(random_euler_uniform(rng)).trace();
    mean_tr /= n;
    CHECK(std::abs(mean_tr) < 0.02);
}

TEST_CASE("rotate_points") {
    PointList c = {{1, 0, 0}};
    PointList r = rotate_points(rot_z(kPi / 2), c);
    CHECK(r[0].x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r[0].y() == doctest::Approx(1.0));

    // isometry: pairwise distances preserved
    Rng rng(29);
    PointList cloud;
    for (int i = 0; i < 32; ++i) {
        cloud.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
    const Mat3 rot = random_rotation_haar(rng);
    const PointList rotated = rotate_points(rot, cloud);
    CHECK(rotated.size() == cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        for (size_t j = i + 1; j < cloud.size(); ++j) {
            CHECK(std::abs((cloud[i] - cloud[j]).norm() -
                           (rotated[i] - rotated[j]).norm()) < 1e-9);
        }
    }
    const PointList same = rotate_points(Mat3::Identity(), cloud);
    for (size_t i = 0; i < cloud.size(); ++i) CHECK((same[i] - cloud[i]).norm() == 0.0);
}

TEST_CASE("rng determinism") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}
