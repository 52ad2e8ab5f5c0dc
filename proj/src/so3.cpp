#include "rtn/so3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtn {

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

bool is_rotation_matrix(const Mat3& m, double tol) {
    if (!m.allFinite()) return false;
    const Mat3 gram = m.transpose() * m - Mat3::Identity();
    if (gram.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(m.determinant() - 1.0) <= tol;
}

Mat3 rot_z(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

Mat3 rot_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return m;
}

Mat3 euler_to_matrix(const EulerZYZ& e) {
    return rot_z(e.gamma) * rot_y(e.beta) * rot_z(e.alpha);
}

namespace {

double wrap_two_pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    return a;
}

}  // namespace

EulerZYZ matrix_to_euler(const Mat3& r) {
    if (!is_rotation_matrix(r)) {
        throw std::invalid_argument("matrix_to_euler: not a rotation matrix");
    }
    // With R = Rz(g)*Ry(b)*Rz(a):
    //   R(2,2) = cos b, R(0,2) = cos g sin b, R(1,2) = sin g sin b,
    //   R(2,0) = -sin b cos a, R(2,1) = sin b sin a.
    const double cb = std::clamp(r(2, 2), -1.0, 1.0);
    const double sb = std::sqrt(std::max(0.0, 1.0 - cb * cb));
    EulerZYZ e;
    if (sb < 1e-9) {
        if (cb > 0.0) {
            // beta = 0: R = Rz(gamma + alpha), fold everything into alpha.
            e.beta = 0.0;
            e.alpha = wrap_two_pi(std::atan2(r(1, 0), r(0, 0)));
        } else {
            // beta = pi: R = Ry(pi)*Rz(alpha - gamma) with gamma = 0.
            e.beta = kPi;
            e.alpha = wrap_two_pi(std::atan2(r(1, 0), r(1, 1)));
        }
        e.gamma = 0.0;
        return e;
    }
    e.beta = std::acos(cb);
    e.gamma = wrap_two_pi(std::atan2(r(1, 2), r(0, 2)));
    e.alpha = wrap_two_pi(std::atan2(r(2, 1), -r(2, 0)));
    return e;
}

double geodesic_distance(const Mat3& r1, const Mat3& r2) {
    const double tr = (r1.transpose() * r2).trace();
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

Mat3 random_rotation_haar(Rng& rng) {
    // Normalized 4D gaussian is uniform on S^3, hence Haar on SO(3).
    double q[4];
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& qi : q) {
            qi = rng.gaussian();
            norm2 += qi * qi;
        }
    } while (norm2 < 1e-12);
    const double inv = 1.0 / std::sqrt(norm2);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Mat3 m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

EulerZYZ random_euler_uniform(Rng& rng) {
    EulerZYZ e;
    e.alpha = rng.uniform(0.0, kTwoPi);
    e.beta = std::acos(std::clamp(1.0 - 2.0 * rng.uniform(), -1.0, 1.0));
    e.gamma = rng.uniform(0.0, kTwoPi);
    if (e.beta == 0.0 || e.beta == kPi) e.gamma = 0.0;
    return e;
}

PointList rotate_points(const Mat3& r, const PointList& pts) {
    PointList out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) out.push_back(r * p);
    return out;
}

}  // namespace rtn
