#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace rtn {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Z-Y-Z Euler angles: R = Rz(gamma) * Ry(beta) * Rz(alpha).
// alpha, gamma in [0, 2*pi), beta in [0, pi]; gamma = 0 at beta in {0, pi}.
struct EulerZYZ {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

// Deterministic RNG used everywhere randomness is needed. Wraps mt19937_64
// with explicit uniform/gaussian helpers so sampling never depends on
// implementation-defined library distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }
    // standard normal, Box-Muller
    double gaussian();

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

bool is_rotation_matrix(const Mat3& m, double tol = 1e-9);

Mat3 rot_z(double angle);
Mat3 rot_y(double angle);

Mat3 euler_to_matrix(const EulerZYZ& e);

// Inverse of euler_to_matrix with a canonical gimbal form: when
// |sin(beta)| < 1e-9 the whole Z-rotation is folded into alpha and
// gamma is exactly 0. Throws std::invalid_argument for non-rotations.
EulerZYZ matrix_to_euler(const Mat3& r);

inline Mat3 inverse(const Mat3& r) { return r.transpose(); }

// Angle of the relative rotation, in [0, pi].
double geodesic_distance(const Mat3& r1, const Mat3& r2);

// Haar-uniform rotation via normalized quaternion.
Mat3 random_rotation_haar(Rng& rng);

// alpha, gamma uniform on [0, 2*pi); beta with density sin(beta)/2,
// which makes this equal to Haar measure in the ZYZ parameterization.
EulerZYZ random_euler_uniform(Rng& rng);

using PointList = std::vector<Vec3>;

PointList rotate_points(const Mat3& r, const PointList& pts);

}  // namespace rtn
