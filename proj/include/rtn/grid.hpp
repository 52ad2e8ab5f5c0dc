#pragma once

#include <string>
#include <vector>

#include "rtn/so3.hpp"

namespace rtn {

using ClassId = int;

// Finite rotation codebook with interval theta = pi/k.
//
// alpha in [0, 2*pi) gets n1 = 2k bins; (beta, gamma) are discretized
// jointly as directions on the sphere: one cell at each pole plus k-1
// rings of 2k azimuthal bins, n2 = (k-1)*2k + 2 cells total.
//
// Class layout is fixed (checkpoints and label files depend on it):
//   id = a * n2 + s, alpha = a * theta,
//   s = 0 north pole, s = 1 + (r-1)*2k + j for beta = r*theta and
//   gamma = j*theta, s = n2-1 south pole.
class DiscretizationGrid {
public:
    // theta must equal pi/k for an integer k >= 2.
    static DiscretizationGrid from_theta(double theta);
    static DiscretizationGrid from_k(int k);

    double theta() const { return theta_; }
    int k() const { return k_; }
    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int n() const { return n1_ * n2_; }

    const std::vector<Vec3>& sphere_dirs() const { return sphere_dirs_; }

    EulerZYZ class_to_euler(ClassId c) const;
    Mat3 class_to_matrix(ClassId c) const;

    // Nearest class: alpha snapped to the closest multiple of theta
    // (exact ties -> smaller bin), (beta, gamma) snapped to the sphere
    // direction with the largest dot product (ties -> smaller index).
    ClassId quantize(const EulerZYZ& e) const;
    ClassId quantize(const Mat3& r) const;

    // {"theta":..., "k":..., "n1":..., "n2":..., "n":...}
    std::string describe_json() const;

private:
    DiscretizationGrid() = default;

    double theta_ = 0.0;
    int k_ = 0;
    int n1_ = 0;
    int n2_ = 0;
    std::vector<Vec3> sphere_dirs_;
    std::vector<EulerZYZ> representatives_;  // indexed by class id
};

}  // namespace rtn
