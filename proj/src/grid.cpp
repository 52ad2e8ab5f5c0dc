#include "rtn/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rtn {

DiscretizationGrid DiscretizationGrid::from_theta(double theta) {
    if (!(theta > 0.0)) {
        throw std::invalid_argument("grid: theta must be positive");
    }
    const double k_real = kPi / theta;
    const int k = static_cast<int>(std::lround(k_real));
    if (k < 2 || std::abs(k_real - k) > 1e-9) {
        throw std::invalid_argument("grid: theta must equal pi/k for integer k >= 2");
    }
    return from_k(k);
}

DiscretizationGrid DiscretizationGrid::from_k(int k) {
    if (k < 2) throw std::invalid_argument("grid: k must be >= 2");
    DiscretizationGrid g;
    g.k_ = k;
    g.theta_ = kPi / k;
    g.n1_ = 2 * k;
    g.n2_ = (k - 1) * 2 * k + 2;

    g.sphere_dirs_.reserve(g.n2_);
    g.sphere_dirs_.emplace_back(0.0, 0.0, 1.0);  // north pole
    for (int r = 1; r <= k - 1; ++r) {
        const double beta = r * g.theta_;
        const double sb = std::sin(beta), cb = std::cos(beta);
        for (int j = 0; j < 2 * k; ++j) {
            const double gamma = j * g.theta_;
            g.sphere_dirs_.emplace_back(sb * std::cos(gamma), sb * std::sin(gamma), cb);
        }
    }
    g.sphere_dirs_.emplace_back(0.0, 0.0, -1.0);  // south pole

    g.representatives_.reserve(static_cast<size_t>(g.n()));
    for (int a = 0; a < g.n1_; ++a) {
        const double alpha = a * g.theta_;
        for (int s = 0; s < g.n2_; ++s) {
            EulerZYZ e;
            e.alpha = alpha;
            if (s == 0) {
                e.beta = 0.0;
            } else if (s == g.n2_ - 1) {
                e.beta = kPi;
            } else {
                const int r = 1 + (s - 1) / (2 * k);
                const int j = (s - 1) % (2 * k);
                e.beta = r * g.theta_;
                e.gamma = j * g.theta_;
            }
            g.representatives_.push_back(e);
        }
    }
    return g;
}

EulerZYZ DiscretizationGrid::class_to_euler(ClassId c) const {
    if (c < 0 || c >= n()) throw std::out_of_range("grid: class id out of range");
    return representatives_[static_cast<size_t>(c)];
}

Mat3 DiscretizationGrid::class_to_matrix(ClassId c) const {
    return euler_to_matrix(class_to_euler(c));
}

ClassId DiscretizationGrid::quantize(const EulerZYZ& e) const {
    // alpha bin; an exact half-step tie goes to the smaller bin.
    const double t = e.alpha / theta_;
    double lo = std::floor(t);
    const double frac = t - lo;
    int a = static_cast<int>(lo) + (frac > 0.5 ? 1 : 0);
    a %= n1_;
    if (a < 0) a += n1_;

    const double sb = std::sin(e.beta);
    const Vec3 dir(sb * std::cos(e.gamma), sb * std::sin(e.gamma), std::cos(e.beta));
    int best = 0;
    double best_dot = sphere_dirs_[0].dot(dir);
    for (int s = 1; s < n2_; ++s) {
        const double d = sphere_dirs_[static_cast<size_t>(s)].dot(dir);
        if (d > best_dot) {
            best_dot = d;
            best = s;
        }
    }
    return a * n2_ + best;
}

ClassId DiscretizationGrid::quantize(const Mat3& r) const {
    return quantize(matrix_to_euler(r));
}

std::string DiscretizationGrid::describe_json() const {
    nlohmann::ordered_json j;
    j["theta"] = theta_;
    j["k"] = k_;
    j["n1"] = n1_;
    j["n2"] = n2_;
    j["n"] = n();
    return j.dump();
}

}  // namespace rtn
