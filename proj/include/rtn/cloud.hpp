#pragma once

#include <string>
#include <vector>

#include "rtn/so3.hpp"

namespace rtn {

struct PointCloud {
    PointList points;
    std::string name;

    size_t size() const { return points.size(); }
};

// Per-point exact k nearest neighbors, self excluded, ordered by
// (distance, index).
struct NeighborTable {
    int k = 0;
    std::vector<std::vector<int>> indices;
};

enum class CloudFormat { XYZ, OFF };

PointCloud centralize(const PointCloud& c);

// Uniform scaling so the farthest point sits on the unit sphere.
// Throws on a degenerate all-zero cloud.
PointCloud normalize_unit_sphere(const PointCloud& c);

// Greedy max-min selection of m indices. The first pick is the point
// farthest from the centroid; all ties go to the smaller index.
std::vector<int> farthest_point_sampling(const PointCloud& c, int m);

NeighborTable knn(const PointCloud& c, int k);

// Sum of the two directed mean nearest-neighbor distances (Euclidean,
// not squared, no 1/2 factor).
double chamfer_distance(const PointCloud& a, const PointCloud& b);

PointCloud read_cloud(const std::string& path, CloudFormat format);
PointCloud read_cloud(const std::string& path);  // format from extension
void write_cloud(const PointCloud& c, const std::string& path,
                 CloudFormat format = CloudFormat::XYZ);

PointCloud apply_rotation(const Mat3& r, const PointCloud& c);

}  // namespace rtn
