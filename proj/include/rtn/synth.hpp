#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtn/cloud.hpp"
#include "rtn/grid.hpp"

namespace rtn {

// Families of procedurally generated aligned shapes. Canonical pose:
// longest extent along +Z, secondary along +X. Every shape carries a
// small interior marker cluster placed off all symmetry axes so that no
// family has a nontrivial rotational symmetry (rotation labels would be
// ambiguous otherwise).
extern const std::vector<std::string> kShapeFamilies;

bool is_shape_family(const std::string& name);

// Raw generator output: surface points first, marker points last,
// before centering/normalization. dims_out (optional) receives the
// sampled dimensions, family specific.
PointCloud make_shape_raw(const std::string& family, int n_points,
                          std::uint64_t seed, std::vector<double>* dims_out = nullptr,
                          int* n_surface_out = nullptr);

// Centered and unit-sphere normalized, canonical pose, deterministic per
// (family, n_points, seed).
PointCloud make_shape(const std::string& family, int n_points, std::uint64_t seed);

enum class RdfMode { SO0, SO1, SO3 };
std::string rdf_mode_name(RdfMode m);
RdfMode rdf_mode_from_name(const std::string& s);

struct RdfSample {
    PointCloud cloud;
    int family_label = 0;
    int source_cloud_id = 0;
};

// Shapes are identical across modes for the same (families, counts,
// seed); only the applied rotation differs. SO0: canonical pose.
// SO1: uniform rotation about world Z. SO3: Haar-uniform rotation.
std::vector<RdfSample> build_rdf_dataset(const std::vector<std::string>& families,
                                         int per_family, int n_points, RdfMode mode,
                                         std::uint64_t seed);

enum class RotationMode { GridExact, HaarQuantized };
std::string rotation_mode_name(RotationMode m);
RotationMode rotation_mode_from_name(const std::string& s);

struct LabeledSample {
    PointCloud cloud;  // rotated (and optionally jittered) copy
    ClassId label = 0;
    Mat3 truth_rotation = Mat3::Identity();
    std::string family;
    int source_cloud_id = 0;
};

struct RotationDataset {
    std::vector<LabeledSample> samples;
    std::vector<PointCloud> sources;  // aligned originals, indexed by source_cloud_id
    std::vector<std::string> source_family;
    int grid_k = 0;
};

// GridExact draws a class uniformly and applies its exact representative;
// HaarQuantized draws a Haar rotation and labels it with quantize().
// jitter_sigma > 0 adds per-coordinate Gaussian noise after rotation.
RotationDataset build_rotation_dataset(const std::vector<std::string>& families,
                                       int per_family, int rotations_per_shape,
                                       int n_points, const DiscretizationGrid& grid,
                                       RotationMode mode, double jitter_sigma,
                                       std::uint64_t seed);

// Clouds as XYZ files plus a JSON-lines manifest (one record per sample:
// cloud_path, label, alpha, beta, gamma, family, source_id, grid_theta_k).
// Aligned originals are written alongside as src_<id>.xyz.
std::string write_manifest(const RotationDataset& ds, const std::string& dir);
RotationDataset read_manifest(const std::string& manifest_path);

// Partitions source_cloud_ids, so rotated copies of one shape never
// straddle the split.
void split_by_source(const RotationDataset& ds, double test_fraction,
                     std::uint64_t seed, std::vector<int>* train_idx,
                     std::vector<int>* test_idx);

// Deterministic per-item sub-seed derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace rtn
