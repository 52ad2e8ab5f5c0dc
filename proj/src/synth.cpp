#include "rtn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace rtn {

const std::vector<std::string> kShapeFamilies = {
    "box", "cylinder", "cone", "ellipsoid", "lbracket", "pyramid", "cross", "tube"};

bool is_shape_family(const std::string& name) {
    return std::find(kShapeFamilies.begin(), kShapeFamilies.end(), name) !=
           kShapeFamilies.end();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    // splitmix64-style finalizer over the combined words
    std::uint64_t x = a * 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL +
                      c * 0x94d049bb133111ebULL + 0x2545f4914f6cdd1dULL;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

namespace {

// --- surface patch samplers -----------------------------------------------

Vec3 sample_box_face(Rng& rng, const Vec3& half, int face) {
    // face 0..5: +x,-x,+y,-y,+z,-z
    const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
    switch (face) {
        case 0: return {half.x(), u * half.y(), v * half.z()};
        case 1: return {-half.x(), u * half.y(), v * half.z()};
        case 2: return {u * half.x(), half.y(), v * half.z()};
        case 3: return {u * half.x(), -half.y(), v * half.z()};
        case 4: return {u * half.x(), v * half.y(), half.z()};
        default: return {u * half.x(), v * half.y(), -half.z()};
    }
}

// area-weighted face choice for an axis-aligned box centered at `center`
Vec3 sample_box_surface(Rng& rng, const Vec3& center, const Vec3& half) {
    const double ax = half.y() * half.z();
    const double ay = half.x() * half.z();
    const double az = half.x() * half.y();
    const double total = 2.0 * (ax + ay + az);
    double pick = rng.uniform() * total;
    int face = 0;
    const double areas[6] = {ax, ax, ay, ay, az, az};
    for (int f = 0; f < 6; ++f) {
        if (pick < areas[f] || f == 5) {
            face = f;
            break;
        }
        pick -= areas[f];
    }
    return center + sample_box_face(rng, half, face);
}

Vec3 sample_disk(Rng& rng, double r_in, double r_out, double z) {
    const double r = std::sqrt(rng.uniform(r_in * r_in, r_out * r_out));
    const double phi = rng.uniform(0.0, kTwoPi);
    return {r * std::cos(phi), r * std::sin(phi), z};
}

Vec3 sample_cylinder_side(Rng& rng, double r, double h0, double h1) {
    const double phi = rng.uniform(0.0, kTwoPi);
    return {r * std::cos(phi), r * std::sin(phi), rng.uniform(h0, h1)};
}

Vec3 sample_sphere_surface(Rng& rng, const Vec3& center, double radius) {
    Vec3 d;
    double n2 = 0.0;
    do {
        d = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
        n2 = d.squaredNorm();
    } while (n2 < 1e-12);
    return center + d * (radius / std::sqrt(n2));
}

// --- family generators ------------------------------------------------------

PointList gen_box(Rng& rng, int n, std::vector<double>& dims) {
    const double lx = rng.uniform(1.0, 1.2);
    const double ly = rng.uniform(0.7, 0.9);
    const double lz = rng.uniform(1.5, 1.8);
    dims = {lx, ly, lz};
    const Vec3 half(lx / 2, ly / 2, lz / 2);
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pts.push_back(sample_box_surface(rng, Vec3::Zero(), half));
    return pts;
}

PointList gen_cylinder(Rng& rng, int n, std::vector<double>& dims) {
    const double r = rng.uniform(0.35, 0.45);
    const double h = rng.uniform(1.5, 1.8);
    dims = {r, h};
    const double a_side = kTwoPi * r * h;
    const double a_cap = kPi * r * r;
    const double total = a_side + 2.0 * a_cap;
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        if (pick < a_side) {
            pts.push_back(sample_cylinder_side(rng, r, -h / 2, h / 2));
        } else if (pick < a_side + a_cap) {
            pts.push_back(sample_disk(rng, 0.0, r, h / 2));
        } else {
            pts.push_back(sample_disk(rng, 0.0, r, -h / 2));
        }
    }
    return pts;
}

PointList gen_cone(Rng& rng, int n, std::vector<double>& dims) {
    const double r = rng.uniform(0.5, 0.6);
    const double h = rng.uniform(1.4, 1.7);
    dims = {r, h};
    // apex at +h/2, base disk at -h/2
    const double slant = std::sqrt(r * r + h * h);
    const double a_lat = kPi * r * slant;
    const double a_base = kPi * r * r;
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() * (a_lat + a_base) < a_lat) {
            // distance from apex along the slant has density ~ l
            const double t = std::sqrt(rng.uniform());  // fraction of slant
            const double phi = rng.uniform(0.0, kTwoPi);
            const double rr = r * t;
            pts.emplace_back(rr * std::cos(phi), rr * std::sin(phi), h / 2 - t * h);
        } else {
            pts.push_back(sample_disk(rng, 0.0, r, -h / 2));
        }
    }
    return pts;
}

PointList gen_ellipsoid(Rng& rng, int n, std::vector<double>& dims) {
    const double a = rng.uniform(0.55, 0.65);
    const double b = rng.uniform(0.38, 0.46);
    const double c = rng.uniform(0.9, 1.1);
    dims = {a, b, c};
    // rejection against the area distortion of the unit-sphere map
    const double gmax = std::max({b * c, a * c, a * b});
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    while (static_cast<int>(pts.size()) < n) {
        const Vec3 d = sample_sphere_surface(rng, Vec3::Zero(), 1.0);
        const double g = std::sqrt(b * c * d.x() * (b * c * d.x()) +
                                   a * c * d.y() * (a * c * d.y()) +
                                   a * b * d.z() * (a * b * d.z()));
        if (rng.uniform() * gmax <= g) {
            pts.emplace_back(a * d.x(), b * d.y(), c * d.z());
        }
    }
    return pts;
}

PointList gen_lbracket(Rng& rng, int n, std::vector<double>& dims) {
    const double t = rng.uniform(0.35, 0.45);   // arm thickness
    const double lz = rng.uniform(1.4, 1.7);    // vertical arm length
    const double lx = rng.uniform(0.9, 1.1);    // foot length along +x
    dims = {t, lz, lx};
    // vertical arm spans z in [0, lz]; foot spans x in [0, lx] at the bottom
    const Vec3 half_v(t / 2, t / 2, lz / 2);
    const Vec3 c_v(0, 0, lz / 2);
    const Vec3 half_f(lx / 2, t / 2, t / 2);
    const Vec3 c_f(lx / 2, 0, t / 2);
    const double a_v = 8.0 * (half_v.y() * half_v.z() + half_v.x() * half_v.z() +
                              half_v.x() * half_v.y());
    const double a_f = 8.0 * (half_f.y() * half_f.z() + half_f.x() * half_f.z() +
                              half_f.x() * half_f.y());
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() * (a_v + a_f) < a_v) {
            pts.push_back(sample_box_surface(rng, c_v, half_v));
        } else {
            pts.push_back(sample_box_surface(rng, c_f, half_f));
        }
    }
    return pts;
}

PointList gen_pyramid(Rng& rng, int n, std::vector<double>& dims) {
    const double s = rng.uniform(0.9, 1.1);  // base side
    const double h = rng.uniform(1.3, 1.6);
    dims = {s, h};
    // base square at z = -h/2, apex at (0, 0, h/2)
    const Vec3 apex(0, 0, h / 2);
    const Vec3 corners[4] = {{s / 2, s / 2, -h / 2},
                             {-s / 2, s / 2, -h / 2},
                             {-s / 2, -s / 2, -h / 2},
                             {s / 2, -s / 2, -h / 2}};
    auto tri_area = [](const Vec3& p, const Vec3& q, const Vec3& r) {
        return 0.5 * (q - p).cross(r - p).norm();
    };
    double areas[5];
    areas[0] = s * s;  // base
    double total = areas[0];
    for (int f = 0; f < 4; ++f) {
        areas[f + 1] = tri_area(corners[f], corners[(f + 1) % 4], apex);
        total += areas[f + 1];
    }
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double pick = rng.uniform() * total;
        int f = 0;
        while (f < 4 && pick >= areas[f]) {
            pick -= areas[f];
            ++f;
        }
        if (f == 0) {
            pts.emplace_back(rng.uniform(-s / 2, s / 2), rng.uniform(-s / 2, s / 2), -h / 2);
        } else {
            double u = rng.uniform(), v = rng.uniform();
            if (u + v > 1.0) {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            const Vec3& p = corners[f - 1];
            const Vec3& q = corners[f % 4];
            pts.push_back(p + u * (q - p) + v * (apex - p));
        }
    }
    return pts;
}

PointList gen_cross(Rng& rng, int n, std::vector<double>& dims) {
    const double t = rng.uniform(0.28, 0.34);  // arm thickness
    const double lx = rng.uniform(1.1, 1.3);
    const double ly = rng.uniform(0.8, 1.0);
    const double lz = rng.uniform(1.5, 1.8);
    dims = {t, lx, ly, lz};
    const Vec3 halves[3] = {{lx / 2, t / 2, t / 2}, {t / 2, ly / 2, t / 2}, {t / 2, t / 2, lz / 2}};
    double areas[3];
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
        areas[a] = 8.0 * (halves[a].y() * halves[a].z() + halves[a].x() * halves[a].z() +
                          halves[a].x() * halves[a].y());
        total += areas[a];
    }
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double pick = rng.uniform() * total;
        int a = 0;
        while (a < 2 && pick >= areas[a]) {
            pick -= areas[a];
            ++a;
        }
        pts.push_back(sample_box_surface(rng, Vec3::Zero(), halves[a]));
    }
    return pts;
}

PointList gen_tube(Rng& rng, int n, std::vector<double>& dims) {
    const double ro = rng.uniform(0.45, 0.55);
    const double ri = 0.6 * ro;
    const double h = rng.uniform(1.4, 1.7);
    dims = {ro, ri, h};
    const double a_out = kTwoPi * ro * h;
    const double a_in = kTwoPi * ri * h;
    const double a_cap = kPi * (ro * ro - ri * ri);
    const double total = a_out + a_in + 2.0 * a_cap;
    PointList pts;
    pts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double pick = rng.uniform() * total;
        if (pick < a_out) {
            pts.push_back(sample_cylinder_side(rng, ro, -h / 2, h / 2));
        } else if (pick < a_out + a_in) {
            pts.push_back(sample_cylinder_side(rng, ri, -h / 2, h / 2));
        } else if (pick < a_out + a_in + a_cap) {
            pts.push_back(sample_disk(rng, ri, ro, h / 2));
        } else {
            pts.push_back(sample_disk(rng, ri, ro, -h / 2));
        }
    }
    return pts;
}

// marker cluster share of the point budget
constexpr double kMarkerFraction = 0.15;

}  // namespace

PointCloud make_shape_raw(const std::string& family, int n_points, std::uint64_t seed,
                          std::vector<double>* dims_out, int* n_surface_out) {
    if (n_points < 8) throw std::invalid_argument("make_shape: n_points must be >= 8");
    if (!is_shape_family(family)) {
        throw std::invalid_argument("make_shape: unknown family '" + family + "'");
    }
    Rng rng(mix_seed(seed, std::hash<std::string>{}(family)));
    const int n_marker = std::max(1, static_cast<int>(n_points * kMarkerFraction));
    const int n_surface = n_points - n_marker;
    std::vector<double> dims;
    PointList pts;
    if (family == "box") pts = gen_box(rng, n_surface, dims);
    else if (family == "cylinder") pts = gen_cylinder(rng, n_surface, dims);
    else if (family == "cone") pts = gen_cone(rng, n_surface, dims);
    else if (family == "ellipsoid") pts = gen_ellipsoid(rng, n_surface, dims);
    else if (family == "lbracket") pts = gen_lbracket(rng, n_surface, dims);
    else if (family == "pyramid") pts = gen_pyramid(rng, n_surface, dims);
    else if (family == "cross") pts = gen_cross(rng, n_surface, dims);
    else pts = gen_tube(rng, n_surface, dims);

    // asymmetric interior marker: kills every rotational symmetry of the
    // base surface, placed off all axes, sized to stay inside the bbox
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = (hi - lo) / 2.0;
    const Vec3 mid = (hi + lo) / 2.0;
    const Vec3 center = mid + Vec3(0.55 * ext.x(), 0.2 * ext.y(), 0.45 * ext.z());
    const double radius = 0.18 * ext.minCoeff();
    for (int i = 0; i < n_marker; ++i) {
        pts.push_back(sample_sphere_surface(rng, center, radius));
    }

    PointCloud c;
    c.points = std::move(pts);
    c.name = family;
    if (dims_out) *dims_out = dims;
    if (n_surface_out) *n_surface_out = n_surface;
    return c;
}

PointCloud make_shape(const std::string& family, int n_points, std::uint64_t seed) {
    int n_surface = 0;
    PointCloud c = centralize(make_shape_raw(family, n_points, seed, nullptr, &n_surface));
    // canonical pose: principal axis -> +Z, secondary -> +X, axis signs fixed by
    // the marker centroid so same-family shapes land in the same orientation
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : c.points) cov += p * p.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Vec3 z_axis = es.eigenvectors().col(2);
    Vec3 x_axis = es.eigenvectors().col(1);
    Vec3 marker = Vec3::Zero();
    for (size_t i = static_cast<size_t>(n_surface); i < c.points.size(); ++i) {
        marker += c.points[i];
    }
    marker /= static_cast<double>(c.points.size() - static_cast<size_t>(n_surface));
    if (marker.dot(z_axis) < 0.0) z_axis = -z_axis;
    if (marker.dot(x_axis) < 0.0) x_axis = -x_axis;
    Mat3 r;
    r.row(0) = x_axis.transpose();
    r.row(1) = z_axis.cross(x_axis).transpose();
    r.row(2) = z_axis.transpose();
    return normalize_unit_sphere(apply_rotation(r, c));
}

std::string rdf_mode_name(RdfMode m) {
    switch (m) {
        case RdfMode::SO0: return "so0";
        case RdfMode::SO1: return "so1";
        default: return "so3";
    }
}

RdfMode rdf_mode_from_name(const std::string& s) {
    if (s == "so0" || s == "SO0") return RdfMode::SO0;
    if (s == "so1" || s == "SO1") return RdfMode::SO1;
    if (s == "so3" || s == "SO3") return RdfMode::SO3;
    throw std::invalid_argument("unknown RDF mode '" + s + "'");
}

std::vector<RdfSample> build_rdf_dataset(const std::vector<std::string>& families,
                                         int per_family, int n_points, RdfMode mode,
                                         std::uint64_t seed) {
    std::vector<RdfSample> out;
    out.reserve(families.size() * static_cast<size_t>(per_family));
    for (size_t f = 0; f < families.size(); ++f) {
        for (int i = 0; i < per_family; ++i) {
            const std::uint64_t shape_seed = mix_seed(seed, f, static_cast<std::uint64_t>(i));
            RdfSample s;
            s.family_label = static_cast<int>(f);
            s.source_cloud_id = static_cast<int>(f) * per_family + i;
            s.cloud = make_shape(families[f], n_points, shape_seed);
            if (mode != RdfMode::SO0) {
                Rng rot_rng(mix_seed(shape_seed, 0x5eedULL, static_cast<std::uint64_t>(mode)));
                Mat3 r;
                if (mode == RdfMode::SO1) {
                    r = rot_z(rot_rng.uniform(0.0, kTwoPi));
                } else {
                    r = random_rotation_haar(rot_rng);
                }
                s.cloud = apply_rotation(r, s.cloud);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::string rotation_mode_name(RotationMode m) {
    return m == RotationMode::GridExact ? "grid-exact" : "haar-quantized";
}

RotationMode rotation_mode_from_name(const std::string& s) {
    if (s == "grid-exact" || s == "GridExact") return RotationMode::GridExact;
    if (s == "haar-quantized" || s == "HaarQuantized") return RotationMode::HaarQuantized;
    throw std::invalid_argument("unknown rotation mode '" + s + "'");
}

RotationDataset build_rotation_dataset(const std::vector<std::string>& families,
                                       int per_family, int rotations_per_shape,
                                       int n_points, const DiscretizationGrid& grid,
                                       RotationMode mode, double jitter_sigma,
                                       std::uint64_t seed) {
    RotationDataset ds;
    ds.grid_k = grid.k();
    for (size_t f = 0; f < families.size(); ++f) {
        for (int i = 0; i < per_family; ++i) {
            const std::uint64_t shape_seed = mix_seed(seed, f, static_cast<std::uint64_t>(i));
            const int source_id = static_cast<int>(f) * per_family + i;
            PointCloud aligned = make_shape(families[f], n_points, shape_seed);
            for (int r = 0; r < rotations_per_shape; ++r) {
                Rng rng(mix_seed(shape_seed, 0x707ULL, static_cast<std::uint64_t>(r)));
                LabeledSample s;
                s.family = families[f];
                s.source_cloud_id = source_id;
                if (mode == RotationMode::GridExact) {
                    s.label = static_cast<ClassId>(rng.below(static_cast<std::uint64_t>(grid.n())));
                    s.truth_rotation = grid.class_to_matrix(s.label);
                } else {
                    s.truth_rotation = random_rotation_haar(rng);
                    s.label = grid.quantize(s.truth_rotation);
                }
                s.cloud = apply_rotation(s.truth_rotation, aligned);
                if (jitter_sigma > 0.0) {
                    for (Vec3& p : s.cloud.points) {
                        p += jitter_sigma * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
                    }
                }
                ds.samples.push_back(std::move(s));
            }
            ds.sources.push_back(std::move(aligned));
            ds.source_family.push_back(families[f]);
        }
    }
    return ds;
}

namespace {

std::string sample_cloud_name(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05zu.xyz", i);
    return buf;
}

std::string source_cloud_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "src_%05d.xyz", id);
    return buf;
}

}  // namespace

std::string write_manifest(const RotationDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (size_t i = 0; i < ds.sources.size(); ++i) {
        write_cloud(ds.sources[i], (fs::path(dir) / source_cloud_name(static_cast<int>(i))).string());
    }
    const std::string manifest_path = (fs::path(dir) / "manifest.jsonl").string();
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + manifest_path);
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const LabeledSample& s = ds.samples[i];
        const std::string cloud_name = sample_cloud_name(i);
        write_cloud(s.cloud, (fs::path(dir) / cloud_name).string());
        const EulerZYZ e = matrix_to_euler(s.truth_rotation);
        nlohmann::ordered_json j;
        j["cloud_path"] = cloud_name;
        j["label"] = s.label;
        j["alpha"] = e.alpha;
        j["beta"] = e.beta;
        j["gamma"] = e.gamma;
        j["family"] = s.family;
        j["source_id"] = s.source_cloud_id;
        j["grid_theta_k"] = ds.grid_k;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write_manifest: write failed");
    return manifest_path;
}

RotationDataset read_manifest(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + manifest_path);
    const fs::path dir = fs::path(manifest_path).parent_path();
    RotationDataset ds;
    int max_source_id = -1;
    std::string line;
    int lineno = 0;
    int n_classes = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) +
                                     ": malformed record: " + e.what());
        }
        LabeledSample s;
        EulerZYZ e;
        int grid_k = 0;
        try {
            s.label = j.at("label").get<int>();
            e.alpha = j.at("alpha").get<double>();
            e.beta = j.at("beta").get<double>();
            e.gamma = j.at("gamma").get<double>();
            s.family = j.at("family").get<std::string>();
            s.source_cloud_id = j.at("source_id").get<int>();
            grid_k = j.at("grid_theta_k").get<int>();
            s.cloud = read_cloud((dir / j.at("cloud_path").get<std::string>()).string(),
                                 CloudFormat::XYZ);
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) +
                                     ": missing or mistyped field: " + ex.what());
        }
        if (ds.grid_k == 0) {
            ds.grid_k = grid_k;
            n_classes = DiscretizationGrid::from_k(grid_k).n();
        } else if (grid_k != ds.grid_k) {
            throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) +
                                     ": inconsistent grid_theta_k");
        }
        if (s.label < 0 || s.label >= n_classes) {
            throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) +
                                     ": label " + std::to_string(s.label) +
                                     " out of range for k=" + std::to_string(grid_k));
        }
        s.truth_rotation = euler_to_matrix(e);
        max_source_id = std::max(max_source_id, s.source_cloud_id);
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw std::runtime_error("read_manifest: empty manifest");
    ds.sources.resize(static_cast<size_t>(max_source_id + 1));
    ds.source_family.resize(static_cast<size_t>(max_source_id + 1));
    for (int id = 0; id <= max_source_id; ++id) {
        const fs::path p = dir / source_cloud_name(id);
        if (fs::exists(p)) {
            ds.sources[static_cast<size_t>(id)] = read_cloud(p.string(), CloudFormat::XYZ);
        }
    }
    for (const LabeledSample& s : ds.samples) {
        ds.source_family[static_cast<size_t>(s.source_cloud_id)] = s.family;
    }
    return ds;
}

void split_by_source(const RotationDataset& ds, double test_fraction, std::uint64_t seed,
                     std::vector<int>* train_idx, std::vector<int>* test_idx) {
    std::vector<int> source_ids;
    for (const LabeledSample& s : ds.samples) {
        if (std::find(source_ids.begin(), source_ids.end(), s.source_cloud_id) ==
            source_ids.end()) {
            source_ids.push_back(s.source_cloud_id);
        }
    }
    // Fisher-Yates with our own rng, then take the tail as test sources
    Rng rng(mix_seed(seed, 0x5217ULL));
    for (size_t i = source_ids.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.below(i));
        std::swap(source_ids[i - 1], source_ids[j]);
    }
    const size_t n_test = std::max<size_t>(
        1, static_cast<size_t>(std::llround(test_fraction * source_ids.size())));
    std::vector<int> test_sources(source_ids.end() - static_cast<long>(n_test), source_ids.end());
    train_idx->clear();
    test_idx->clear();
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const bool t = std::find(test_sources.begin(), test_sources.end(),
                                 ds.samples[i].source_cloud_id) != test_sources.end();
        (t ? test_idx : train_idx)->push_back(static_cast<int>(i));
    }
}

}  // namespace rtn
