#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rtn/checkpoint.hpp"
#include "rtn/eval.hpp"
#include "rtn/grid.hpp"
#include "rtn/net.hpp"
#include "rtn/synth.hpp"

namespace py = pybind11;

namespace {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

rtn::PointCloud to_cloud(const Eigen::Ref<const PointMatrix>& pts) {
    rtn::PointCloud c;
    c.points.reserve(static_cast<size_t>(pts.rows()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i) c.points.push_back(pts.row(i).transpose());
    return c;
}

PointMatrix from_cloud(const rtn::PointCloud& c) {
    PointMatrix m(static_cast<Eigen::Index>(c.size()), 3);
    for (size_t i = 0; i < c.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = c.points[i];
    return m;
}

// trained model handle: checkpoint params + config, exposed for inference
struct Model {
    rtn::ModelParams<float> params;
    rtn::RtnConfig cfg;

    static Model load(const std::string& path) {
        Model m;
        std::tie(m.params, m.cfg) = rtn::load_checkpoint(path);
        return m;
    }
    void save(const std::string& path) const { rtn::save_checkpoint(params, cfg, path); }
    int predict_class(const Eigen::Ref<const PointMatrix>& pts) const {
        return rtn::argmax_class(rtn::rtn_forward(to_cloud(pts), params, cfg));
    }
    std::vector<float> logits(const Eigen::Ref<const PointMatrix>& pts) const {
        return rtn::rtn_forward(to_cloud(pts), params, cfg);
    }
    std::pair<PointMatrix, int> normalize(const Eigen::Ref<const PointMatrix>& pts) const {
        const rtn::DiscretizationGrid grid = rtn::DiscretizationGrid::from_k(cfg.grid_k);
        const auto [cloud, cls] = rtn::normalize_pose(to_cloud(pts), params, cfg, grid);
        return {from_cloud(cloud), cls};
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "view-invariant pose normalization for 3D point clouds";

    // rotation algebra
    m.def("euler_to_matrix",
          [](double alpha, double beta, double gamma) {
              return rtn::euler_to_matrix({alpha, beta, gamma});
          },
          py::arg("alpha"), py::arg("beta"), py::arg("gamma"),
          "Rz(gamma) @ Ry(beta) @ Rz(alpha)");
    m.def("matrix_to_euler",
          [](const rtn::Mat3& r) {
              const rtn::EulerZYZ e = rtn::matrix_to_euler(r);
              return py::make_tuple(e.alpha, e.beta, e.gamma);
          },
          py::arg("rotation"));
    m.def("geodesic_distance", &rtn::geodesic_distance, py::arg("a"), py::arg("b"));

    // discretization codec
    py::class_<rtn::DiscretizationGrid>(m, "Grid")
        .def_static("from_k", &rtn::DiscretizationGrid::from_k, py::arg("k"))
        .def_property_readonly("k", &rtn::DiscretizationGrid::k)
        .def_property_readonly("theta", &rtn::DiscretizationGrid::theta)
        .def_property_readonly("n1", &rtn::DiscretizationGrid::n1)
        .def_property_readonly("n2", &rtn::DiscretizationGrid::n2)
        .def_property_readonly("n", &rtn::DiscretizationGrid::n)
        .def("quantize",
             [](const rtn::DiscretizationGrid& g, double alpha, double beta, double gamma) {
                 return g.quantize(rtn::EulerZYZ{alpha, beta, gamma});
             },
             py::arg("alpha"), py::arg("beta"), py::arg("gamma"))
        .def("quantize_matrix",
             [](const rtn::DiscretizationGrid& g, const rtn::Mat3& r) { return g.quantize(r); },
             py::arg("rotation"))
        .def("class_to_euler",
             [](const rtn::DiscretizationGrid& g, rtn::ClassId id) {
                 const rtn::EulerZYZ e = g.class_to_euler(id);
                 return py::make_tuple(e.alpha, e.beta, e.gamma);
             },
             py::arg("class_id"))
        .def("class_to_matrix", &rtn::DiscretizationGrid::class_to_matrix, py::arg("class_id"));

    // point-cloud operations
    m.def("centralize",
          [](const Eigen::Ref<const PointMatrix>& pts) {
              return from_cloud(rtn::centralize(to_cloud(pts)));
          },
          py::arg("points"));
    m.def("normalize_unit_sphere",
          [](const Eigen::Ref<const PointMatrix>& pts) {
              return from_cloud(rtn::normalize_unit_sphere(to_cloud(pts)));
          },
          py::arg("points"));
    m.def("farthest_point_sampling",
          [](const Eigen::Ref<const PointMatrix>& pts, int m_points) {
              return rtn::farthest_point_sampling(to_cloud(pts), m_points);
          },
          py::arg("points"), py::arg("m"));
    m.def("knn",
          [](const Eigen::Ref<const PointMatrix>& pts, int k) {
              return rtn::knn(to_cloud(pts), k).indices;
          },
          py::arg("points"), py::arg("k"));
    m.def("chamfer_distance",
          [](const Eigen::Ref<const PointMatrix>& a, const Eigen::Ref<const PointMatrix>& b) {
              return rtn::chamfer_distance(to_cloud(a), to_cloud(b));
          },
          py::arg("a"), py::arg("b"));
    m.def("rotate_points",
          [](const rtn::Mat3& r, const Eigen::Ref<const PointMatrix>& pts) {
              return from_cloud(rtn::apply_rotation(r, to_cloud(pts)));
          },
          py::arg("rotation"), py::arg("points"));
    m.def("read_cloud",
          [](const std::string& path) { return from_cloud(rtn::read_cloud(path)); },
          py::arg("path"));
    m.def("write_cloud",
          [](const Eigen::Ref<const PointMatrix>& pts, const std::string& path) {
              rtn::write_cloud(to_cloud(pts), path);
          },
          py::arg("points"), py::arg("path"));

    // synthetic shapes
    m.def("shape_families", [] { return rtn::kShapeFamilies; });
    m.def("make_shape",
          [](const std::string& family, int n_points, std::uint64_t seed) {
              return from_cloud(rtn::make_shape(family, n_points, seed));
          },
          py::arg("family"), py::arg("n_points"), py::arg("seed"));

    // inference on trained checkpoints
    py::class_<Model>(m, "Model")
        .def_static("load", &Model::load, py::arg("path"))
        .def("save", &Model::save, py::arg("path"))
        .def("predict_class", &Model::predict_class, py::arg("points"))
        .def("logits", &Model::logits, py::arg("points"))
        .def("normalize", &Model::normalize, py::arg("points"))
        .def_property_readonly("grid_k", [](const Model& m) { return m.cfg.grid_k; })
        .def_property_readonly("n_classes", [](const Model& m) { return m.cfg.n_outputs(); })
        .def_property_readonly("backbone",
                               [](const Model& m) { return rtn::backbone_name(m.cfg.backbone); });
}
