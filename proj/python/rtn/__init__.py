from ._core import (
    Grid,
    Model,
    centralize,
    chamfer_distance,
    euler_to_matrix,
    farthest_point_sampling,
    geodesic_distance,
    knn,
    make_shape,
    matrix_to_euler,
    normalize_unit_sphere,
    read_cloud,
    rotate_points,
    shape_families,
    write_cloud,
)

__all__ = [
    "Grid",
    "Model",
    "centralize",
    "chamfer_distance",
    "euler_to_matrix",
    "farthest_point_sampling",
    "geodesic_distance",
    "knn",
    "make_shape",
    "matrix_to_euler",
    "normalize_unit_sphere",
    "read_cloud",
    "rotate_points",
    "shape_families",
    "write_cloud",
]
