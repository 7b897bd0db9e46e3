//! Meshes, intrinsic metrics and the cut-and-glue operations on them.

mod build;
pub mod io;
mod mesh;
mod metric;
mod ops;

pub use build::{
    antipodal_map, build_flat_torus, build_graded_sphere, build_standard, icosphere, PatchSpec,
    StandardSurface,
};
pub use mesh::{
    BoundaryLoop, Identification, IdentificationKind, PatchRing, PolarPatch, SurfaceMesh, Topology,
};
pub use metric::{
    corner_angles, corner_cotangents, triangle_area, triangle_layout, ConePoint, DiscreteMetric,
};
pub use ops::{
    build_cross_cap, build_cross_cap_with_perimeter, build_cross_cap_with_rings, build_cylinder,
    build_cylinder_with_perimeter, build_cylinder_with_rings, glue, glue_loops, loop_length, mollify_metric,
    orientation_double_cover, remove_disk, DoubleCover, GluePair, Glued, RemovedDisk,
};

/// `V - E + F` of the mesh.
pub fn euler_characteristic(mesh: &SurfaceMesh) -> i64 {
    mesh.euler_characteristic()
}
