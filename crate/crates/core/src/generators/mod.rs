//! Test-matrix families: Gaussian, semi-Gaussian, sparse random with a set
//! condition number, `U D V`, and power-law graph incidence matrices.
//!
//! Every generator is a pure function of its parameters and seed.

mod gaussian;
mod graph;
mod rhs;
mod sprand;
mod udv;

pub use gaussian::{coherent_matrix, gen_gaussian, gen_semi_gaussian};
pub use graph::{
    build_incidence_from_square, filter_isolated, gen_powerlaw_graph, glue_graphs, graph_laplacian_pipeline,
    i0_from_max_degree, GraphModel, GraphSpec, GLUE_OVERLAP,
};
pub use rhs::{consistent_rhs, noisy_rhs};
pub use sprand::gen_sprand;
pub use udv::{gen_udv, udv_singular_values};
