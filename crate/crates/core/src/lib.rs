//! Certified spectral upper bounds for orthogonality-avoiding subsets of unit
//! spheres, together with the finite-graph independence-number hierarchies
//! the same machinery specializes to.
//!
//! The crate is organized bottom-up:
//!
//! - [`hp`] — high-precision scalars and outward-rounded interval arithmetic;
//! - [`special`] — normalized Jacobi polynomials, sphere constants, rigorous
//!   tail bounds;
//! - [`polysym`] — exact symmetric polynomial algebra in the three
//!   inner-product variables, the matrix kernels and Gram bases of the
//!   sum-of-squares cone used by the bound;
//! - [`bqpcuts`] — boolean-quadric (subgraph) cutting planes: validation,
//!   moment sequences, tail estimates, a separation heuristic, file I/O;
//! - [`ipm`] — a high-precision primal-dual interior-point solver for block
//!   SDPs, with SDPA sparse export/import and native serialization;
//! - [`model`] — assembly of the sphere bound's dual SDP and primal checks;
//! - [`certify`] — a posteriori rigorous certification of solver output into
//!   a proved upper bound;
//! - [`finitegraphs`] — exact and SDP reference hierarchies on finite graphs
//!   (independence number, Lovász theta, moment hierarchies, tensor cones).

pub mod archive;
pub mod bqpcuts;
pub mod certify;
pub mod finitegraphs;
pub mod hp;
pub mod ipm;
pub mod linalg;
pub mod model;
pub mod polysym;
pub mod sdpa;
pub mod special;
