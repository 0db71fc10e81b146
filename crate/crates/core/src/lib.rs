//! Geometry of spacelike graphs in constant-curvature warped spacetimes,
//! and the numerical checks behind their strong r-stability.
//!
//! The layers build on each other:
//!
//! * [`curvalg`]: pointwise algebra of a shape operator (`S_r`, `H_r`,
//!   Newton transformations, trace identities);
//! * [`spacetime`]: de Sitter space and the static cylinder as warped
//!   products, with slice closed forms;
//! * [`grid`] and [`surface`]: fiber grids and graphs `s = u(p)` embedded in
//!   Minkowski space, with their discrete curvature;
//! * [`calculus`]: `L_r` in trace and divergence form, and the stiffness
//!   matrix of `∫ <P_r ∇f, ∇f>`;
//! * [`variation`]: vertical variations, first and second variations, and
//!   the balance of volume;
//! * [`stability`]: the stability form, its spectrum, the support-function
//!   identity and the rigidity probe.
//!
//! ```
//! use std::sync::Arc;
//! use rstab_core::grid::{FiberGrid, GridSpec};
//! use rstab_core::spacetime::make_de_sitter;
//! use rstab_core::stability::{stability_spectrum, Verdict};
//! use rstab_core::surface::{embed_graph, GraphFunction};
//!
//! let model = Arc::new(make_de_sitter(2)?);
//! let grid = Arc::new(FiberGrid::new(GridSpec::sphere(32, 64))?);
//! let slice = embed_graph(model, grid.clone(), &GraphFunction::constant(&grid, 0.5))?;
//! assert_eq!(stability_spectrum(&slice, 0, 1)?.verdict, Verdict::Unstable);
//! # Ok::<(), rstab_core::Error>(())
//! ```

pub mod calculus;
pub mod curvalg;
pub mod error;
pub mod families;
pub mod grid;
pub mod numerics;
pub mod spacetime;
pub mod stability;
pub mod surface;
pub mod variation;

pub use error::{Error, Result};
