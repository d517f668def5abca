//! Simulation of the infinite-parent spatial Lambda-Fleming-Viot process
//! and of the objects used to bound its growth speed.
//!
//! - [`geometry`] and [`events`]: ellipses, exact positive-overlap tests,
//!   shape laws and lazily generated Poisson event streams.
//! - [`ancestral`]: the dual process from a point and its half-plane hitting
//!   times.
//! - [`express`]: the express chain, a lower bound on the speed.
//! - [`percolation`]: lattice first-passage percolation and the cell
//!   discretisation of a dual trajectory.
//! - [`twocolumn`]: two-column growth, simulated and solved exactly.
//! - [`forward`]: the forward process from a region, occupancy frames and
//!   the duality check.
//! - [`harness`]: recipes, replica orchestration and output files.

pub mod ancestral;
pub mod error;
pub mod events;
pub mod express;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod percolation;
pub mod region;
pub mod stats;
pub mod twocolumn;

pub use error::{Error, Result};

// The book's snippets run as doctests of these modules.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/shapes.md")]
    mod shapes {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/express.md")]
    mod express {}
    #[doc = include_str!("../../../book/src/percolation.md")]
    mod percolation {}
    #[doc = include_str!("../../../book/src/twocolumn.md")]
    mod twocolumn {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/recipes.md")]
    mod recipes {}
}
