//! Geometry of the energy landscape of small clusters of sticky hard spheres.
//!
//! Rigid clusters come from [`clusters`]; the manifolds reached by breaking
//! one or two contacts are traced in [`manifold1d`] and [`manifold2d`]. Their
//! weights combine into partition functions in [`statmech`] and into a rate
//! network in [`kinetics`]. [`bdsim`] is the Brownian dynamics used to check
//! the predictions, and [`landscape`] ties the pieces together.

pub mod bdsim;
pub mod clusters;
pub mod error;
pub mod export;
pub mod geom;
pub mod graph;
pub mod kinetics;
pub mod landscape;
pub mod manifold1d;
pub mod manifold2d;
pub mod statmech;

pub use error::{Error, Result};

// The book's listings run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rigid.md")]
    mod rigid {}
    #[doc = include_str!("../../../book/src/partition.md")]
    mod partition {}
    #[doc = include_str!("../../../book/src/lines.md")]
    mod lines {}
    #[doc = include_str!("../../../book/src/faces.md")]
    mod faces {}
    #[doc = include_str!("../../../book/src/kappa.md")]
    mod kappa {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
