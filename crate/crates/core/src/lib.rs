//! Layered solutions of vector Allen–Cahn systems with symmetric double wells.
//!
//! The pipeline runs in three stages: [`potential`] audits the double well,
//! [`profile1d`] computes the one-dimensional heteroclinic connections and
//! checks that they form two separated clusters, and [`strip2d`] minimises
//! the renormalised action on a strip to obtain solutions of
//! `−Δu + ∇W(u) = 0`. [`verify`] checks the resulting inequalities and
//! [`io`] drives the whole thing from a configuration file.

pub mod grid;
pub mod io;
pub mod linalg;
pub mod potential;
pub mod profile1d;
pub mod strip2d;
pub mod verify;
