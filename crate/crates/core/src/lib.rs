//! Exact computation with generalized amalgamated free products.
//!
//! The crate provides four layers:
//!
//! * finite groups as multiplication tables, words over families of groups
//!   with canonical two-factor normal forms, and Todd-Coxeter coset
//!   enumeration ([`group`], [`word`], [`present`], [`coset`]);
//! * analysis of triangles of finite groups: fillability, minimality,
//!   reduction, angle estimates between subgroups, and a realizability
//!   pipeline ([`triangle`]);
//! * finite-dimensional unital *-algebras over exact Gaussian rationals,
//!   conditional expectations, commuting squares, and amalgams built by
//!   relation discovery and confluent rewriting ([`algebra`], [`expect`],
//!   [`rewrite`]);
//! * GNS modules for conditional expectations and truncated free-product
//!   Fock modules with their representations and moment maps ([`fock`]).
//!
//! All arithmetic on the algebra side is exact over `Q(i)`; nothing in the
//! crate uses floating point.

pub mod scalar;
pub mod linalg;
pub mod group;
pub mod word;
pub mod present;
pub mod coset;
pub mod triangle;
pub mod algebra;
pub mod expect;
pub mod rewrite;
pub mod fock;
pub mod doc;
pub mod presets;
