//! Combinatorial-design toolkit and protocol simulator for peer-to-peer
//! user-private information retrieval.
//!
//! Users submit database queries through proxies drawn from shared "memory
//! spaces"; which users share a space is given by a block design. This crate
//! provides:
//!
//! - [`designs`]: set systems, their classification (covering / PBD /
//!   1-design / BIBD / configuration / symmetric / projective plane /
//!   supersimple), duals, difference-set development, t-anonymity blowups,
//!   and dynamic user membership.
//! - [`fixtures`]: built-in named example designs.
//! - [`protocols`]: the six proxy-selection protocols as seeded stochastic
//!   simulations (plus the query-hop extension), producing ground-truth
//!   traces and per-observer views.
//! - [`adversaries`]: database and coalition attacks, closed-form posterior
//!   tables, and brute-force (ρ,c,κ)-anonymity measurement.
//! - [`stats`]: Monte Carlo estimators and tolerance verdicts that compare
//!   simulated traces against the exact probability statements.

pub mod adversaries;
pub mod designs;
pub mod fixtures;
pub mod protocols;
pub mod rng;
pub mod stats;
pub mod util;
