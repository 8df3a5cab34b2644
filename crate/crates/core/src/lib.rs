//! Minimum-cost batch rekeying for Logical Key Hierarchy (LKH) binary key trees.
//!
//! A key server that batches member departures and arrivals has to decide, for
//! every joining member, whether it takes over the slot of a departing member
//! or is appended under one of the remaining leaves. This crate models that
//! choice as a 0-1 program with step-function costs, lifts it to a program with
//! continuous objective, and solves the exact-penalty DC reformulation with DCA
//! (one LP per iteration).
//!
//! Modules:
//!
//! * [`keytree`]: heap-indexed full binary trees, random generation, applying a
//!   rekey plan, exact (overlap-aware) key update accounting.
//! * [`costmodel`]: per-node costs, the approximate total cost, the balance
//!   coefficient, the step-function objective and its lifted form, the penalty.
//! * [`lp`]: the per-iteration linear program and a deterministic simplex.
//! * [`dca`]: the DCA loop with penalty adaptation, multi-start and repair, plus
//!   the insertion-only variant (individual deletions, batch insertion).
//! * [`baselines`]: Marking, Batch Balanced (Merging) and Rotation heuristics.
//! * [`bench`]: scenarios, the brute-force oracle and the benchmark runner.

pub mod baselines;
pub mod bench;
pub mod costmodel;
pub mod dca;
mod error;
pub mod keytree;
pub mod lp;
mod report;

pub use error::{Error, Result};
pub use report::RekeyReport;
