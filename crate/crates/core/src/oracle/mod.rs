//! Independent reference solvers used to check the closed forms: a numeric
//! maximizer, an optimality-condition checker, and exhaustive enumeration.

mod brute;
mod kkt;
mod numeric;
mod system;

pub use brute::{brute_force_most_likely, BruteForceResult, SEARCH_LIMIT};
pub use kkt::{verify_kkt, CellValues, KktReport};
pub use numeric::{numeric_maxent, Objective, OracleResult};
