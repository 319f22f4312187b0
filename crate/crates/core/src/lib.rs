//! Multidimensional sequential search on finite product lattices.
//!
//! An agent draws i.i.d. offers from a distribution on a grid, pays a flow
//! search cost in utility terms, and accepts the first offer whose utility
//! clears a reservation level. This crate solves that problem exactly, tests
//! utilities for membership in the classes the comparative statics are stated
//! over, decides dominance between offer distributions on those classes, and
//! runs randomized checks of the resulting monotonicity results.

pub mod dominance;
pub mod error;
pub mod lattice;
pub mod lp;
pub mod reservation;
pub mod rng;
pub mod statics;
pub mod utility;

pub use dominance::{
    concordance_transfer, dominates, dominates_increasing_bruteforce, fosd_shift, mean_preserving_spread,
    ConcordanceCell, DominanceResult, Verdict,
};
pub use error::{Error, Result};
pub use lattice::{common_grid, Grid, OfferSampler, Pmf, SearchParams};
pub use reservation::{
    expected_value, policy_value, reservation_utility, simulate_search, value_function, SimulationStats, Solution,
};
pub use rng::{derive_seed, rng_from_seed, Rng};
pub use statics::{
    closure_check, concordance_path, generate_case, run_cases, run_suite, verify_theorem, verify_theorem_with,
    CaseOutcome, CaseRecord, ClosureOperator, ClosureReport, SuiteReport, SuiteSpec, SuiteSummary, TheoremCase,
    TheoremId, UtilitySource, VerificationReport,
};
pub use utility::{
    is_member, random_member, tabulate_family, Family, FunctionClass, Membership, TabulatedUtility, Violation,
    Witness, DEFAULT_CLASS_TOL,
};
