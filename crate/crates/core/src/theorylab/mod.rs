//! Representation-limit lab: how often a decentralized, state-local greedy
//! policy can reproduce the joint argmax of an unrestricted value table,
//! and concave majorants that keep a table's argmax.

mod curve;
mod envelope;
mod recovery;
mod table;

pub use curve::{
    bound_condition, recovery_bound, recovery_curve, CurveRow, RecoveryCurve, TrialRecord,
};
pub use envelope::{argmax, argmax_preserving_shift, concave_envelope_1d, upper_hull};
pub use recovery::{
    best_monotonic_recovery, best_recovery_of, marginal_vote_map, recovery_fraction,
    recovery_fraction_of, MonotonicPolicyMap, Recovery, HILL_CLIMB_RESTARTS,
};
pub use table::{decode, encode, OptimalActions, TabularQ};
