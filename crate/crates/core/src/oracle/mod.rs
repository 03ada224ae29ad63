//! Ground-truth gradient engines used to certify the EP estimates.

mod bptt;
mod finite_diff;
mod gdu;
mod suite;

pub use bptt::{
    backprop_trace, bptt_curve, bptt_gradient, bptt_gradient_full, unrolled_loss, unrolled_loss_split,
    unrolled_trace_split, UnrollTrace,
};
pub use finite_diff::{finite_diff, finite_diff_at, MAX_STEP, MIN_STEP};
pub use gdu::{
    compare_suite, gdu_report, median, member_curves, pick_weights, GduReport, GduRow, MemberComparison,
    WeightTraceRow, GDU_HEADER, WEIGHT_TRACE_HEADER,
};
pub use suite::{toy_suite, ToyMember, ToySuite, ToySuiteConfig};
