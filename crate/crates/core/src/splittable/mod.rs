//! Deterministic splittable oblivious routing.

pub mod ops;
pub mod policy;
pub mod sequential;

pub use ops::{pointwise_mul, reverse_operator, row_norm, StepOperator};
pub use policy::{
    compute_policy, congestion, policy_loads, route_splittable, CommodityFlow, ComputedPolicy,
    PolicyDiagnostics, PolicyOptions, RoutingPolicy, SequentialTrace, SplittableRouting,
};
pub use sequential::{peak_step, rw_congestion, sequential_congestion};
