pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod samplers;
pub mod specfun;
pub mod sphere;

pub use error::{Error, Result};
pub use hypothesis::{
    calibrate_critical_value_mc, run_projection_test, run_test, statistic_b, statistic_p,
    statistic_projection_d, statistic_r, statistic_t, Calibration, Method, Tail, TestOutcome,
};
pub use samplers::{sample, ModelSpec, PreparedModel, RngSeed};
pub use sphere::{
    apply_rotation, make_unit_point_set, pairwise_inner_products, InnerProductList, UnitPointSet,
};
