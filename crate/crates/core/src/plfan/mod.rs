//! Polyhedral fans of central hyperplane arrangements and the piecewise-linear
//! functions that live on them.

mod fan;
mod pl;

pub use fan::{
    arrangement_fan, arrangement_rays, canonical_hyperplanes, normalize_hyperplane, parse_sign_string,
    sign_string, Cone, Fan, FanOptions, DEFAULT_CELL_CAP, DEFAULT_SAMPLE_CAP,
};
pub use pl::{pl_equal, pl_from_maxmin, refine_by_zero_set, sup_norm_on_cube, PLFunction, PLFunctionJson, PlOp};
