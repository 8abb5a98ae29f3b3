//! Free Banach lattice norms: exact values for piecewise-linear functions,
//! randomized lower bounds for black-box evaluators, and certificate checks.

mod bracket;
mod checks;
mod eval;
mod exact;
mod oracle;
mod space;

pub use bracket::{Diagnostics, DualConfig, NormBracket};
pub use checks::{check_lemma34, check_lemma34_with, expr_sup_norm, fbl_vs_polyhedral_check, Lemma34Report, PolyhedralReport};
pub use eval::{config_value, AbsProduct, Evaluator, ExprEvaluator, FnEvaluator};
pub use exact::{exact_fbl_norm, exact_norm_of_expr, ExactOptions, NormMethod, DEFAULT_PATTERN_CAP, RATIONAL_MAX_DIM};
pub use oracle::{check_homogeneity, oracle_lower_bound};
pub use space::{admissible, AdmissibilityReport, AdmissibilitySpace, Ball, ADMISSIBLE_TOL, LINF_MAX_GENERATORS};
