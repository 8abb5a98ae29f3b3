pub mod cert;
pub mod ckretract;
pub mod ellone;
pub mod error;
pub mod expr;
pub mod fblnorm;
pub mod homs;
pub mod lp;
pub mod plfan;
pub mod random;
pub mod scalar;

pub use error::{Error, Result};
