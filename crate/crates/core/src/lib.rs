pub mod bench;
pub mod calibrate;
pub mod centres;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod solve;
pub mod tolerances;
pub mod worstcase;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bulk-calibration.md")]
    mod bulk_calibration {}
    #[doc = include_str!("../../../book/src/worst-case-risk.md")]
    mod worst_case_risk {}
    #[doc = include_str!("../../../book/src/centres.md")]
    mod centres {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
