//! Sub-diffusion modelling toolkit for diffusion-weighted MRI.
//!
//! The library estimates diffusional mean kurtosis from powder-averaged
//! DW-MRI signals through the sub-diffusion signal model
//! `S(q, Δ̄) = S0 · E_β(−D_β q² Δ̄^β)`, where `E_β` is the single-parameter
//! Mittag-Leffler function. Apparent diffusivity and mean kurtosis follow
//! analytically from the fitted `(D_β, β)` pair, so a single bounded
//! least-squares fit across one or more diffusion times yields a
//! time-independent kurtosis map.
//!
//! Modules:
//! - [`mlf`] — Mittag-Leffler function `E_β(z)` on the negative real axis.
//! - [`model`] — acquisition/parameter types, forward models, derived metrics.
//! - [`fitting`] — powder averaging and bounded nonlinear least squares.
//! - [`simulate`] — noisy signal synthesis and the Monte-Carlo study suite.
//! - [`protocol`] — exhaustive b-value subset search and direction subsampling.
//! - [`stats`] — goodness-of-fit, tissue contrast, region and scan-rescan statistics.
//! - [`io`] — dataset manifests, flat volume files, phantom generation.

pub mod fitting;
pub mod io;
pub mod mlf;
pub mod model;
pub mod protocol;
pub mod seed;
pub mod simulate;
pub mod sobol;
pub mod stats;

mod table;

pub use table::format_sig17;

/// Doc-tests for the guide chapters under `book/src`, so the book's code
/// blocks stay compilable against the current API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($path:literal, $name:ident) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }
    chapter!("../../../book/src/model.md", Model);
    chapter!("../../../book/src/mittag-leffler.md", MittagLeffler);
    chapter!("../../../book/src/fitting.md", Fitting);
    chapter!("../../../book/src/simulation.md", Simulation);
    chapter!("../../../book/src/protocol.md", Protocol);
    chapter!("../../../book/src/statistics.md", Statistics);
    chapter!("../../../book/src/data-formats.md", DataFormats);
}
