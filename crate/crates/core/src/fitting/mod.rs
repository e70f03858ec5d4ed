//! Powder averaging, normalization, and bounded nonlinear least squares for
//! the sub-diffusion and DKI signal models.
//!
//! Fits minimize signal-domain squared residuals over a parameter box
//! (projection, so bounds hold exactly), matching a trust-region style
//! bounded solver with objective tolerance 1e-4, step tolerance 1e-6 and an
//! iteration cap of 400. Starts are fixed, so identical inputs and options
//! give bit-identical results on any thread count.

mod lm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlf::{self, MlfError};
use crate::model::{derived_metrics, DerivedMetrics, DkiParams, SubDiffusionParams};

use lm::{solve_box_lm, LmOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("empty signal input")]
    EmptyInput,
    #[error("need at least {needed} usable samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("signal is identically zero")]
    DegenerateInput,
    #[error("DKI fitting requires a single diffusion time, found {0}")]
    MixedDiffusionTimes(usize),
    #[error("non-finite signal value at sample {0}")]
    NonFiniteSignal(usize),
    #[error("baseline signal must be positive, got {0}")]
    InvalidBaseline(f64),
    #[error("dataset/scheme mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Mlf(#[from] MlfError),
}

/// One powder-averaged normalized measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    /// Effective diffusion time Δ̄, seconds.
    pub dbar: f64,
    /// q-space parameter, rad/mm.
    pub q: f64,
    /// Diffusion weighting, s/mm².
    pub b: f64,
    /// Normalized signal; may be negative on noisy real-valued data.
    pub s_norm: f64,
}

/// Powder-averaged normalized signal series for one voxel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelSeries {
    pub samples: Vec<SignalSample>,
    /// Raw baseline used for normalization.
    pub s0: f64,
    /// Set when any shell needed the arithmetic-mean fallback.
    pub arith_fallback: bool,
}

impl VoxelSeries {
    /// Count of samples with b > 0 at distinct (Δ̄, b).
    pub fn distinct_nonzero(&self) -> usize {
        let mut keys: Vec<(u64, u64)> = self
            .samples
            .iter()
            .filter(|s| s.b > 0.0)
            .map(|s| (s.dbar.to_bits(), s.b.to_bits()))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.samples.is_empty() {
            return Err(FitError::EmptyInput);
        }
        if !(self.s0 > 0.0) {
            return Err(FitError::InvalidBaseline(self.s0));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.s_norm.is_finite() {
                return Err(FitError::NonFiniteSignal(i));
            }
        }
        if self.samples.iter().all(|s| s.s_norm == 0.0) {
            return Err(FitError::DegenerateInput);
        }
        Ok(())
    }
}

/// Fit diagnostics shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult<P> {
    pub params: P,
    pub residual_sse: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Coefficient of determination of the signal fit; NaN when the observed
    /// signal is constant.
    pub r2_signal: f64,
}

/// Solver and model configuration, exposed through CLI flags/config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Relative objective-change stopping tolerance.
    pub ftol: f64,
    /// Relative step stopping tolerance.
    pub xtol: f64,
    pub max_iter: usize,
    /// Box for D_β (and D_DKI), mm²/s^β.
    pub d_bounds: (f64, f64),
    /// Box for β; upper bound 1 is attainable.
    pub beta_bounds: (f64, f64),
    /// Box for K_DKI; lower bound 0 is attainable.
    pub k_bounds: (f64, f64),
    /// Exclude samples with b above this before DKI fitting.
    pub dki_b_cap: Option<f64>,
    /// Fit S0 as a third DKI parameter instead of pinning it to 1.
    pub dki_fit_s0: bool,
    /// Δ̄ (seconds) selecting the shell set when DKI-fitting a
    /// multi-diffusion-time dataset.
    pub dki_dbar: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ftol: 1.0e-4,
            xtol: 1.0e-6,
            max_iter: 400,
            d_bounds: (1.0e-7, 5.0e-2),
            beta_bounds: (0.01, 1.0),
            k_bounds: (0.0, 3.0),
            dki_b_cap: Some(2400.0),
            dki_fit_s0: false,
            dki_dbar: None,
        }
    }
}

impl FitOptions {
    fn lm(&self) -> LmOptions {
        LmOptions {
            ftol: self.ftol,
            xtol: self.xtol,
            max_iter: self.max_iter,
        }
    }
}

/// Default sub-diffusion start (D_β, β); fits are insensitive to it, and a
/// fixed documented value keeps runs reproducible.
pub const SUBDIFFUSION_START: (f64, f64) = (5.0e-4, 0.8);

/// Geometric mean over diffusion encoding directions (trace weighting).
///
/// Noisy real-valued data can go nonpositive, where the geometric mean is
/// undefined; those shells fall back to the arithmetic mean and the returned
/// flag is set. The average is permutation invariant bit-for-bit.
pub fn powder_average(signals: &[f64]) -> Result<(f64, bool), FitError> {
    if signals.is_empty() {
        return Err(FitError::EmptyInput);
    }
    for (i, s) in signals.iter().enumerate() {
        if !s.is_finite() {
            return Err(FitError::NonFiniteSignal(i));
        }
    }
    let mut sorted = signals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    if sorted[0] == sorted[sorted.len() - 1] {
        return Ok((sorted[0], sorted[0] <= 0.0));
    }
    if sorted[0] <= 0.0 {
        let mean = sorted.iter().sum::<f64>() / n;
        return Ok((mean, true));
    }
    let log_mean = sorted.iter().map(|s| s.ln()).sum::<f64>() / n;
    Ok((log_mean.exp(), false))
}

/// Fit (D_β, β) to a powder-averaged series spanning any number of
/// diffusion times, minimizing Σ_ij [S_ij − E_β(−D_β q_j² Δ̄_i^β)]² over the
/// box D_β > 0, 0 < β ≤ 1.
pub fn fit_subdiffusion(
    series: &VoxelSeries,
    opts: &FitOptions,
) -> Result<FitResult<SubDiffusionParams>, FitError> {
    series.validate()?;
    let usable = series.distinct_nonzero();
    if usable < 3 {
        return Err(FitError::InsufficientData {
            needed: 3,
            got: usable,
        });
    }

    let obs: Vec<f64> = series.samples.iter().map(|s| s.s_norm).collect();
    let qq: Vec<f64> = series.samples.iter().map(|s| s.q * s.q).collect();
    let dbar: Vec<f64> = series.samples.iter().map(|s| s.dbar).collect();
    let ln_dbar: Vec<f64> = dbar.iter().map(|d| d.ln()).collect();

    let model = |x: &[f64], m: &mut [f64], jac: Option<&mut [f64]>| -> Result<(), FitError> {
        let (d, beta) = (x[0], x[1]);
        match jac {
            None => {
                for i in 0..m.len() {
                    let z = -d * qq[i] * dbar[i].powf(beta);
                    m[i] = mlf::mittag_leffler(beta, z)?;
                }
            }
            Some(j) => {
                for i in 0..m.len() {
                    let scale = qq[i] * dbar[i].powf(beta);
                    let z = -d * scale;
                    let (e, e_beta, e_z) = mlf::eval_with_grad(beta, z)?;
                    m[i] = e;
                    j[i * 2] = -scale * e_z;
                    j[i * 2 + 1] = e_beta + e_z * z * ln_dbar[i];
                }
            }
        }
        Ok(())
    };

    let (lo, hi) = (
        [opts.d_bounds.0, opts.beta_bounds.0],
        [opts.d_bounds.1, opts.beta_bounds.1],
    );
    let out = solve_box_lm(
        &[SUBDIFFUSION_START.0, SUBDIFFUSION_START.1],
        &lo,
        &hi,
        &obs,
        &model,
        &opts.lm(),
    )?;

    Ok(FitResult {
        params: SubDiffusionParams {
            d_beta: out.x[0],
            beta: out.x[1],
        },
        residual_sse: out.sse,
        n_iter: out.n_iter,
        converged: out.converged,
        r2_signal: r2_signal(&obs, out.sse),
    })
}

/// Fit the DKI model S0·exp(−bD + b²D²K/6) to a single-diffusion-time
/// series; samples above the configured b-cap are excluded first.
pub fn fit_dki(series: &VoxelSeries, opts: &FitOptions) -> Result<FitResult<DkiParams>, FitError> {
    series.validate()?;
    let n_times = {
        let mut d: Vec<u64> = series.samples.iter().map(|s| s.dbar.to_bits()).collect();
        d.sort_unstable();
        d.dedup();
        d.len()
    };
    if n_times > 1 {
        return Err(FitError::MixedDiffusionTimes(n_times));
    }

    let kept: Vec<&SignalSample> = series
        .samples
        .iter()
        .filter(|s| opts.dki_b_cap.map_or(true, |cap| s.b <= cap))
        .collect();
    let nonzero = kept.iter().filter(|s| s.b > 0.0).count();
    if kept.len() < 3 || nonzero < 2 {
        return Err(FitError::InsufficientData {
            needed: 3,
            got: kept.len().min(nonzero + 1),
        });
    }

    let obs: Vec<f64> = kept.iter().map(|s| s.s_norm).collect();
    let bs: Vec<f64> = kept.iter().map(|s| s.b).collect();

    // log-linear two-point start for D from the two smallest nonzero shells
    let mut nz: Vec<(f64, f64)> = kept
        .iter()
        .filter(|s| s.b > 0.0)
        .map(|s| (s.b, s.s_norm))
        .collect();
    nz.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d_start = match (nz.first(), nz.get(1)) {
        (Some(&(b1, s1)), Some(&(b2, s2))) if s1 > 0.0 && s2 > 0.0 && b2 > b1 => {
            ((s1 / s2).ln() / (b2 - b1)).clamp(opts.d_bounds.0, opts.d_bounds.1)
        }
        _ => 1.0e-3,
    };

    let fit_s0 = opts.dki_fit_s0;
    let p = if fit_s0 { 3 } else { 2 };
    let model = |x: &[f64], m: &mut [f64], jac: Option<&mut [f64]>| -> Result<(), FitError> {
        let (d, k) = (x[0], x[1]);
        let s0 = if fit_s0 { x[2] } else { 1.0 };
        for i in 0..m.len() {
            let bd = bs[i] * d;
            let val = s0 * (-bd + bd * bd * k / 6.0).exp();
            m[i] = val;
            if let Some(j) = &jac {
                let row = i * p;
                // written below; placeholder keeps borrow simple
                let _ = (row, j);
            }
        }
        if let Some(j) = jac {
            for i in 0..m.len() {
                let bd = bs[i] * d;
                let row = i * p;
                j[row] = m[i] * (-bs[i] + bs[i] * bd * k / 3.0);
                j[row + 1] = m[i] * bd * bd / 6.0;
                if fit_s0 {
                    j[row + 2] = m[i] / s0;
                }
            }
        }
        Ok(())
    };

    let k_start = 0.5f64.clamp(opts.k_bounds.0, opts.k_bounds.1);
    let (x0, lo, hi) = if fit_s0 {
        (
            vec![d_start, k_start, 1.0],
            vec![opts.d_bounds.0, opts.k_bounds.0, 1.0e-6],
            vec![opts.d_bounds.1, opts.k_bounds.1, 10.0],
        )
    } else {
        (
            vec![d_start, k_start],
            vec![opts.d_bounds.0, opts.k_bounds.0],
            vec![opts.d_bounds.1, opts.k_bounds.1],
        )
    };
    let out = solve_box_lm(&x0, &lo, &hi, &obs, &model, &opts.lm())?;

    Ok(FitResult {
        params: DkiParams {
            s0: if fit_s0 { out.x[2] } else { 1.0 },
            d_dki: out.x[0],
            k_dki: out.x[1],
        },
        residual_sse: out.sse,
        n_iter: out.n_iter,
        converged: out.converged,
        r2_signal: r2_signal(&obs, out.sse),
    })
}

fn r2_signal(obs: &[f64], sse: f64) -> f64 {
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let sst: f64 = obs.iter().map(|o| (o - mean) * (o - mean)).sum();
    if sst == 0.0 {
        f64::NAN
    } else {
        1.0 - sse / sst
    }
}

/// Which signal model a volume fit applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sub,
    Dki,
}

/// Per-voxel series access for volume fitting. Masked-out voxels yield
/// `None`; implementations must be immutable and shareable across workers.
pub trait VoxelSource: Sync {
    fn dims(&self) -> [usize; 3];
    fn series(&self, index: usize) -> Result<Option<VoxelSeries>, FitError>;
}

/// Sub-diffusion voxel record: fit plus derived metrics per Δ̄.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubVoxelFit {
    pub fit: FitResult<SubDiffusionParams>,
    /// One entry per distinct Δ̄, ascending, aligned with
    /// [`VolumeFit::diffusion_times`].
    pub derived: Vec<DerivedMetrics>,
    pub arith_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DkiVoxelFit {
    pub fit: FitResult<DkiParams>,
    pub dbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VoxelFit {
    Sub(SubVoxelFit),
    Dki(DkiVoxelFit),
}

/// Voxelwise parameter maps; `voxels[idx]` is `None` outside the mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFit {
    pub dims: [usize; 3],
    pub model: ModelKind,
    /// Distinct Δ̄ values of the fitted dataset, ascending.
    pub diffusion_times: Vec<f64>,
    pub voxels: Vec<Option<VoxelFit>>,
}

impl VolumeFit {
    /// Extract a named scalar map (row-major x, y, z with z fastest), NaN
    /// outside the mask. Names: `d_beta`, `beta`, `k_star`, `d_sub:<i>`,
    /// `d_star:<i>`, `r2`, `d_dki`, `k_dki`, `s0`.
    pub fn map(&self, name: &str) -> Option<Vec<f64>> {
        let get = |v: &Option<VoxelFit>| -> Option<f64> {
            match v {
                None => None,
                Some(VoxelFit::Sub(s)) => match name {
                    "d_beta" => Some(s.fit.params.d_beta),
                    "beta" => Some(s.fit.params.beta),
                    "k_star" => s.derived.first().map(|d| d.k_star),
                    "r2" => Some(s.fit.r2_signal),
                    _ => name.strip_prefix("d_sub:").and_then(|i| {
                        let i: usize = i.parse().ok()?;
                        s.derived.get(i).map(|d| d.d_sub)
                    }).or_else(|| {
                        name.strip_prefix("d_star:").and_then(|i| {
                            let i: usize = i.parse().ok()?;
                            s.derived.get(i).map(|d| d.d_star)
                        })
                    }),
                },
                Some(VoxelFit::Dki(d)) => match name {
                    "d_dki" => Some(d.fit.params.d_dki),
                    "k_dki" => Some(d.fit.params.k_dki),
                    "s0" => Some(d.fit.params.s0),
                    "r2" => Some(d.fit.r2_signal),
                    _ => None,
                },
            }
        };
        let first = self.voxels.iter().find(|v| v.is_some());
        if let Some(v) = first {
            get(v)?; // reject unknown names up front
        }
        Some(self.voxels.iter().map(|v| get(v).unwrap_or(f64::NAN)).collect())
    }
}

/// Fit every in-mask voxel of a volume. Voxels are distributed across the
/// rayon pool; outputs land in a preallocated index-ordered table, so the
/// result is identical for any worker count.
pub fn fit_volume(
    source: &dyn VoxelSource,
    model: ModelKind,
    opts: &FitOptions,
) -> Result<VolumeFit, FitError> {
    let dims = source.dims();
    let n = dims[0] * dims[1] * dims[2];

    let voxels: Vec<Option<VoxelFit>> = (0..n)
        .into_par_iter()
        .map(|idx| -> Result<Option<VoxelFit>, FitError> {
            let Some(series) = source.series(idx)? else {
                return Ok(None);
            };
            match model {
                ModelKind::Sub => {
                    let fit = match fit_subdiffusion(&series, opts) {
                        Ok(f) => f,
                        Err(
                            FitError::InsufficientData { .. } | FitError::DegenerateInput,
                        ) => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    let mut dbars: Vec<f64> = series.samples.iter().map(|s| s.dbar).collect();
                    dbars.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    dbars.dedup();
                    let derived = dbars
                        .iter()
                        .map(|&d| derived_metrics(&fit.params, d))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| FitError::ShapeMismatch("derived metrics".into()))?;
                    Ok(Some(VoxelFit::Sub(SubVoxelFit {
                        fit,
                        derived,
                        arith_fallback: series.arith_fallback,
                    })))
                }
                ModelKind::Dki => {
                    let filtered = match opts.dki_dbar {
                        Some(target) => VoxelSeries {
                            samples: series
                                .samples
                                .iter()
                                .copied()
                                .filter(|s| {
                                    (s.dbar - target).abs() <= 1.0e-12 * target.abs().max(1.0)
                                })
                                .collect(),
                            ..series.clone()
                        },
                        None => series.clone(),
                    };
                    if filtered.samples.is_empty() {
                        return Ok(None);
                    }
                    let dbar = filtered.samples[0].dbar;
                    let fit = match fit_dki(&filtered, opts) {
                        Ok(f) => f,
                        Err(
                            FitError::InsufficientData { .. } | FitError::DegenerateInput,
                        ) => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    Ok(Some(VoxelFit::Dki(DkiVoxelFit { fit, dbar })))
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut diffusion_times: Vec<f64> = Vec::new();
    for v in voxels.iter().flatten() {
        if let VoxelFit::Sub(_) = v {
            break;
        }
    }
    // Δ̄ axis from the first in-mask voxel's series
    for idx in 0..n {
        if let Some(series) = source.series(idx)? {
            let mut d: Vec<f64> = series.samples.iter().map(|s| s.dbar).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d.dedup();
            diffusion_times = d;
            break;
        }
    }

    Ok(VolumeFit {
        dims,
        model,
        diffusion_times,
        voxels,
    })
}
