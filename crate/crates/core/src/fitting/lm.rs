//! Box-projected Levenberg-Marquardt for the small dense problems here
//! (two or three parameters, tens of residuals).
//!
//! Marquardt diagonal scaling handles the disparate parameter magnitudes
//! (D_β ~ 1e-4 against β ~ 1); trial steps are projected onto the box, so
//! returned parameters satisfy their bounds exactly. Objective never
//! increases across accepted steps.

use super::FitError;

pub(crate) const MAX_PARAMS: usize = 3;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmOptions {
    /// Relative objective-change tolerance.
    pub ftol: f64,
    /// Relative step tolerance.
    pub xtol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub x: Vec<f64>,
    pub sse: f64,
    pub n_iter: usize,
    pub converged: bool,
}

/// Model evaluation callback: fill `model` with m_i(x); when `jac` is
/// provided, also fill it row-major with ∂m_i/∂x_j.
pub(crate) type ModelFn<'a> =
    dyn Fn(&[f64], &mut [f64], Option<&mut [f64]>) -> Result<(), FitError> + 'a;

pub(crate) fn solve_box_lm(
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    obs: &[f64],
    model_fn: &ModelFn,
    opts: &LmOptions,
) -> Result<LmOutcome, FitError> {
    let p = x0.len();
    let mut out = lm_core(x0, lo, hi, obs, model_fn, opts)?;

    // Boundary polish: a minimizer on a bound is approached to within the
    // step tolerance but rarely reached exactly, the other parameters
    // co-adapting to the small offset. Re-solve with the parameter pinned to
    // the bound and keep that solution when it is no worse than the rounding
    // floor of the objective (~eps²·Σ obs²).
    let sse_floor = 4.0 * f64::EPSILON * f64::EPSILON * obs.iter().map(|o| o * o).sum::<f64>();
    for j in 0..p {
        let tol = opts.xtol * (out.x[j].abs() + opts.xtol);
        for bound in [lo[j], hi[j]] {
            if out.x[j] != bound && (out.x[j] - bound).abs() <= tol {
                let (mut lo2, mut hi2) = (lo.to_vec(), hi.to_vec());
                lo2[j] = bound;
                hi2[j] = bound;
                let mut start = out.x.clone();
                start[j] = bound;
                let pinned = lm_core(&start, &lo2, &hi2, obs, model_fn, opts)?;
                if pinned.sse <= out.sse * (1.0 + 1.0e-12) + sse_floor {
                    out = LmOutcome {
                        n_iter: out.n_iter + pinned.n_iter,
                        converged: out.converged && pinned.converged,
                        ..pinned
                    };
                }
            }
        }
    }
    Ok(out)
}

fn lm_core(
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    obs: &[f64],
    model_fn: &ModelFn,
    opts: &LmOptions,
) -> Result<LmOutcome, FitError> {
    let p = x0.len();
    assert!(p <= MAX_PARAMS && p == lo.len() && p == hi.len());
    let m = obs.len();

    let clamp = |x: &mut [f64]| {
        for j in 0..p {
            x[j] = x[j].clamp(lo[j], hi[j]);
        }
    };

    let mut x = x0.to_vec();
    clamp(&mut x);

    let mut model = vec![0.0; m];
    let mut jac = vec![0.0; m * p];
    let mut trial_model = vec![0.0; m];

    let sse_of = |model: &[f64]| -> f64 {
        obs.iter()
            .zip(model)
            .map(|(o, mv)| (o - mv) * (o - mv))
            .sum()
    };

    model_fn(&x, &mut model, None)?;
    let mut sse = sse_of(&model);
    let mut lambda = 1.0e-3;
    let mut converged = false;
    let mut n_iter = 0;

    for iter in 1..=opts.max_iter {
        n_iter = iter;
        model_fn(&x, &mut model, Some(&mut jac))?;

        // g = Jᵀ(obs − m), A = JᵀJ
        let mut g = [0.0f64; MAX_PARAMS];
        let mut a = [[0.0f64; MAX_PARAMS]; MAX_PARAMS];
        for i in 0..m {
            let r = obs[i] - model[i];
            for j in 0..p {
                let jij = jac[i * p + j];
                g[j] += jij * r;
                for k in j..p {
                    a[j][k] += jij * jac[i * p + k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                a[j][k] = a[k][j];
            }
        }
        let diag_max = (0..p).map(|j| a[j][j]).fold(0.0f64, f64::max);
        if diag_max == 0.0 {
            converged = true; // flat model: nothing to do
            break;
        }

        let mut accepted = false;
        for _ in 0..40 {
            // (A + λ·diag(A)) δ = g, with a floor keeping the system regular
            let mut aug = a;
            for j in 0..p {
                aug[j][j] += lambda * a[j][j].max(1.0e-12 * diag_max);
            }
            let Some(delta) = solve_small(&aug, &g, p) else {
                lambda *= 10.0;
                continue;
            };
            let mut x_new = x.clone();
            for j in 0..p {
                x_new[j] += delta[j];
            }
            clamp(&mut x_new);
            if x_new == x {
                lambda *= 10.0;
                if lambda > 1.0e14 {
                    break;
                }
                continue;
            }
            model_fn(&x_new, &mut trial_model, None)?;
            let sse_new = sse_of(&trial_model);
            if sse_new.is_finite() && sse_new <= sse {
                let step_small = (0..p)
                    .all(|j| (x_new[j] - x[j]).abs() <= opts.xtol * (x[j].abs() + opts.xtol));
                let sse_drop = sse - sse_new;
                x = x_new;
                sse = sse_new;
                lambda = (lambda / 3.0).max(1.0e-14);
                accepted = true;
                if step_small || sse_drop <= opts.ftol * sse.max(f64::MIN_POSITIVE) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1.0e14 {
                break;
            }
        }
        if !accepted {
            // no feasible descent direction left at this scale
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(LmOutcome {
        x,
        sse,
        n_iter,
        converged,
    })
}

/// Gaussian elimination with partial pivoting for p ≤ 3.
fn solve_small(
    a: &[[f64; MAX_PARAMS]; MAX_PARAMS],
    b: &[f64; MAX_PARAMS],
    p: usize,
) -> Option<[f64; MAX_PARAMS]> {
    let mut m = *a;
    let mut rhs = *b;
    let mut perm = [0usize, 1, 2];
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| {
                m[perm[i]][col]
                    .abs()
                    .partial_cmp(&m[perm[j]][col].abs())
                    .unwrap()
            })
            .unwrap();
        perm.swap(col, pivot);
        let pv = m[perm[col]][col];
        if pv == 0.0 || !pv.is_finite() {
            return None;
        }
        for row in (col + 1)..p {
            let f = m[perm[row]][col] / pv;
            for k in col..p {
                m[perm[row]][k] -= f * m[perm[col]][k];
            }
            rhs[perm[row]] -= f * rhs[perm[col]];
        }
    }
    let mut x = [0.0f64; MAX_PARAMS];
    for col in (0..p).rev() {
        let mut s = rhs[perm[col]];
        for k in (col + 1)..p {
            s -= m[perm[col]][k] * x[k];
        }
        x[col] = s / m[perm[col]][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}
