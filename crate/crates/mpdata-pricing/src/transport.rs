//! Backward-in-time integration of the homogeneous advection-diffusion
//! equation, with the Fickian term recast as an additional advective
//! velocity so a single flux scheme handles both terms:
//!
//! ```text
//! d(psi)/dt + d/dx[ (u - nu/psi * d(psi)/dx) * psi ] = 0
//! ```
//!
//! Solving runs from t = T down to t = 0, realised by scaling the face
//! Courant numbers with (-dt)/dx; with nu < 0 the diffusion is well-posed
//! in that direction. The face velocity is recomputed from the current
//! field before every step (explicit lagging).

use crate::error::{Error, Result};
use crate::mpdata::{mpdata_step, FaceField, MpdataOptions, ScalarField};

/// Boundary condition applied when filling halo cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Zero-gradient copy of the edge value.
    Open,
    /// Constant-ratio extrapolation of psi (log-linear in x); falls back to
    /// open when an edge value is not strictly positive.
    LogLinear,
    /// Wraparound, for scheme tests only.
    Periodic,
}

/// Uniform grid in x = ln S and t. `x_min` is the first cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub delta_x: f64,
    pub n_x: usize,
    pub delta_t: f64,
    pub n_t: usize,
}

impl GridSpec {
    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.delta_x
    }

    pub fn asset_price(&self, i: usize) -> f64 {
        self.cell_center(i).exp()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.cell_center(i)).collect()
    }

    pub fn tenure(&self) -> f64 {
        self.n_t as f64 * self.delta_t
    }
}

/// The advection-diffusion problem being integrated backward.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    /// Advective velocity in x = ln S space.
    pub u: f64,
    /// Diffusivity; negative in the Black-Scholes setting.
    pub nu: f64,
    pub grid: GridSpec,
    pub boundary: Boundary,
    /// Abort on a mid-run Courant violation; disable for research runs.
    pub enforce_stability: bool,
}

impl TransportProblem {
    pub fn new(u: f64, nu: f64, grid: GridSpec, boundary: Boundary) -> Result<Self> {
        if grid.n_x < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 cells, got {}",
                grid.n_x
            )));
        }
        if grid.delta_x <= 0.0 || grid.delta_t <= 0.0 {
            return Err(Error::InvalidParameter(
                "grid steps must be positive".into(),
            ));
        }
        Ok(TransportProblem {
            u,
            nu,
            grid,
            boundary,
            enforce_stability: true,
        })
    }
}

/// Static stability diagnosis for a problem configuration.
///
/// `max_effective_courant` is the worst case of the face Courant number
/// over |A| <= 1. The divergent-velocity 1/2 bound is enforced on the
/// Fickian part through lambda^2 >= 2; the worst case itself only has to
/// stay below the donor-cell consistency limit of 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub max_effective_courant: f64,
    pub advective_courant: f64,
    pub lambda_squared: f64,
    pub satisfied: bool,
}

pub fn check_stability(problem: &TransportProblem, sigma: f64) -> StabilityReport {
    let g = &problem.grid;
    let c_adv = problem.u.abs() * g.delta_t / g.delta_x;
    if sigma == 0.0 || problem.nu == 0.0 {
        // pure advection with constant velocity: plain CFL
        return StabilityReport {
            max_effective_courant: c_adv,
            advective_courant: c_adv,
            lambda_squared: f64::INFINITY,
            satisfied: c_adv < 1.0,
        };
    }
    let lambda_squared = g.delta_x * g.delta_x / (sigma * sigma * g.delta_t);
    let worst = c_adv + 1.0 / lambda_squared;
    StabilityReport {
        max_effective_courant: worst,
        advective_courant: c_adv,
        lambda_squared,
        satisfied: (1.0 / lambda_squared) <= 0.5 + 1e-12 && worst < 1.0,
    }
}

impl TransportProblem {
    /// Volatility implied by the diffusivity, sigma^2 = -2 nu.
    pub fn implied_sigma(&self) -> f64 {
        (-2.0 * self.nu).max(0.0).sqrt()
    }

    pub fn stability(&self) -> StabilityReport {
        check_stability(self, self.implied_sigma())
    }
}

/// Fill the halo cells in place. Returns true when a log-linear edge had to
/// fall back to the open treatment because of a nonpositive edge value.
pub fn fill_halo(field: &mut ScalarField, boundary: Boundary) -> bool {
    let (h, n) = (field.halo(), field.n_x());
    let mut fell_back = false;
    match boundary {
        Boundary::Periodic => {
            let v = field.values_mut();
            for k in 0..h {
                v[k] = v[n + k];
                v[n + h + k] = v[h + k];
            }
        }
        Boundary::Open => {
            let v = field.values_mut();
            for k in 0..h {
                v[k] = v[h];
                v[n + h + k] = v[n + h - 1];
            }
        }
        Boundary::LogLinear => {
            let v = field.values_mut();
            let (l0, l1) = (v[h], v[h + 1]);
            if l0 > 0.0 && l1 > 0.0 {
                let ratio = l0 / l1;
                let mut val = l0;
                for k in (0..h).rev() {
                    val *= ratio;
                    v[k] = val;
                }
            } else {
                for k in 0..h {
                    v[k] = l0;
                }
                fell_back = true;
            }
            let (r0, r1) = (v[n + h - 1], v[n + h - 2]);
            if r0 > 0.0 && r1 > 0.0 {
                let ratio = r0 / r1;
                let mut val = r0;
                for k in 0..h {
                    val *= ratio;
                    v[n + h + k] = val;
                }
            } else {
                for k in 0..h {
                    v[n + h + k] = r0;
                }
                fell_back = true;
            }
        }
    }
    fell_back
}

/// Face Courant numbers for the current field,
/// `C = [u - nu*(2/dx)*A] * (-dt)/dx` with `A` the difference-to-sum ratio.
pub fn effective_courant(field: &ScalarField, problem: &TransportProblem) -> Result<FaceField> {
    let psi = field.values();
    let g = &problem.grid;
    let eps = 1e-15 * field.max_abs().max(1.0);
    let scale = -g.delta_t / g.delta_x;
    let mut out = Vec::with_capacity(field.n_faces());
    for j in 0..field.n_faces() {
        let a = (psi[j + 1] - psi[j]) / (psi[j + 1] + psi[j] + eps);
        let v = problem.u - problem.nu * (2.0 / g.delta_x) * a;
        out.push(v * scale);
    }
    let faces = FaceField::new(out);
    if !faces.is_finite() {
        return Err(Error::InvalidParameter(
            "non-finite effective Courant number (vanishing field without guard?)".into(),
        ));
    }
    Ok(faces)
}

/// Per-step context handed to the integration hook.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    /// Completed step index, 0-based.
    pub step: usize,
    /// Time level reached after this step (t decreases towards 0).
    pub t_next: f64,
}

/// Diagnostics accumulated over a backward integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub steps: usize,
    pub max_courant_seen: f64,
    pub halo_fallbacks: usize,
}

/// Integrate the terminal field from t = T to t = 0 in `n_t` steps,
/// recomputing the effective Courant field from the current solution each
/// step. The optional hook runs after every step (used for the
/// early-exercise projection).
pub fn integrate_backward(
    problem: &TransportProblem,
    terminal: &ScalarField,
    options: &MpdataOptions,
    mut hook: Option<&mut dyn FnMut(&StepContext, &mut ScalarField)>,
) -> Result<(ScalarField, IntegrationStats)> {
    let g = &problem.grid;
    let mut field = terminal.clone();
    let mut stats = IntegrationStats::default();
    if g.n_t == 0 {
        return Ok((field, stats));
    }
    if problem.enforce_stability {
        let report = problem.stability();
        if !report.satisfied {
            return Err(Error::Unstable {
                step: None,
                max_courant: report.max_effective_courant,
                bound: 0.5,
            });
        }
    }
    let tenure = g.tenure();
    let boundary = problem.boundary;
    for step in 0..g.n_t {
        if fill_halo(&mut field, boundary) {
            stats.halo_fallbacks += 1;
        }
        let courant = effective_courant(&field, problem)?;
        let max_c = courant.max_abs();
        stats.max_courant_seen = stats.max_courant_seen.max(max_c);
        if max_c >= 1.0 {
            return Err(Error::Unstable {
                step: Some(step),
                max_courant: max_c,
                bound: 1.0,
            });
        }
        field = mpdata_step(&field, &courant, options, |f| {
            fill_halo(f, boundary);
        })?;
        if !field.interior_is_finite() {
            return Err(Error::NonFinite { step });
        }
        let ctx = StepContext {
            step,
            t_next: tenure * (g.n_t - step - 1) as f64 / g.n_t as f64,
        };
        if let Some(h) = hook.as_mut() {
            h(&ctx, &mut field);
        }
        stats.steps += 1;
    }
    Ok((field, stats))
}
