//! Financial layer: the change of variables that turns the pricing PDE into
//! a transport problem, instrument payoffs, terminal-condition
//! discretisation, grid sizing from (C, lambda^2), and price extraction.
//!
//! The substitution is
//!
//! ```text
//! psi = e^{-rt} f(S, t),   x = ln S,   u = r - sigma^2/2,   nu = -sigma^2/2
//! ```
//!
//! after which `psi` obeys a homogeneous advection-diffusion equation that
//! is integrated backward from the discounted payoff at t = T.

use crate::error::{Error, Result};
use crate::mpdata::{MpdataOptions, ScalarField};
use crate::transport::{
    check_stability, integrate_backward, Boundary, GridSpec, IntegrationStats, StabilityReport,
    TransportProblem,
};

pub const HALO: usize = 2;

/// Market parameters; the transport coefficients are always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    r: f64,
    sigma: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "volatility must be positive, got {sigma}"
            )));
        }
        Ok(MarketParams { r, sigma })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Advective velocity in log-price space.
    pub fn u(&self) -> f64 {
        self.r - self.sigma * self.sigma / 2.0
    }

    /// Diffusivity; negative, which makes the backward integration well-posed.
    pub fn nu(&self) -> f64 {
        -self.sigma * self.sigma / 2.0
    }
}

/// Transport coefficients (u, nu) for given rate and volatility.
pub fn transform_params(r: f64, sigma: f64) -> Result<(f64, f64)> {
    let p = MarketParams::new(r, sigma)?;
    Ok((p.u(), p.nu()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstrumentKind {
    /// Long call at `k1`, short call at `k2 > k1`.
    Corridor { k1: f64, k2: f64 },
    Call { strike: f64 },
    Put { strike: f64 },
    Forward { strike: f64 },
    AmericanPut { strike: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentSpec {
    pub kind: InstrumentKind,
    pub notional: f64,
    pub tenure: f64,
}

impl InstrumentSpec {
    pub fn new(kind: InstrumentKind, notional: f64, tenure: f64) -> Result<Self> {
        if !(notional > 0.0) {
            return Err(Error::InvalidParameter("notional must be positive".into()));
        }
        if !(tenure > 0.0) {
            return Err(Error::InvalidParameter("tenure must be positive".into()));
        }
        match kind {
            InstrumentKind::Corridor { k1, k2 } => {
                if !(k1 > 0.0 && k2 > k1) {
                    return Err(Error::InvalidParameter(format!(
                        "corridor strikes must satisfy k2 > k1 > 0, got k1={k1}, k2={k2}"
                    )));
                }
            }
            InstrumentKind::Call { strike }
            | InstrumentKind::Put { strike }
            | InstrumentKind::Forward { strike }
            | InstrumentKind::AmericanPut { strike } => {
                if !(strike > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "strike must be positive, got {strike}"
                    )));
                }
            }
        }
        Ok(InstrumentSpec {
            kind,
            notional,
            tenure,
        })
    }

    /// Payoff per unit notional at expiry.
    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            InstrumentKind::Corridor { k1, k2 } => (s - k1).max(0.0) - (s - k2).max(0.0),
            InstrumentKind::Call { strike } => (s - strike).max(0.0),
            InstrumentKind::Put { strike } | InstrumentKind::AmericanPut { strike } => {
                (strike - s).max(0.0)
            }
            InstrumentKind::Forward { strike } => s - strike,
        }
    }

    pub fn strikes(&self) -> Vec<f64> {
        match self.kind {
            InstrumentKind::Corridor { k1, k2 } => vec![k1, k2],
            InstrumentKind::Call { strike }
            | InstrumentKind::Put { strike }
            | InstrumentKind::Forward { strike }
            | InstrumentKind::AmericanPut { strike } => vec![strike],
        }
    }

    /// Boundary treatment: log-linear for puts (the far-ITM branch decays
    /// geometrically in x), open elsewhere (flat payoff tails).
    pub fn boundary(&self) -> Boundary {
        match self.kind {
            InstrumentKind::Put { .. } | InstrumentKind::AmericanPut { .. } => Boundary::LogLinear,
            _ => Boundary::Open,
        }
    }

    pub fn is_american(&self) -> bool {
        matches!(self.kind, InstrumentKind::AmericanPut { .. })
    }
}

/// Realized grid sizing produced from the (C, lambda^2) targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub target_courant: f64,
    pub lambda_squared: f64,
    pub delta_x: f64,
    pub delta_t: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub tenure: f64,
    pub domain: (f64, f64),
    pub realized_courant: f64,
}

/// Sizes the grid so the requested Courant number and lambda^2 are realised
/// as closely as an integer timestep count allows: the timestep is rounded
/// to divide the tenure exactly, then the gridstep is recomputed to hold
/// lambda^2 fixed.
pub fn size_grid(
    target_courant: f64,
    lambda_squared: f64,
    params: &MarketParams,
    tenure: f64,
    domain: (f64, f64),
) -> Result<Resolution> {
    if !(target_courant > 0.0) {
        return Err(Error::InvalidParameter(
            "target Courant number must be positive".into(),
        ));
    }
    if lambda_squared < 2.0 {
        return Err(Error::Unstable {
            step: None,
            max_courant: 1.0 / lambda_squared,
            bound: 0.5,
        });
    }
    let u = params.u();
    if u == 0.0 {
        return Err(Error::InvalidParameter(
            "u = r - sigma^2/2 vanishes; Courant targeting undefined, supply the gridstep directly"
                .into(),
        ));
    }
    if !(domain.0 > 0.0 && domain.1 > domain.0) {
        return Err(Error::InvalidParameter(format!(
            "domain must satisfy 0 < S_min < S_max, got {domain:?}"
        )));
    }
    if !(tenure > 0.0) {
        return Err(Error::InvalidParameter("tenure must be positive".into()));
    }
    let sigma2 = params.sigma() * params.sigma();
    let dx = lambda_squared * sigma2 * target_courant / u.abs();
    let dt = target_courant * dx / u.abs();
    let n_t = ((tenure / dt).round() as usize).max(1);
    let delta_t = tenure / n_t as f64;
    let delta_x = (lambda_squared * sigma2 * delta_t).sqrt();
    let n_x = ((domain.1 / domain.0).ln() / delta_x).ceil() as usize;
    Ok(Resolution {
        target_courant,
        lambda_squared,
        delta_x,
        delta_t,
        n_x,
        n_t,
        tenure,
        domain,
        realized_courant: u.abs() * delta_t / delta_x,
    })
}

impl Resolution {
    /// Plain grid: cell centers offset half a step from the lower domain edge.
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            x_min: self.domain.0.ln() + 0.5 * self.delta_x,
            delta_x: self.delta_x,
            n_x: self.n_x,
            delta_t: self.delta_t,
            n_t: self.n_t,
        }
    }

    /// Grid shifted so one cell center lands exactly on ln(s0), still
    /// covering the configured domain.
    pub fn grid_aligned(&self, s0: f64) -> Result<GridSpec> {
        if !(s0 > self.domain.0 && s0 < self.domain.1) {
            return Err(Error::SpotOutsideDomain {
                s0,
                lo: self.domain.0,
                hi: self.domain.1,
            });
        }
        let x_spot = s0.ln();
        let left = ((x_spot - self.domain.0.ln()) / self.delta_x).ceil() as usize;
        let right = ((self.domain.1.ln() - x_spot) / self.delta_x).ceil() as usize;
        Ok(GridSpec {
            x_min: x_spot - left as f64 * self.delta_x,
            delta_x: self.delta_x,
            n_x: left + right + 1,
            delta_t: self.delta_t,
            n_t: self.n_t,
        })
    }
}

/// Discounted payoff sampled at the cell centers. The flag reports a strike
/// falling within two cells of a domain edge, where the open-boundary
/// assumption of a flat payoff tail is broken.
pub fn terminal_condition(
    instrument: &InstrumentSpec,
    params: &MarketParams,
    grid: &GridSpec,
) -> (ScalarField, bool) {
    let discount = (-params.r() * instrument.tenure).exp();
    let interior: Vec<f64> = (0..grid.n_x)
        .map(|i| discount * instrument.payoff(grid.asset_price(i)))
        .collect();
    let field = ScalarField::from_interior(&interior, HALO);
    let mut edge_warning = false;
    if grid.n_x >= 5 {
        let lo = grid.cell_center(2);
        let hi = grid.cell_center(grid.n_x - 3);
        for k in instrument.strikes() {
            let x = k.ln();
            if x < lo || x > hi {
                edge_warning = true;
            }
        }
    }
    (field, edge_warning)
}

/// Value at the spot: the exact cell when ln(s0) coincides with a center
/// (within 1e-9 dx), otherwise linear interpolation between the bracketing
/// centers.
pub fn extract_price(field: &ScalarField, grid: &GridSpec, s0: f64) -> Result<f64> {
    let x = s0.ln();
    let lo = grid.cell_center(0);
    let hi = grid.cell_center(grid.n_x - 1);
    if x < lo - 1e-12 || x > hi + 1e-12 {
        return Err(Error::SpotOutsideDomain {
            s0,
            lo: lo.exp(),
            hi: hi.exp(),
        });
    }
    let pos = (x - lo) / grid.delta_x;
    let i = (pos.floor() as usize).min(grid.n_x - 1);
    let frac = pos - i as f64;
    let interior = field.interior();
    if frac.abs() < 1e-9 || i + 1 >= grid.n_x {
        Ok(interior[i])
    } else if (1.0 - frac).abs() < 1e-9 {
        Ok(interior[i + 1])
    } else {
        Ok(interior[i] * (1.0 - frac) + interior[i + 1] * frac)
    }
}

/// Everything a pricing run produces, sufficient to reproduce the report.
#[derive(Debug, Clone)]
pub struct PricingResult {
    /// Price scaled by the notional.
    pub price: f64,
    pub resolution: Resolution,
    pub stability: StabilityReport,
    pub grid: GridSpec,
    pub solution: ScalarField,
    pub terminal: ScalarField,
    pub stats: IntegrationStats,
    pub edge_warning: bool,
    pub options: MpdataOptions,
}

pub(crate) fn build_problem(
    instrument: &InstrumentSpec,
    params: &MarketParams,
    grid: GridSpec,
) -> Result<TransportProblem> {
    TransportProblem::new(params.u(), params.nu(), grid, instrument.boundary())
}

/// European pricing: discretised discounted payoff, backward integration,
/// extraction at the spot.
pub fn price_european(
    instrument: &InstrumentSpec,
    params: &MarketParams,
    s0: f64,
    resolution: &Resolution,
    options: &MpdataOptions,
) -> Result<PricingResult> {
    if instrument.is_american() {
        return Err(Error::InvalidParameter(
            "American instruments are priced by the early-exercise pipeline".into(),
        ));
    }
    let grid = match instrument.kind {
        InstrumentKind::Put { .. } => resolution.grid_aligned(s0)?,
        _ => resolution.grid(),
    };
    let (terminal, edge_warning) = terminal_condition(instrument, params, &grid);
    let problem = build_problem(instrument, params, grid.clone())?;
    let stability = check_stability(&problem, params.sigma());
    let (solution, stats) = integrate_backward(&problem, &terminal, options, None)?;
    let price = instrument.notional * extract_price(&solution, &grid, s0)?;
    Ok(PricingResult {
        price,
        resolution: *resolution,
        stability,
        grid,
        solution,
        terminal,
        stats,
        edge_warning,
        options: *options,
    })
}
