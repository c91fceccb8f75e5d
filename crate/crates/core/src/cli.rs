//! Scenario files, computation routes and the command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expstate::{
    crb, defining_residual, f_coefficient, rhodot_eigenbasis, rhodot_wilcox, sld_direct, sld_eigenbasis,
    sld_series, sld_unitary_family, SldResult, DEFAULT_SERIES_ORDER, MAX_SERIES_ORDER,
};
use crate::families::{hermitian_from_rows, DerivativeKind, Family, FdOptions, Representation};
use crate::fockspace::oracle_qfi;
use crate::gaussian::{
    qfi_from_generator, qfi_of_sld, residuals, sld_degenerate, sld_from_generator, sld_from_moments, sld_pure,
    QuadraticSld, DEGENERACY_TOLERANCE, PURE_FLOOR,
};
use crate::numkit::{HermitianOperator, RMatrix};

/// Version tag written into every record and sweep row.
pub const SCHEMA_VERSION: &str = "1";
/// Truncation used by the Fock oracle unless overridden.
pub const DEFAULT_FOCK_DIM: usize = 80;
/// Cross-check tolerance between analytic routes.
pub const EXACT_ROUTE_TOLERANCE: f64 = 1e-8;
/// Cross-check tolerance when a truncated Fock route takes part.
pub const FOCK_ROUTE_TOLERANCE: f64 = 1e-5;
/// Quadrature order of the Wilcox-fed direct route.
pub const WILCOX_ORDER: usize = 32;
/// Upper bound on the order-40 series truncation error accepted in cross-checks.
pub const SERIES_TRUNCATION_BUDGET: f64 = 1e-9;

fn default_schema() -> String {
    SCHEMA_VERSION.into()
}

fn default_fock_dim() -> usize {
    DEFAULT_FOCK_DIM
}

fn default_outputs() -> Vec<Output> {
    vec![Output::Qfi]
}

fn default_trials() -> u64 {
    1
}

/// Requested computation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Moments,
    Generator,
    Eigenbasis,
    Series,
    FockOracle,
    #[default]
    Auto,
    Crosscheck,
}

/// Fields a record may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Qfi,
    Sld,
    Residuals,
    Crb,
}

/// Parameter range of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Family field to sweep instead of `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

impl Sweep {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.steps < 2 {
            return Err(Error::Validation(format!("sweep needs at least 2 steps, got {}", self.steps)));
        }
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::Validation("sweep bounds must be finite".into()));
        }
        let last = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| self.from + (self.to - self.from) * i as f64 / last)
            .collect())
    }
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub family: Family,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub method: Method,
    /// Finite-difference step; `None` selects `1e-5 · max(1, |θ|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub richardson: bool,
    #[serde(default = "default_fock_dim")]
    pub fock_dim: usize,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Validation(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Schema, method/representation compatibility and option checks.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema version {:?}",
                self.schema_version
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::Validation("theta must be finite".into()));
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Validation(format!("fd_step must be positive, got {h}")));
            }
        }
        if self.outputs.is_empty() {
            return Err(Error::Validation("outputs must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Validation("trials must be positive".into()));
        }
        if self.fock_dim < 2 {
            return Err(Error::Validation("fock_dim must be at least 2".into()));
        }
        let gaussian = self.family.representation() == Representation::Moments;
        match self.method {
            Method::Moments | Method::Generator if !gaussian => Err(Error::Validation(format!(
                "method {:?} requires a Gaussian family, got {}",
                self.method,
                self.family.kind()
            ))),
            Method::Eigenbasis | Method::Series if gaussian => Err(Error::Validation(format!(
                "method {:?} requires a finite-dimensional family, got {}",
                self.method,
                self.family.kind()
            ))),
            Method::FockOracle if gaussian && self.family.n_modes() != Some(1) => Err(Error::Validation(
                "fock_oracle requires a single-mode or finite-dimensional family".into(),
            )),
            Method::FockOracle if matches!(self.family, Family::ExplicitMoments { .. }) => Err(
                Error::Validation("fock_oracle cannot render explicit_moments families".into()),
            ),
            _ => Ok(()),
        }
    }

    fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    fn fd(&self) -> FdOptions {
        FdOptions {
            step: self.fd_step,
            richardson: self.richardson,
            numeric: false,
        }
    }
}

/// One concrete way of computing the SLD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Eigenbasis,
    Direct,
    Series,
    Unitary,
    Moments,
    Generator,
    Pure,
    Degenerate,
    FockOracle,
}

/// SLD in the form natural to its route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SldPayload {
    /// Dense matrix, entries as `[re, im]`.
    Dense { matrix: Vec<Vec<[f64; 2]>> },
    /// `L = rᵀΦr + rᵀζ - ν`
    Quadratic { phi: Vec<Vec<f64>>, zeta: Vec<f64>, nu: f64 },
}

impl SldPayload {
    fn dense(op: &HermitianOperator) -> Self {
        let m = op.matrix();
        SldPayload::Dense {
            matrix: (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        }
    }

    fn quadratic(q: &QuadraticSld) -> Self {
        SldPayload::Quadratic {
            phi: rows(&q.phi),
            zeta: q.zeta.iter().copied().collect(),
            nu: q.nu,
        }
    }
}

fn rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Defining-equation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub max: f64,
    /// `‖ρ̇ - ½{L, ρ}‖_F`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defining: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<f64>,
}

impl Residuals {
    fn dense(value: f64) -> Self {
        Self {
            max: value,
            defining: Some(value),
            ..Self::default()
        }
    }
}

/// Per-route value reported by a cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteValue {
    pub route: Route,
    pub qfi: f64,
    pub residual_max: f64,
}

/// Cross-check summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub routes: Vec<RouteValue>,
    pub tolerance: f64,
    pub max_discrepancy: f64,
    pub agreed: bool,
}

/// Output of a single computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: String,
    pub family: String,
    pub parameter: String,
    pub theta: f64,
    pub method: Method,
    pub route: Option<Route>,
    pub qfi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sld: Option<SldPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<Agreement>,
    pub derivative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,
    pub elapsed_seconds: f64,
}

impl ResultRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("record: {e}")))
    }
}

/// Result of running one route.
#[derive(Debug, Clone)]
pub struct RouteOutcome {
    pub route: Route,
    pub qfi: f64,
    pub sld: SldPayload,
    pub residuals: Residuals,
    pub derivative: DerivativeKind,
    pub step: Option<f64>,
    pub fock_dim: Option<usize>,
}

fn derivative_name(kind: DerivativeKind) -> &'static str {
    match kind {
        DerivativeKind::Analytic => "analytic",
        DerivativeKind::CentralDifference => "central_difference",
        DerivativeKind::Richardson => "richardson",
    }
}

fn dense_outcome(
    route: Route,
    rho: &HermitianOperator,
    rhodot: &HermitianOperator,
    result: SldResult,
    derivative: DerivativeKind,
    step: Option<f64>,
) -> RouteOutcome {
    let r = defining_residual(rho, rhodot, &result.sld);
    RouteOutcome {
        route,
        qfi: result.qfi,
        sld: SldPayload::dense(&result.sld),
        residuals: Residuals::dense(r),
        derivative,
        step,
        fock_dim: None,
    }
}

/// Whether the order-40 series is accurate enough to take part in a cross-check.
///
/// The truncation error behaves like `2 (s/π)^{order+2}` for spread `s`.
pub fn series_is_reliable(spread: f64) -> bool {
    let x = spread / std::f64::consts::PI;
    x < 1.0 && 2.0 * x.powi(DEFAULT_SERIES_ORDER as i32 + 2) <= SERIES_TRUNCATION_BUDGET
}

/// Runs one route on `family` at `theta`.
pub fn run_route(family: &Family, theta: f64, route: Route, fd: FdOptions, fock_dim: usize) -> Result<RouteOutcome> {
    match route {
        Route::Eigenbasis | Route::Direct | Route::Series | Route::Unitary => {
            let (state, gdot, kind, step) = family.exponential_derivative(theta, fd)?;
            let rho = state.density();
            let exact = rhodot_eigenbasis(&state, &gdot)?;
            match route {
                Route::Eigenbasis => {
                    let r = sld_eigenbasis(&state, &gdot)?;
                    Ok(dense_outcome(route, &rho, &exact, r, kind, step))
                }
                Route::Direct => {
                    let rhodot = rhodot_wilcox(&state, &gdot, WILCOX_ORDER)?;
                    let r = sld_direct(&rho, &rhodot)?;
                    Ok(dense_outcome(route, &rho, &rhodot, r, kind, step))
                }
                Route::Series => {
                    let r = sld_series(&state, &gdot, DEFAULT_SERIES_ORDER)?;
                    Ok(dense_outcome(route, &rho, &exact, r, kind, step))
                }
                _ => {
                    let Family::UnitaryRotation { h, .. } = family else {
                        return Err(Error::Validation("unitary route needs a unitary_rotation family".into()));
                    };
                    let h = hermitian_from_rows(h, "h")?;
                    let r = sld_unitary_family(&state, &h)?;
                    Ok(dense_outcome(route, &rho, &exact, r, kind, step))
                }
            }
        }
        Route::Moments | Route::Pure | Route::Degenerate => {
            let (m, d, kind, step) = family.moment_derivative(theta, fd)?;
            let sld = match route {
                Route::Moments => sld_from_moments(&m, &d)?,
                Route::Pure => sld_pure(&m, &d)?,
                _ => sld_degenerate(&m, &d)?,
            };
            let qfi = qfi_of_sld(&m, &d, &sld)?;
            Ok(quadratic_outcome(route, &m, &d, &sld, qfi, kind, step))
        }
        Route::Generator => {
            let (g, gd, kind, step) = family.generator_derivative(theta, fd)?;
            let (m, d, _, _) = family.moment_derivative(theta, FdOptions::default())?;
            let sld = sld_from_generator(&g, &gd)?;
            let qfi = qfi_from_generator(&g, &gd)?;
            Ok(quadratic_outcome(route, &m, &d, &sld, qfi, kind, step))
        }
        Route::FockOracle => {
            let h = fd.step_at(theta);
            let render = |t: f64, n: usize| family.density(t, n);
            let dim = if family.is_truncated() {
                fock_dim
            } else {
                family.exponential(theta)?.dim()
            };
            let (qfi, sld) = if family.is_truncated() {
                let r = oracle_qfi(&render, theta, h, dim)?;
                (r.qfi, r.sld)
            } else {
                let r = crate::fockspace::oracle_sld(&render, theta, h, dim)?;
                (r.qfi, r.sld)
            };
            let rho = render(theta, dim)?;
            let rhodot = HermitianOperator::hermitian_part(
                (render(theta + h, dim)?.matrix() - render(theta - h, dim)?.matrix()).scale(0.5 / h),
            );
            let r = defining_residual(&rho, &rhodot, &sld);
            Ok(RouteOutcome {
                route,
                qfi,
                sld: SldPayload::dense(&sld),
                residuals: Residuals::dense(r),
                derivative: DerivativeKind::CentralDifference,
                step: Some(h),
                fock_dim: family.is_truncated().then_some(dim),
            })
        }
    }
}

fn quadratic_outcome(
    route: Route,
    m: &crate::gaussian::GaussianMoments,
    d: &crate::gaussian::MomentDerivatives,
    sld: &QuadraticSld,
    qfi: f64,
    derivative: DerivativeKind,
    step: Option<f64>,
) -> RouteOutcome {
    let r = residuals(m, d, sld);
    RouteOutcome {
        route,
        qfi,
        sld: SldPayload::quadratic(sld),
        residuals: Residuals {
            max: r.max(),
            defining: None,
            covariance: Some(r.covariance),
            mean: Some(r.mean),
            trace: Some(r.trace),
        },
        derivative,
        step,
        fock_dim: None,
    }
}

/// Routes a cross-check runs for `family` at `theta`.
pub fn crosscheck_routes(family: &Family, theta: f64) -> Result<Vec<Route>> {
    let mut routes = Vec::new();
    match family.representation() {
        Representation::Exponential => {
            routes.extend([Route::Eigenbasis, Route::Direct]);
            if series_is_reliable(family.exponential(theta)?.spectral_spread()) {
                routes.push(Route::Series);
            }
            if matches!(family, Family::UnitaryRotation { .. }) {
                routes.push(Route::Unitary);
            }
        }
        Representation::Moments => {
            let m = family.moments(theta)?;
            let spectrum = m.symplectic_spectrum();
            let (hi, lo) = (spectrum[0], spectrum[spectrum.len() - 1]);
            routes.push(Route::Moments);
            if lo >= 1.0 + PURE_FLOOR {
                routes.push(Route::Generator);
                if hi - lo <= DEGENERACY_TOLERANCE * hi {
                    routes.push(Route::Degenerate);
                }
            }
            if m.is_pure() {
                routes.push(Route::Pure);
            }
            if family.n_modes() == Some(1) && !matches!(family, Family::ExplicitMoments { .. }) {
                routes.push(Route::FockOracle);
            }
        }
    }
    Ok(routes)
}

fn route_for(method: Method, family: &Family) -> Route {
    match method {
        Method::Moments => Route::Moments,
        Method::Generator => Route::Generator,
        Method::Eigenbasis => Route::Eigenbasis,
        Method::Series => Route::Series,
        Method::FockOracle => Route::FockOracle,
        Method::Auto | Method::Crosscheck => match family.representation() {
            Representation::Exponential => Route::Eigenbasis,
            Representation::Moments => Route::Moments,
        },
    }
}

/// Computes the record for `scenario` with `family` at `theta`.
///
/// A cross-check whose routes disagree still returns its record; the caller
/// decides whether to fail via [`ResultRecord::crosscheck`].
pub fn compute_record(scenario: &Scenario, family: &Family, theta: f64) -> Result<ResultRecord> {
    let start = Instant::now();
    let fd = scenario.fd();
    let (primary, crosscheck) = if scenario.method == Method::Crosscheck {
        let routes = crosscheck_routes(family, theta)?;
        let outcomes = routes
            .iter()
            .map(|&r| run_route(family, theta, r, fd, scenario.fock_dim))
            .collect::<Result<Vec<_>>>()?;
        let with_fock = routes.contains(&Route::FockOracle);
        let tolerance = if with_fock { FOCK_ROUTE_TOLERANCE } else { EXACT_ROUTE_TOLERANCE };
        let mut worst = 0.0f64;
        for (i, a) in outcomes.iter().enumerate() {
            for b in &outcomes[i + 1..] {
                let gap = (a.qfi - b.qfi).abs() / a.qfi.abs().max(b.qfi.abs()).max(1.0);
                worst = worst.max(gap);
            }
        }
        let agreement = Agreement {
            routes: outcomes
                .iter()
                .map(|o| RouteValue {
                    route: o.route,
                    qfi: o.qfi,
                    residual_max: o.residuals.max,
                })
                .collect(),
            tolerance,
            max_discrepancy: worst,
            agreed: worst <= tolerance,
        };
        (outcomes.into_iter().next().expect("at least one route"), Some(agreement))
    } else {
        let route = route_for(scenario.method, family);
        (run_route(family, theta, route, fd, scenario.fock_dim)?, None)
    };

    let crb = if scenario.wants(Output::Crb) {
        Some(crb(primary.qfi, scenario.trials)?)
    } else {
        None
    };
    let want_sld = scenario.wants(Output::Sld);
    let residual_max = crosscheck
        .as_ref()
        .map(|a| a.routes.iter().map(|r| r.residual_max).fold(0.0, f64::max));
    let mut residuals = primary.residuals;
    if let Some(max) = residual_max {
        residuals.max = max;
    }
    Ok(ResultRecord {
        schema_version: SCHEMA_VERSION.into(),
        family: family.kind().into(),
        parameter: family.parameter_name().into(),
        theta,
        method: scenario.method,
        route: Some(primary.route),
        qfi: primary.qfi,
        crb,
        sld: want_sld.then_some(primary.sld),
        residuals: (want_sld || scenario.wants(Output::Residuals)).then_some(residuals),
        crosscheck,
        derivative: derivative_name(primary.derivative).into(),
        fd_step: primary.step,
        fock_dim: primary.fock_dim,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fails with `RouteMismatch` when a cross-check record did not agree.
pub fn check_agreement(record: &ResultRecord) -> Result<()> {
    match &record.crosscheck {
        Some(a) if !a.agreed => {
            let detail: Vec<String> = a.routes.iter().map(|r| format!("{:?}={}", r.route, r.qfi)).collect();
            Err(Error::RouteMismatch(format!(
                "max relative discrepancy {:e} exceeds {:e} ({})",
                a.max_discrepancy,
                a.tolerance,
                detail.join(", ")
            )))
        }
        _ => Ok(()),
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub value: Option<f64>,
    pub record: ResultRecord,
}

/// A failing sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub theta: f64,
    pub value: Option<f64>,
    pub error: Error,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.value {
            Some(v) => write!(f, "sweep point {v} (theta = {}) failed: {}", self.theta, self.error),
            None => write!(f, "sweep point theta = {} failed: {}", self.theta, self.error),
        }
    }
}

/// Evaluates every sweep point in parallel; rows come back in sweep order.
pub fn run_sweep(scenario: &Scenario) -> std::result::Result<Vec<SweepRow>, SweepFailure> {
    let wrap = |error| SweepFailure {
        theta: scenario.theta,
        value: None,
        error,
    };
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| wrap(Error::Validation("scenario has no sweep block".into())))?;
    let points = sweep.points().map_err(wrap)?;
    let mut scenario = scenario.clone();
    if !scenario.wants(Output::Residuals) {
        scenario.outputs.push(Output::Residuals);
    }
    let scenario = &scenario;
    points
        .par_iter()
        .map(|&p| {
            let (family, theta, value) = match &sweep.variable {
                Some(name) => (scenario.family.with_field(name, p), scenario.theta, Some(p)),
                None => (Ok(scenario.family.clone()), p, None),
            };
            let fail = |error| SweepFailure { theta, value, error };
            let family = family.map_err(fail)?;
            let record = compute_record(scenario, &family, theta).map_err(fail)?;
            check_agreement(&record).map_err(fail)?;
            Ok(SweepRow { theta, value, record })
        })
        .collect()
}

/// Writes sweep rows as CSV.
pub fn write_sweep_csv<W: Write>(out: W, scenario: &Scenario, rows: &[SweepRow]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let variable = scenario.sweep.as_ref().and_then(|s| s.variable.clone());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["theta".to_string()];
    header.extend(variable.clone());
    header.extend(["qfi", "residual_max", "method", "schema_version"].map(String::from));
    w.write_record(&header).map_err(io)?;
    for row in rows {
        let mut fields = vec![row.theta.to_string()];
        if let Some(v) = row.value {
            fields.push(v.to_string());
        }
        let route = row.record.route.map(route_name).unwrap_or("none");
        let residual = row.record.residuals.map(|r| format!("{:e}", r.max)).unwrap_or_default();
        fields.extend([row.record.qfi.to_string(), residual, route.into(), SCHEMA_VERSION.into()]);
        w.write_record(&fields).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn route_name(r: Route) -> &'static str {
    match r {
        Route::Eigenbasis => "eigenbasis",
        Route::Direct => "direct",
        Route::Series => "series",
        Route::Unitary => "unitary",
        Route::Moments => "moments",
        Route::Generator => "generator",
        Route::Pure => "pure",
        Route::Degenerate => "degenerate",
        Route::FockOracle => "fock_oracle",
    }
}

/// Rows `(n, exact f_n, decimal f_n)` for `n = 0..=n_max`.
pub fn coefficient_rows(n_max: usize) -> Result<Vec<(usize, String, f64)>> {
    if n_max > MAX_SERIES_ORDER {
        return Err(Error::Argument(format!("n must be at most {MAX_SERIES_ORDER}, got {n_max}")));
    }
    (0..=n_max)
        .map(|n| {
            let f = f_coefficient(n)?;
            let decimal = crate::expstate::series_coefficients().float(n).expect("within table");
            Ok((n, f.to_string(), decimal))
        })
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "sldkit", version, about = "SLD and quantum Fisher information for exponential and Gaussian states")]
struct Cli {
    /// Finite-difference step override.
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Fock truncation override.
    #[arg(long, global = true)]
    fock_dim: Option<usize>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one scenario and write a JSON record.
    Compute {
        #[arg(short, long)]
        scenario: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a scenario's sweep block and write a CSV table.
    Sweep {
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every applicable route and fail if any pair disagrees.
    Crosscheck {
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the series coefficients f_0..f_n.
    Coeffs {
        #[arg(long)]
        n: usize,
    },
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(h) = cli.fd_step {
        s.fd_step = Some(h);
    }
    if let Some(n) = cli.fock_dim {
        s.fock_dim = n;
    }
    s.validate()?;
    Ok(s)
}

fn dispatch(cli: &Cli) -> std::result::Result<(), (Error, String)> {
    let plain = |e: Error| {
        let msg = e.to_string();
        (e, msg)
    };
    match &cli.command {
        Command::Compute { scenario, output } => {
            let s = load(cli, scenario).map_err(plain)?;
            let record = compute_record(&s, &s.family, s.theta).map_err(plain)?;
            emit(output.as_deref(), &record.to_json()).map_err(plain)?;
            check_agreement(&record).map_err(plain)
        }
        Command::Crosscheck { scenario, output } => {
            let mut s = load(cli, scenario).map_err(plain)?;
            s.method = Method::Crosscheck;
            let record = compute_record(&s, &s.family, s.theta).map_err(plain)?;
            emit(output.as_deref(), &record.to_json()).map_err(plain)?;
            check_agreement(&record).map_err(plain)
        }
        Command::Sweep { scenario, output } => {
            let s = load(cli, scenario).map_err(plain)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs.unwrap_or(0))
                .build()
                .map_err(|e| plain(Error::Argument(e.to_string())))?;
            let rows = pool.install(|| run_sweep(&s)).map_err(|f| {
                let msg = f.to_string();
                (f.error, msg)
            })?;
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &s, &rows).map_err(plain)?;
            match output {
                Some(p) => fs::write(p, &buf).map_err(|e| plain(Error::Io(format!("{}: {e}", p.display())))),
                None => std::io::stdout().write_all(&buf).map_err(|e| plain(Error::Io(e.to_string()))),
            }
        }
        Command::Coeffs { n } => {
            let rows = coefficient_rows(*n).map_err(plain)?;
            let mut text = String::from("n\tf_n\tdecimal\n");
            for (n, exact, decimal) in rows {
                text.push_str(&format!("{n}\t{exact}\t{decimal:.17e}\n"));
            }
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 2 for invalid input, 3 for
/// numerical-domain failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err((e, msg)) => {
            eprintln!("error: {msg}");
            e.exit_code()
        }
    }
}
