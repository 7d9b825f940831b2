//! Benchmark dynamical systems: fixed-step integration, sampling, and
//! per-component rescaling to [-1, 1].
//!
//! Five systems are supported: Van der Pol, Duffing, Mackey-Glass (a delay
//! equation), Roessler, and Lorenz-63. The ODEs are integrated with
//! classical RK4 using 10 internal sub-steps per sample; the delay equation
//! uses 20 sub-steps and cubic Hermite interpolation of the stored past
//! solution. Fixed steps keep every trajectory bit-reproducible.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Names of the supported benchmark systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    VanDerPol,
    Duffing,
    MackeyGlass,
    Rossler,
    Lorenz63,
}

impl SystemName {
    pub const ALL: [SystemName; 5] = [
        SystemName::VanDerPol,
        SystemName::Duffing,
        SystemName::MackeyGlass,
        SystemName::Rossler,
        SystemName::Lorenz63,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SystemName::VanDerPol => "van_der_pol",
            SystemName::Duffing => "duffing",
            SystemName::MackeyGlass => "mackey_glass",
            SystemName::Rossler => "rossler",
            SystemName::Lorenz63 => "lorenz63",
        }
    }
}

impl fmt::Display for SystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SystemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "van_der_pol" => Ok(SystemName::VanDerPol),
            "duffing" => Ok(SystemName::Duffing),
            "mackey_glass" => Ok(SystemName::MackeyGlass),
            "rossler" => Ok(SystemName::Rossler),
            "lorenz63" => Ok(SystemName::Lorenz63),
            other => Err(Error::InvalidInput(format!("unknown system '{other}'"))),
        }
    }
}

/// A benchmark system together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    VanDerPol { mu: f64 },
    Duffing { alpha: f64, beta: f64, gamma: f64 },
    MackeyGlass { alpha: f64, beta: f64, n: f64, tau: f64 },
    Rossler { alpha: f64, beta: f64, gamma: f64 },
    Lorenz63 { s: f64, r: f64, b: f64 },
}

impl SystemSpec {
    /// The standard parameterization of each system.
    pub fn standard(name: SystemName) -> Self {
        match name {
            SystemName::VanDerPol => SystemSpec::VanDerPol { mu: 1.0 },
            SystemName::Duffing => SystemSpec::Duffing { alpha: 1.0, beta: -1.0, gamma: 0.5 },
            SystemName::MackeyGlass => {
                SystemSpec::MackeyGlass { alpha: 0.2, beta: 0.1, n: 10.0, tau: 17.0 }
            }
            SystemName::Rossler => SystemSpec::Rossler { alpha: 0.1, beta: 0.1, gamma: 14.0 },
            SystemName::Lorenz63 => SystemSpec::Lorenz63 { s: 10.0, r: 28.0, b: 8.0 / 3.0 },
        }
    }

    pub fn name(&self) -> SystemName {
        match self {
            SystemSpec::VanDerPol { .. } => SystemName::VanDerPol,
            SystemSpec::Duffing { .. } => SystemName::Duffing,
            SystemSpec::MackeyGlass { .. } => SystemName::MackeyGlass,
            SystemSpec::Rossler { .. } => SystemName::Rossler,
            SystemSpec::Lorenz63 { .. } => SystemName::Lorenz63,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemSpec::VanDerPol { .. } | SystemSpec::Duffing { .. } => 2,
            SystemSpec::MackeyGlass { .. } => 1,
            SystemSpec::Rossler { .. } | SystemSpec::Lorenz63 { .. } => 3,
        }
    }

    /// Delay of the system; zero for the ODEs.
    pub fn delay(&self) -> f64 {
        match self {
            SystemSpec::MackeyGlass { tau, .. } => *tau,
            _ => 0.0,
        }
    }

    /// Right-hand side for the ODE systems.
    fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        match *self {
            SystemSpec::VanDerPol { mu } => {
                dx[0] = x[1];
                dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
            }
            SystemSpec::Duffing { alpha, beta, gamma } => {
                dx[0] = x[1];
                dx[1] = -gamma * x[1] - (alpha * x[0] * x[0] + beta) * x[0];
            }
            SystemSpec::Rossler { alpha, beta, gamma } => {
                dx[0] = -x[1] - x[2];
                dx[1] = x[0] + alpha * x[1];
                dx[2] = beta + (x[0] - gamma) * x[2];
            }
            SystemSpec::Lorenz63 { s, r, b } => {
                dx[0] = s * (x[1] - x[0]);
                dx[1] = r * x[0] - x[1] - x[0] * x[2];
                dx[2] = x[0] * x[1] - b * x[2];
            }
            SystemSpec::MackeyGlass { .. } => unreachable!("delay system has no plain rhs"),
        }
    }
}

/// Per-component affine map `y = (x - offset) * gain` plus the raw extremes
/// it was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScale {
    pub offset: f64,
    pub gain: f64,
    pub raw_min: f64,
    pub raw_max: f64,
}

/// The scaling applied to a whole trajectory, one record per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub components: Vec<ComponentScale>,
}

/// A sampled trajectory: `states` is T x K, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryData {
    pub states: Array2<f64>,
    pub time_step: f64,
    pub t0: f64,
    /// Present once the trajectory has been rescaled to [-1, 1].
    pub scaling: Option<ScalingRecord>,
}

impl TrajectoryData {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    /// Per-component (min, max) of the stored states.
    pub fn component_extremes(&self) -> Vec<(f64, f64)> {
        (0..self.state_dim())
            .map(|j| {
                let col = self.states.column(j);
                let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (min, max)
            })
            .collect()
    }

    /// Mean of each component.
    pub fn component_means(&self) -> Vec<f64> {
        (0..self.state_dim())
            .map(|j| self.states.column(j).sum() / self.len() as f64)
            .collect()
    }

    /// Write as CSV with header `t,x1,...,xK`; if the trajectory carries a
    /// scaling record it is written next to it as `<path>.scaling.json`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut header = String::from("t");
        for j in 0..self.state_dim() {
            header.push_str(&format!(",x{}", j + 1));
        }
        let mut lines = Vec::with_capacity(self.len());
        for (i, row) in self.states.outer_iter().enumerate() {
            let t = self.t0 + i as f64 * self.time_step;
            let mut line = io::fmt_f64(t);
            for v in row.iter() {
                line.push(',');
                line.push_str(&io::fmt_f64(*v));
            }
            lines.push(line);
        }
        io::write_lines(path, &header, &lines)?;
        if let Some(scaling) = &self.scaling {
            let sidecar = sidecar_path(path);
            let json = serde_json::to_string_pretty(scaling)
                .map_err(|e| Error::Parse(format!("scaling record: {e}")))?;
            std::fs::write(sidecar, json)?;
        }
        Ok(())
    }

    /// Read a trajectory written by [`TrajectoryData::save_csv`]. Non-finite
    /// entries and a non-uniform time grid are rejected.
    pub fn load_csv(path: &Path) -> Result<TrajectoryData> {
        let (header, rows) = io::read_lines(path)?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.is_empty() || cols[0] != "t" {
            return Err(Error::Parse(format!("{}: expected 't,x1,...' header", path.display())));
        }
        let k = cols.len() - 1;
        if k == 0 || rows.len() < 2 {
            return Err(Error::Parse(format!("{}: too little data", path.display())));
        }
        let mut times = Vec::with_capacity(rows.len());
        let mut states = Array2::zeros((rows.len(), k));
        for (i, row) in rows.iter().enumerate() {
            let fields = io::parse_f64_row(row, k + 1, path)?;
            times.push(fields[0]);
            for j in 0..k {
                states[[i, j]] = fields[j + 1];
            }
        }
        crate::linalg::ensure_finite(&states, "trajectory CSV")?;
        let h = times[1] - times[0];
        for w in times.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
                return Err(Error::Parse(format!("{}: non-uniform time grid", path.display())));
            }
        }
        let scaling = {
            let sidecar = sidecar_path(path);
            if sidecar.exists() {
                let json = std::fs::read_to_string(sidecar)?;
                Some(
                    serde_json::from_str(&json)
                        .map_err(|e| Error::Parse(format!("scaling record: {e}")))?,
                )
            } else {
                None
            }
        };
        Ok(TrajectoryData { states, time_step: h, t0: times[0], scaling })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".scaling.json");
    std::path::PathBuf::from(os)
}

/// One classical RK4 step of `x' = f(t, x)`.
pub fn rk4_step<F>(f: &F, t: f64, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = x.len();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    f(t, x, &mut k1);
    for i in 0..dim {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..dim {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..dim {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);

    (0..dim)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate `x' = f(t, x)` over `[t0, t1]` with `n_steps` fixed RK4 steps,
/// returning all `n_steps + 1` nodes including both endpoints.
pub fn integrate_fixed<F>(f: &F, x0: &[f64], t0: f64, t1: f64, n_steps: usize) -> Result<Array2<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = x0.len();
    let h = (t1 - t0) / n_steps as f64;
    let mut out = Array2::zeros((n_steps + 1, dim));
    let mut x = x0.to_vec();
    out.row_mut(0).assign(&Array1::from(x.clone()));
    for k in 0..n_steps {
        let t = t0 + k as f64 * h;
        x = rk4_step(f, t, &x, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: t + h });
        }
        out.row_mut(k + 1).assign(&Array1::from(x.clone()));
    }
    Ok(out)
}

fn sample_count(t_span: (f64, f64), h: f64) -> Result<usize> {
    let len = t_span.1 - t_span.0;
    if h <= 0.0 || len <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "bad time grid: span [{}, {}], step {h}",
            t_span.0, t_span.1
        )));
    }
    let n = (len / h).round();
    if (n * h - len).abs() > 1e-9 * len.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "step {h} does not divide the span length {len}"
        )));
    }
    Ok(n as usize + 1)
}

/// Internal sub-steps per sample for the ODE systems.
pub const ODE_SUBSTEPS: usize = 10;
/// Internal sub-steps per sample for the delay system.
pub const DDE_SUBSTEPS: usize = 20;

/// Integrate an ODE system, sampling at `t0 + k h`. The integrator takes
/// [`ODE_SUBSTEPS`] RK4 sub-steps between consecutive samples.
pub fn integrate_ode(
    spec: &SystemSpec,
    x0: &[f64],
    t_span: (f64, f64),
    h: f64,
) -> Result<TrajectoryData> {
    if matches!(spec, SystemSpec::MackeyGlass { .. }) {
        return Err(Error::InvalidInput(
            "mackey_glass is a delay system; use integrate_dde".into(),
        ));
    }
    if x0.len() != spec.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} expects {} state components, got {}",
            spec.name(),
            spec.state_dim(),
            x0.len()
        )));
    }
    let samples = sample_count(t_span, h)?;
    let n_steps = (samples - 1) * ODE_SUBSTEPS;
    let f = |_t: f64, x: &[f64], dx: &mut [f64]| spec.rhs(x, dx);
    let dense = integrate_fixed(&f, x0, t_span.0, t_span.1, n_steps)?;
    let mut states = Array2::zeros((samples, spec.state_dim()));
    for i in 0..samples {
        states.row_mut(i).assign(&dense.row(i * ODE_SUBSTEPS));
    }
    Ok(TrajectoryData { states, time_step: h, t0: t_span.0, scaling: None })
}

/// Integrate the Mackey-Glass delay equation from a constant history,
/// sampling at `t0 + k h`. The delayed value is looked up by cubic Hermite
/// interpolation over the internal solution nodes ([`DDE_SUBSTEPS`] per
/// sample); the value at t0 itself is taken equal to the history constant.
pub fn integrate_dde(
    spec: &SystemSpec,
    history: f64,
    t_span: (f64, f64),
    h: f64,
) -> Result<TrajectoryData> {
    let (alpha, beta, n_exp, tau) = match *spec {
        SystemSpec::MackeyGlass { alpha, beta, n, tau } => (alpha, beta, n, tau),
        _ => {
            return Err(Error::InvalidInput(format!(
                "integrate_dde supports mackey_glass only, got {}",
                spec.name()
            )))
        }
    };
    let samples = sample_count(t_span, h)?;
    let n_steps = (samples - 1) * DDE_SUBSTEPS;
    let h_int = h / DDE_SUBSTEPS as f64;
    let t0 = t_span.0;

    // Dense node storage: values and derivatives for Hermite interpolation.
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut derivs: Vec<f64> = Vec::with_capacity(n_steps + 1);
    values.push(history);

    let lookup = |q: f64, values: &[f64], derivs: &[f64]| -> f64 {
        if q <= t0 {
            return history;
        }
        let pos = (q - t0) / h_int;
        let mut k = pos.floor() as usize;
        if k + 1 >= values.len() {
            k = values.len().saturating_sub(2);
        }
        let theta = pos - k as f64;
        if theta == 0.0 {
            return values[k];
        }
        let (y0, y1) = (values[k], values[k + 1]);
        let (d0, d1) = (derivs[k], derivs[k + 1]);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + theta) * h_int * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h_int * d1
    };

    let rhs = |t: f64, x: f64, values: &[f64], derivs: &[f64]| -> f64 {
        let x_tau = lookup(t - tau, values, derivs);
        alpha * x_tau / (1.0 + x_tau.powf(n_exp)) - beta * x
    };

    for k in 0..n_steps {
        let t = t0 + k as f64 * h_int;
        let x = values[k];
        let k1 = rhs(t, x, &values, &derivs);
        derivs.push(k1);
        let k2 = rhs(t + 0.5 * h_int, x + 0.5 * h_int * k1, &values, &derivs);
        let k3 = rhs(t + 0.5 * h_int, x + 0.5 * h_int * k2, &values, &derivs);
        let k4 = rhs(t + h_int, x + h_int * k3, &values, &derivs);
        let next = x + h_int / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::BlowUp { time: t + h_int });
        }
        values.push(next);
    }
    derivs.push(rhs(t_span.1, values[n_steps], &values, &derivs));

    let mut states = Array2::zeros((samples, 1));
    for i in 0..samples {
        states[[i, 0]] = values[i * DDE_SUBSTEPS];
    }
    Ok(TrajectoryData { states, time_step: h, t0, scaling: None })
}

/// Rescale each component affinely so its minimum maps to -1 and its
/// maximum to +1. Fails on constant components.
pub fn rescale(raw: &TrajectoryData) -> Result<TrajectoryData> {
    if raw.scaling.is_some() {
        return Err(Error::InvalidInput("trajectory is already rescaled".into()));
    }
    let extremes = raw.component_extremes();
    let mut components = Vec::with_capacity(extremes.len());
    for (j, &(min, max)) in extremes.iter().enumerate() {
        let span = max - min;
        if !(span > f64::EPSILON * min.abs().max(max.abs()).max(1.0)) {
            return Err(Error::DegenerateScaling { component: j });
        }
        components.push(ComponentScale {
            offset: (min + max) / 2.0,
            gain: 2.0 / span,
            raw_min: min,
            raw_max: max,
        });
    }
    let mut states = raw.states.clone();
    for (j, c) in components.iter().enumerate() {
        states.column_mut(j).mapv_inplace(|x| (x - c.offset) * c.gain);
    }
    Ok(TrajectoryData {
        states,
        time_step: raw.time_step,
        t0: raw.t0,
        scaling: Some(ScalingRecord { components }),
    })
}

/// Invert [`rescale`], restoring the original units.
pub fn unscale(scaled: &TrajectoryData) -> Result<TrajectoryData> {
    let record = scaled
        .scaling
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trajectory carries no scaling record".into()))?;
    let mut states = scaled.states.clone();
    for (j, c) in record.components.iter().enumerate() {
        states.column_mut(j).mapv_inplace(|y| y / c.gain + c.offset);
    }
    Ok(TrajectoryData {
        states,
        time_step: scaled.time_step,
        t0: scaled.t0,
        scaling: None,
    })
}

/// Generate one of the five benchmark datasets with its standard
/// parameters, sampling grid and initial condition, rescaled to [-1, 1].
///
/// Van der Pol: x(0) = (-4, 5), 501 samples over [0, 20];
/// Duffing: x(0) = (-1.21, 0.81), 501 samples over [0, 20];
/// Mackey-Glass: constant history 0.1, 501 samples over [0, 500];
/// Roessler: x(0) = (2, 1, 5), 601 samples over [0, 300];
/// Lorenz-63: x(0) = (3, 3, 19), 751 samples over [0, 15].
/// Initial conditions are in raw (pre-scaling) units.
pub fn make_dataset(name: SystemName) -> Result<TrajectoryData> {
    let spec = SystemSpec::standard(name);
    let raw = match name {
        SystemName::VanDerPol => integrate_ode(&spec, &[-4.0, 5.0], (0.0, 20.0), 0.04)?,
        SystemName::Duffing => integrate_ode(&spec, &[-1.21, 0.81], (0.0, 20.0), 0.04)?,
        SystemName::MackeyGlass => integrate_dde(&spec, 0.1, (0.0, 500.0), 1.0)?,
        SystemName::Rossler => integrate_ode(&spec, &[2.0, 1.0, 5.0], (0.0, 300.0), 0.5)?,
        SystemName::Lorenz63 => integrate_ode(&spec, &[3.0, 3.0, 19.0], (0.0, 15.0), 0.02)?,
    };
    rescale(&raw)
}
