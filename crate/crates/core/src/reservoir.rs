//! Echo state network construction and state generation.
//!
//! The network is driven by a trajectory: `s(t+1) = (1 - C a) s(t) +
//! C tanh(W_in u(t+1) + W s(t) + nu(t))` with sparse internal weights `W`
//! rescaled to a target spectral radius and a small uniform noise term
//! `nu` injected inside the nonlinearity. The state sequence concatenated
//! with the inputs forms the data matrices handed to the Koopman fits.
//!
//! All randomness flows from one 64-bit seed through separate ChaCha8
//! streams (weights / initial state / noise), so toggling the noise level
//! never changes the realized weights and every run is reproducible.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemName, TrajectoryData};
use crate::error::{Error, Result};
use crate::linalg;

const STREAM_WEIGHTS: u64 = 1;
const STREAM_INITIAL_STATE: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// A seeded generator for one of the named substreams.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Echo state network hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    /// Number of internal states N.
    pub n: usize,
    /// Input dimension K.
    pub input_dim: usize,
    /// Timescale constant C.
    pub timescale: f64,
    /// Leaking rate a.
    pub leak_rate: f64,
    /// Density of the internal weight matrix, in (0, 1].
    pub density: f64,
    /// Target spectral radius of the internal weights.
    pub spectral_radius: f64,
    /// Input weights are uniform on [-input_gain, input_gain].
    pub input_gain: f64,
    /// Noise amplitude; the noise term is uniform on [-noise, noise].
    pub noise: f64,
    /// Initial transient steps dropped from the stored states.
    pub washout: usize,
    /// Master seed for weights, initial state and noise.
    pub seed: u64,
}

impl ReservoirConfig {
    /// The benchmark settings: N + K internal-plus-input states total 1000,
    /// spectral radius 0.79, leak rate 3 (1 for Mackey-Glass), noise 1e-4,
    /// timescale 0.45 for Van der Pol and Duffing and 0.11 otherwise,
    /// density 0.02, input gain 1, washout 100.
    pub fn benchmark(system: SystemName, seed: u64) -> Self {
        let input_dim = match system {
            SystemName::MackeyGlass => 1,
            SystemName::VanDerPol | SystemName::Duffing => 2,
            SystemName::Rossler | SystemName::Lorenz63 => 3,
        };
        let timescale = match system {
            SystemName::VanDerPol | SystemName::Duffing => 0.45,
            _ => 0.11,
        };
        let leak_rate = match system {
            SystemName::MackeyGlass => 1.0,
            _ => 3.0,
        };
        ReservoirConfig {
            n: 1000 - input_dim,
            input_dim,
            timescale,
            leak_rate,
            density: 0.02,
            spectral_radius: 0.79,
            input_gain: 1.0,
            noise: 1e-4,
            washout: 100,
            seed,
        }
    }

    /// `|1 - C (a - rho)|`; the echo state property requires this below 1.
    pub fn esp_margin(&self) -> f64 {
        (1.0 - self.timescale * (self.leak_rate - self.spectral_radius)).abs()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.input_dim == 0 {
            return Err(Error::InvalidInput("reservoir sizes must be positive".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if self.noise < 0.0 {
            return Err(Error::InvalidInput("noise amplitude must be >= 0".into()));
        }
        if !(self.spectral_radius > 0.0) {
            return Err(Error::InvalidInput("spectral radius target must be > 0".into()));
        }
        if self.esp_margin() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "echo state property violated: |1 - C(a - rho)| = {} >= 1",
                self.esp_margin()
            )));
        }
        Ok(())
    }
}

/// Realized input and internal weight matrices.
#[derive(Debug, Clone)]
pub struct ReservoirWeights {
    /// N x K input weights.
    pub w_in: Array2<f64>,
    /// N x N internal weights, rescaled to the target spectral radius.
    pub w: Array2<f64>,
}

/// Draw the input and internal weights from the config's weight stream.
///
/// `w_in` is dense with i.i.d. uniform entries on [-input_gain, input_gain].
/// Each entry of `w` is nonzero with probability `density`, uniform on
/// [-1, 1], and the whole matrix is then rescaled so its spectral radius
/// equals the target exactly.
pub fn build_weights(cfg: &ReservoirConfig) -> Result<ReservoirWeights> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, STREAM_WEIGHTS);
    let w_in = Array2::from_shape_fn((cfg.n, cfg.input_dim), |_| {
        rng.gen_range(-cfg.input_gain..=cfg.input_gain)
    });
    let mut w = Array2::zeros((cfg.n, cfg.n));
    for i in 0..cfg.n {
        for j in 0..cfg.n {
            if rng.gen::<f64>() < cfg.density {
                w[[i, j]] = rng.gen_range(-1.0..=1.0);
            }
        }
    }
    let rho_raw = linalg::spectral_radius(&w)?;
    if rho_raw <= f64::MIN_POSITIVE {
        return Err(Error::InvalidInput(
            "raw internal weights have zero spectral radius; increase density or change seed"
                .into(),
        ));
    }
    w *= cfg.spectral_radius / rho_raw;
    Ok(ReservoirWeights { w_in, w })
}

/// The initial internal state: i.i.d. uniform on [0, 1].
pub fn initial_state(cfg: &ReservoirConfig) -> Array1<f64> {
    let mut rng = stream_rng(cfg.seed, STREAM_INITIAL_STATE);
    Array1::from_shape_fn(cfg.n, |_| rng.gen::<f64>())
}

/// A realized reservoir: weights plus the post-washout state sequence.
#[derive(Debug, Clone)]
pub struct ReservoirRun {
    pub w_in: Array2<f64>,
    pub w: Array2<f64>,
    /// (N + K) x T_retained; each column is the internal state stacked on
    /// the input at the same time index.
    pub concatenated: Array2<f64>,
    pub n: usize,
    pub input_dim: usize,
}

impl ReservoirRun {
    /// The internal-state block (first N rows of `concatenated`).
    pub fn states(&self) -> ndarray::ArrayView2<'_, f64> {
        self.concatenated.slice(s![..self.n, ..])
    }

    /// Retained sample count after washout.
    pub fn retained(&self) -> usize {
        self.concatenated.ncols()
    }

    /// Shift pair over the retained columns: S holds columns 1..T-1, S'
    /// holds columns 2..T.
    pub fn state_matrices(&self) -> Result<StateMatrices> {
        let t = self.retained();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 retained samples to form shift matrices, have {t}"
            )));
        }
        Ok(StateMatrices {
            s: self.concatenated.slice(s![.., ..t - 1]).to_owned(),
            s_prime: self.concatenated.slice(s![.., 1..]).to_owned(),
            n: self.n,
            input_dim: self.input_dim,
        })
    }
}

/// The pair (S, S') of concatenated-state snapshot matrices.
#[derive(Debug, Clone)]
pub struct StateMatrices {
    /// (N + K) x (T - 1), columns s_bar(1..T-1).
    pub s: Array2<f64>,
    /// (N + K) x (T - 1), columns s_bar(2..T).
    pub s_prime: Array2<f64>,
    pub n: usize,
    pub input_dim: usize,
}

impl StateMatrices {
    pub fn dim(&self) -> usize {
        self.n + self.input_dim
    }

    pub fn snapshots(&self) -> usize {
        self.s.ncols()
    }
}

/// Drive the reservoir with a trajectory from an explicit initial state.
///
/// The input must already be rescaled to [-1, 1]. The noise stream is
/// derived from the config seed, so two calls with different initial
/// states see the identical noise sequence.
pub fn drive(
    cfg: &ReservoirConfig,
    weights: &ReservoirWeights,
    input: &TrajectoryData,
    s0: &Array1<f64>,
) -> Result<ReservoirRun> {
    if input.state_dim() != cfg.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "input dimension {} does not match config ({})",
            input.state_dim(),
            cfg.input_dim
        )));
    }
    if s0.len() != cfg.n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, expected {}",
            s0.len(),
            cfg.n
        )));
    }
    let t_total = input.len();
    if cfg.washout + 2 > t_total {
        return Err(Error::InvalidInput(format!(
            "washout {} leaves fewer than 2 of {} samples",
            cfg.washout, t_total
        )));
    }
    if input.states.iter().any(|v| v.abs() > 1.0 + 1e-9) {
        return Err(Error::InvalidInput(
            "input trajectory is not rescaled to [-1, 1]".into(),
        ));
    }

    let mut noise_rng = stream_rng(cfg.seed, STREAM_NOISE);
    let n_bar = cfg.n + cfg.input_dim;
    let retained = t_total - cfg.washout;
    let mut concatenated = Array2::zeros((n_bar, retained));

    let leak = 1.0 - cfg.timescale * cfg.leak_rate;
    let mut state = s0.clone();
    for t in 0..t_total {
        let u_next = input.states.row(t);
        let mut pre = weights.w.dot(&state);
        pre += &weights.w_in.dot(&u_next);
        if cfg.noise > 0.0 {
            for v in pre.iter_mut() {
                *v += noise_rng.gen_range(-cfg.noise..=cfg.noise);
            }
        }
        state = &state * leak + &pre.mapv(f64::tanh) * cfg.timescale;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("reservoir state at step {}", t + 1)));
        }
        if t >= cfg.washout {
            let col = t - cfg.washout;
            concatenated
                .slice_mut(s![..cfg.n, col])
                .assign(&state);
            concatenated
                .slice_mut(s![cfg.n.., col])
                .assign(&u_next);
        }
    }

    Ok(ReservoirRun {
        w_in: weights.w_in.clone(),
        w: weights.w.clone(),
        concatenated,
        n: cfg.n,
        input_dim: cfg.input_dim,
    })
}

/// Build the weights, draw the seeded initial state, and drive the
/// reservoir with the given trajectory.
pub fn run(cfg: &ReservoirConfig, input: &TrajectoryData) -> Result<ReservoirRun> {
    let weights = build_weights(cfg)?;
    let s0 = initial_state(cfg);
    drive(cfg, &weights, input, &s0)
}
