//! Dictionary learning by alternating least squares.
//!
//! The trained dictionary is `W_out s_bar` with `W_out = [W1; W2]`: `L`
//! free readout rows stacked on the fixed input readout
//! `W2 = [0_{K,N}, I_K]`, which pins the projection maps into the
//! dictionary and rules out the all-zero solution. Fitting alternates two
//! linear solves: with the readout fixed, the Koopman matrix is ordinary
//! EDMD on the readout values; with the Koopman matrix fixed, the readout
//! is the solution of a stacked linear system, written either over the
//! weights `W1` or over the dictionary values `Psi1 = W1 S`. The value
//! form is the default: its system matrix is sparse whenever the snapshot
//! count does not exceed the reservoir dimension, which is what the
//! structured solver in [`super::companion`] exploits.

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, SvdFactors};
use crate::reservoir::StateMatrices;

use super::companion::{solve_values_system, StepMatrix};
use super::{fit_edmd_core, Dictionary, KoopmanModel, Method};

/// Which unknown the dictionary-update step solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method2Variant {
    /// Solve for the readout weights `W1` (dense system).
    Weights,
    /// Solve for the dictionary values `Psi1 = W1 S` (sparse system when
    /// the snapshots fit inside the reservoir dimension).
    Values,
}

impl Method2Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method2Variant::Weights => "weights",
            Method2Variant::Values => "values",
        }
    }
}

impl std::str::FromStr for Method2Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Method2Variant::Weights),
            "values" => Ok(Method2Variant::Values),
            other => Err(Error::Parse(format!("unknown variant '{other}'"))),
        }
    }
}

/// Settings for [`method2`].
#[derive(Debug, Clone)]
pub struct Method2Options {
    /// Number of trained dictionary functions L (the full dictionary has
    /// L + K entries).
    pub l: usize,
    pub max_iters: usize,
    /// Stop when the relative residue change between iterations falls
    /// below this.
    pub tol: f64,
    pub variant: Method2Variant,
    /// Seed for the random initial readout.
    pub seed: u64,
    /// Explicit initial readout, overriding the random draw.
    pub initial_w1: Option<Array2<f64>>,
}

impl Method2Options {
    /// The benchmark loop settings: 20 iterations, relative tolerance
    /// 1e-10, value-form update.
    pub fn benchmark(l: usize, seed: u64) -> Self {
        Method2Options {
            l,
            max_iters: 20,
            tol: 1e-10,
            variant: Method2Variant::Values,
            seed,
            initial_w1: None,
        }
    }
}

struct KBlocks {
    k11: Array2<f64>,
    k12: Array2<f64>,
    k21: Array2<f64>,
    k22: Array2<f64>,
}

fn split_k(k: &Array2<f64>, l: usize) -> KBlocks {
    KBlocks {
        k11: k.slice(s![..l, ..l]).to_owned(),
        k12: k.slice(s![..l, l..]).to_owned(),
        k21: k.slice(s![l.., ..l]).to_owned(),
        k22: k.slice(s![l.., l..]).to_owned(),
    }
}

/// Independent terms of the dictionary-update equations:
/// `C1 = K12 Psi2`, `C2 = -Psi2' + K22 Psi2`.
fn independent_terms(
    kb: &KBlocks,
    psi2: &Array2<f64>,
    psi2_prime: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let c1 = kb.k12.dot(psi2);
    let c2 = kb.k22.dot(psi2) - psi2_prime;
    (c1, c2)
}

/// The one-step propagator `A = S^+ S'`, built as a companion matrix
/// (shift plus one solved column) when `S` has full column rank and `S'`
/// is its one-column shift, and densely otherwise.
fn step_matrix(sm: &StateMatrices, factors: &SvdFactors) -> Result<StepMatrix> {
    let n = sm.snapshots();
    let shifted = n >= 2
        && (0..n - 1).all(|t| sm.s_prime.column(t) == sm.s.column(t + 1));
    if shifted && factors.rank == n {
        let last = sm
            .s_prime
            .column(n - 1)
            .to_owned()
            .into_shape((sm.dim(), 1))
            .expect("column reshapes");
        let solved = factors.solve(&last)?;
        Ok(StepMatrix::Companion { last_col: solved.column(0).to_owned() })
    } else {
        Ok(StepMatrix::Dense(factors.solve(&sm.s_prime)?))
    }
}

fn vstack(top: &Array2<f64>, bottom: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(0), &[top.view(), bottom.view()]).expect("matching column counts")
}

/// Fix the readout, fit the Koopman matrix: ordinary EDMD over the
/// readout values, `K = (W_out S') (W_out S)^+`. Returns the matrix, the
/// residue of the fit, and a rank-deficiency flag.
pub fn method2_step1(
    sm: &StateMatrices,
    w_out: &Array2<f64>,
) -> Result<(Array2<f64>, f64, bool)> {
    if w_out.ncols() != sm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "readout has {} columns, state dimension is {}",
            w_out.ncols(),
            sm.dim()
        )));
    }
    fit_edmd_core(&w_out.dot(&sm.s), &w_out.dot(&sm.s_prime))
}

/// The factored expression `W_out S' S^+ W_out^+` for the step-1 matrix.
/// It agrees with [`method2_step1`] only when `W_out S` has full row
/// rank; kept as a cross-check, not used by the fit.
pub fn method2_step1_factored(sm: &StateMatrices, w_out: &Array2<f64>) -> Result<Array2<f64>> {
    let pinv_s = linalg::pinv(&sm.s, None)?;
    let m1 = sm.s_prime.dot(&pinv_s);
    let pinv_w = linalg::pinv(w_out, None)?;
    Ok(w_out.dot(&m1).dot(&pinv_w))
}

/// Fix the Koopman matrix, solve for the readout weights `W1` from the
/// stacked system over `vec(W1)` (the weight form of the update).
pub fn method2_step2_weights(
    sm: &StateMatrices,
    k_matrix: &Array2<f64>,
    l: usize,
) -> Result<Array2<f64>> {
    let d = l + sm.input_dim;
    if k_matrix.dim() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "Koopman matrix is {:?}, expected {d}x{d}",
            k_matrix.dim()
        )));
    }
    let n = sm.snapshots();
    let n_bar = sm.dim();
    let rows = d * n;
    let cols = l * n_bar;
    if rows.saturating_mul(cols) > 20_000_000 {
        return Err(Error::Unsupported(format!(
            "weight-form update would assemble a {rows}x{cols} dense system; \
             use the value-form variant at this scale"
        )));
    }
    let kb = split_k(k_matrix, l);
    let psi2 = sm.s.slice(s![sm.n.., ..]).to_owned();
    let psi2_prime = sm.s_prime.slice(s![sm.n.., ..]).to_owned();
    let (c1, c2) = independent_terms(&kb, &psi2, &psi2_prime);

    let eye_l: Array2<f64> = Array2::eye(l);
    let top = linalg::kron(&sm.s_prime.t().to_owned(), &eye_l)
        - &linalg::kron(&sm.s.t().to_owned(), &kb.k11);
    let bottom = -linalg::kron(&sm.s.t().to_owned(), &kb.k21);
    let mut m = Array2::zeros((rows, cols));
    m.slice_mut(s![..l * n, ..]).assign(&top);
    m.slice_mut(s![l * n.., ..]).assign(&bottom);

    let mut b = Array2::zeros((rows, 1));
    b.slice_mut(s![..l * n, 0]).assign(&linalg::vectorize(&c1));
    b.slice_mut(s![l * n.., 0]).assign(&linalg::vectorize(&c2));

    let x = linalg::lstsq(&m, &b, None)?;
    linalg::unvectorize(&x.column(0).to_owned(), l, n_bar)
}

/// Fix the Koopman matrix, solve for the dictionary values `Psi1` (the
/// value form of the update, Sylvester-like through `S^+ S'`).
pub fn method2_step2_values(
    sm: &StateMatrices,
    k_matrix: &Array2<f64>,
    l: usize,
) -> Result<Array2<f64>> {
    let d = l + sm.input_dim;
    if k_matrix.dim() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "Koopman matrix is {:?}, expected {d}x{d}",
            k_matrix.dim()
        )));
    }
    let factors = SvdFactors::new(&sm.s, None)?;
    let a = step_matrix(sm, &factors)?;
    let kb = split_k(k_matrix, l);
    let psi2 = sm.s.slice(s![sm.n.., ..]).to_owned();
    let psi2_prime = sm.s_prime.slice(s![sm.n.., ..]).to_owned();
    let (c1, c2) = independent_terms(&kb, &psi2, &psi2_prime);
    solve_values_system(&a, &kb.k11, &kb.k21, &c1, &c2)
}

/// Dictionary learning over reservoir snapshots: alternate the Koopman
/// fit and the readout update until the residue stalls or the iteration
/// budget runs out. The returned model carries the final readout in its
/// dictionary and the residue after every Koopman fit in its log.
pub fn method2(sm: &StateMatrices, opts: &Method2Options) -> Result<KoopmanModel> {
    if opts.l == 0 {
        return Err(Error::InvalidInput(
            "L = 0 leaves only the projection maps, which is plain DMD; \
             fit that with `edmd` over a projection dictionary"
                .into(),
        ));
    }
    if opts.max_iters == 0 {
        return Err(Error::InvalidInput("need at least one iteration".into()));
    }
    let n = sm.snapshots();
    if n < 2 {
        return Err(Error::InvalidInput(format!("{n} snapshots are too few")));
    }
    let n_bar = sm.dim();
    let l = opts.l;
    let d = l + sm.input_dim;

    let w1_init = match &opts.initial_w1 {
        Some(w1) => {
            if w1.dim() != (l, n_bar) {
                return Err(Error::DimensionMismatch(format!(
                    "initial readout is {:?}, expected {l}x{n_bar}",
                    w1.dim()
                )));
            }
            w1.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(4);
            Array2::from_shape_fn((l, n_bar), |_| rng.gen_range(-1.0..=1.0))
        }
    };

    let psi2 = sm.s.slice(s![sm.n.., ..]).to_owned();
    let psi2_prime = sm.s_prime.slice(s![sm.n.., ..]).to_owned();

    // Everything iteration-independent is decomposed once.
    let factors = SvdFactors::new(&sm.s, None)?;
    let a = match opts.variant {
        Method2Variant::Values => Some(step_matrix(sm, &factors)?),
        Method2Variant::Weights => None,
    };

    // Iteration state: the value form carries Psi1 (with Psi1' = Psi1 A),
    // the weight form carries W1.
    let mut psi1 = w1_init.dot(&sm.s);
    let mut w1 = w1_init;

    let mut log: Vec<f64> = Vec::new();
    let mut final_fit: Option<(Array2<f64>, bool)> = None;
    for iter in 0..opts.max_iters {
        let (psi1_cur, psi1_prime) = match opts.variant {
            Method2Variant::Values => {
                let a_ref = a.as_ref().expect("value variant precomputed A");
                (psi1.clone(), a_ref.apply_right(&psi1))
            }
            Method2Variant::Weights => (w1.dot(&sm.s), w1.dot(&sm.s_prime)),
        };
        let psi = vstack(&psi1_cur, &psi2);
        let psi_prime = vstack(&psi1_prime, &psi2_prime);
        let (k, residue, deficient) = fit_edmd_core(&psi, &psi_prime)?;
        if std::env::var_os("KOOP_TRACE").is_some() {
            eprintln!(
                "iter {iter}: residue {residue:.3e} |psi1| {:.3e} |K| {:.3e}",
                linalg::frobenius(&psi1_cur),
                linalg::frobenius(&k)
            );
        }
        if !residue.is_finite() {
            return Err(Error::DivergedIteration { iteration: iter, log });
        }
        let converged = log
            .last()
            .map(|prev| (prev - residue).abs() <= opts.tol * prev.abs().max(1e-300))
            .unwrap_or(false);
        log.push(residue);
        if converged || iter + 1 == opts.max_iters {
            final_fit = Some((k, deficient));
            break;
        }
        let kb = split_k(&k, l);
        let (c1, c2) = independent_terms(&kb, &psi2, &psi2_prime);
        match opts.variant {
            Method2Variant::Values => {
                let a_ref = a.as_ref().expect("value variant precomputed A");
                psi1 = solve_values_system(a_ref, &kb.k11, &kb.k21, &c1, &c2)?;
            }
            Method2Variant::Weights => {
                w1 = method2_step2_weights(sm, &k, l)?;
            }
        }
    }
    let (k_matrix, rank_deficient) = final_fit.expect("loop ran at least once");
    let residue = *log.last().expect("loop logged at least once");

    // Assemble the final dictionary values and readout.
    let (psi1_final, psi1_prime_final, w1_final) = match opts.variant {
        Method2Variant::Values => {
            let a_ref = a.as_ref().expect("value variant precomputed A");
            let psi1_prime = a_ref.apply_right(&psi1);
            // W1 = Psi1 S^+, evaluated through the stored factors
            let w1 = factors.solve_right(&psi1)?;
            (psi1, psi1_prime, w1)
        }
        Method2Variant::Weights => (w1.dot(&sm.s), w1.dot(&sm.s_prime), w1),
    };
    let psi_first = {
        let psi = vstack(&psi1_final, &psi2);
        psi.column(0).to_owned()
    };
    let psi_last = {
        let psi_prime = vstack(&psi1_prime_final, &psi2_prime);
        psi_prime.column(n - 1).to_owned()
    };

    Ok(KoopmanModel {
        k_matrix,
        dictionary: Dictionary::ReservoirLearned {
            w1: w1_final,
            n: sm.n,
            input_dim: sm.input_dim,
        },
        psi_first,
        psi_last,
        proj_rows: l..d,
        method: match opts.variant {
            Method2Variant::Weights => Method::Method2Weights,
            Method2Variant::Values => Method::Method2Values,
        },
        residue,
        iteration_log: log,
        rank_deficient,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, SystemName};
    use crate::koopman::method1;
    use crate::reservoir::{self, ReservoirConfig};

    fn small_reservoir(seed: u64, n: usize, washout: usize) -> StateMatrices {
        let traj = dynamics::make_dataset(SystemName::Duffing).unwrap();
        let mut cfg = ReservoirConfig::benchmark(SystemName::Duffing, seed);
        cfg.n = n;
        cfg.density = 0.3;
        cfg.washout = washout;
        let run = reservoir::run(&cfg, &traj).unwrap();
        run.state_matrices().unwrap()
    }

    /// A short snapshot pair where the reservoir dimension exceeds the
    /// snapshot count, so S has full column rank and S^+ S' is companion.
    fn tall_snapshots(seed: u64) -> StateMatrices {
        let sm = small_reservoir(seed, 40, 470);
        assert!(sm.dim() > sm.snapshots());
        sm
    }

    fn eye(d: usize) -> Array2<f64> {
        Array2::eye(d)
    }

    fn objective(
        sm: &StateMatrices,
        w1: &Array2<f64>,
        k: &Array2<f64>,
    ) -> f64 {
        let psi2 = sm.s.slice(s![sm.n.., ..]).to_owned();
        let psi2p = sm.s_prime.slice(s![sm.n.., ..]).to_owned();
        let psi = vstack(&w1.dot(&sm.s), &psi2);
        let psi_prime = vstack(&w1.dot(&sm.s_prime), &psi2p);
        linalg::frobenius_sq(&(&psi_prime - &k.dot(&psi)))
    }

    #[test]
    fn step1_with_identity_readout_reduces_to_method1() {
        let sm = tall_snapshots(1);
        let (k, residue, _) = method2_step1(&sm, &eye(sm.dim())).unwrap();
        let m1 = method1(&sm).unwrap();
        let diff = (&k - &m1.k_matrix)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "K differs by {diff}");
        assert!((residue - m1.residue).abs() <= 1e-8);
    }

    #[test]
    fn step1_rank_one_readout_is_scalar_ratio() {
        let sm = tall_snapshots(2);
        let w = Array2::from_shape_fn((1, sm.dim()), |(_, j)| ((j % 7) as f64 - 3.0) / 3.0);
        let (k, _, _) = method2_step1(&sm, &w).unwrap();
        let a = w.dot(&sm.s);
        let b = w.dot(&sm.s_prime);
        let expected = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / a.iter().map(|x| x * x).sum::<f64>();
        assert!((k[[0, 0]] - expected).abs() < 1e-10);
    }

    #[test]
    fn step1_never_increases_residue() {
        let sm = tall_snapshots(3);
        let l = 4;
        let d = l + sm.input_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w1 = Array2::from_shape_fn((l, sm.dim()), |_| rng.gen_range(-1.0..=1.0));
        let w_out = {
            let mut w2 = Array2::zeros((sm.input_dim, sm.dim()));
            for i in 0..sm.input_dim {
                w2[[i, sm.n + i]] = 1.0;
            }
            vstack(&w1, &w2)
        };
        let arbitrary_k = Array2::from_shape_fn((d, d), |(i, j)| {
            ((i * 5 + j * 3) % 11) as f64 / 11.0 - 0.4
        });
        let residue_before = {
            let psi = w_out.dot(&sm.s);
            let psi_prime = w_out.dot(&sm.s_prime);
            linalg::frobenius_sq(&(&psi_prime - &arbitrary_k.dot(&psi)))
        };
        let (_, residue_after, _) = method2_step1(&sm, &w_out).unwrap();
        assert!(residue_after <= residue_before + 1e-12);
    }

    #[test]
    fn step1_factored_form_agrees_for_orthogonal_readout() {
        // The two printed forms of the step-1 matrix coincide when the
        // readout is square orthogonal (a generic wide full-row-rank
        // readout is NOT enough, which is easy to confirm numerically);
        // orthogonality is where the product rule for pseudo-inverses
        // actually applies.
        let sm = tall_snapshots(4);
        let n_bar = sm.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let raw = Array2::from_shape_fn((n_bar, n_bar), |_| rng.gen_range(-1.0..=1.0));
        let factors = SvdFactors::new(&raw, None).unwrap();
        let w_out = factors.u.clone(); // orthogonal
        let (direct, _, _) = method2_step1(&sm, &w_out).unwrap();
        let factored = method2_step1_factored(&sm, &w_out).unwrap();
        let scale = linalg::frobenius(&direct).max(1.0);
        let diff = linalg::frobenius(&(&direct - &factored));
        assert!(diff < 1e-8 * scale, "forms differ by {diff}");
    }

    #[test]
    fn step2_weights_matches_normal_equation_oracle() {
        // Toy instance solved from scratch: assemble the linear residual
        // map column by column, form the normal equations, and solve them
        // by Gaussian elimination.
        let s = ndarray::array![[1.0, 0.3, -0.2], [0.0, 0.9, 0.4], [0.5, -0.1, 1.1]];
        let s_prime = ndarray::array![[0.3, -0.2, 0.8], [0.9, 0.4, -0.5], [-0.1, 1.1, 0.2]];
        let sm = StateMatrices { s, s_prime, n: 2, input_dim: 1 };
        let l = 2;
        let d = 3;
        let k = ndarray::array![[0.5, -0.3, 0.2], [0.1, 0.8, -0.4], [-0.2, 0.6, 0.3]];

        let w1 = method2_step2_weights(&sm, &k, l).unwrap();

        // oracle
        let kb = split_k(&k, l);
        let psi2 = sm.s.slice(s![sm.n.., ..]).to_owned();
        let psi2p = sm.s_prime.slice(s![sm.n.., ..]).to_owned();
        let (c1, c2) = independent_terms(&kb, &psi2, &psi2p);
        let residual_map = |w: &Array2<f64>| -> Vec<f64> {
            let r1 = w.dot(&sm.s_prime) - kb.k11.dot(&w.dot(&sm.s));
            let r2 = -kb.k21.dot(&w.dot(&sm.s));
            r1.t().iter().copied().chain(r2.t().iter().copied()).collect()
        };
        let unknowns = l * sm.dim();
        let outputs = residual_map(&Array2::zeros((l, sm.dim()))).len();
        let mut m = vec![vec![0.0; unknowns]; outputs];
        for col in 0..unknowns {
            let mut e = Array2::zeros((l, sm.dim()));
            // column-major unknown ordering to match vec()
            e[[col % l, col / l]] = 1.0;
            for (row, v) in residual_map(&e).iter().enumerate() {
                m[row][col] = *v;
            }
        }
        let b: Vec<f64> = c1
            .t()
            .iter()
            .copied()
            .chain(c2.t().iter().copied())
            .collect();
        // normal equations m^T m x = m^T b, solved by Gaussian elimination
        let mut ata = vec![vec![0.0; unknowns + 1]; unknowns];
        for i in 0..unknowns {
            for j in 0..unknowns {
                ata[i][j] = (0..outputs).map(|r| m[r][i] * m[r][j]).sum();
            }
            ata[i][unknowns] = (0..outputs).map(|r| m[r][i] * b[r]).sum();
        }
        for col in 0..unknowns {
            let pivot_row = (col..unknowns)
                .max_by(|&a, &b| ata[a][col].abs().partial_cmp(&ata[b][col].abs()).unwrap())
                .unwrap();
            ata.swap(col, pivot_row);
            let pivot = ata[col][col];
            assert!(pivot.abs() > 1e-10, "oracle system is singular");
            for r in 0..unknowns {
                if r != col {
                    let f = ata[r][col] / pivot;
                    for j in col..=unknowns {
                        let upd = ata[col][j] * f;
                        ata[r][j] -= upd;
                    }
                }
            }
        }
        let mut expected = Array2::zeros((l, sm.dim()));
        for col in 0..unknowns {
            expected[[col % l, col / l]] = ata[col][unknowns] / ata[col][col];
        }
        let diff = (&w1 - &expected)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "oracle disagrees by {diff}");
    }

    #[test]
    fn step2_variants_agree_on_invertible_square_snapshots() {
        // Square invertible S makes W1 <-> Psi1 a bijection, so both
        // update forms reach the same objective value.
        let s = ndarray::array![
            [1.0, 0.2, -0.3, 0.4],
            [0.0, 1.1, 0.5, -0.2],
            [0.3, -0.4, 0.9, 0.1],
            [0.2, 0.3, 0.0, 1.2]
        ];
        let s_prime = ndarray::array![
            [0.5, -0.2, 0.1, 0.6],
            [0.3, 0.8, -0.1, 0.2],
            [-0.4, 0.2, 0.7, 0.3],
            [0.1, 0.1, 0.4, -0.9]
        ];
        let sm = StateMatrices { s, s_prime, n: 3, input_dim: 1 };
        let l = 2;
        let d = 3;
        let k = Array2::from_shape_fn((d, d), |(i, j)| ((i * 7 + j * 5) % 13) as f64 / 13.0 - 0.3);

        let w1_weights = method2_step2_weights(&sm, &k, l).unwrap();
        let psi1_values = method2_step2_values(&sm, &k, l).unwrap();
        let s_inv = linalg::pinv(&sm.s, None).unwrap();
        let w1_values = psi1_values.dot(&s_inv);

        let obj_w = objective(&sm, &w1_weights, &k);
        let obj_v = objective(&sm, &w1_values, &k);
        assert!((obj_w - obj_v).abs() < 1e-8, "objectives {obj_w} vs {obj_v}");
    }

    #[test]
    fn companion_structure_of_propagator() {
        let sm = tall_snapshots(5);
        let factors = SvdFactors::new(&sm.s, None).unwrap();
        assert_eq!(factors.rank, sm.snapshots(), "snapshots not independent");
        let a = step_matrix(&sm, &factors).unwrap();
        assert!(a.is_companion());
        // entrywise agreement with the dense product S^+ S'
        let dense = linalg::lstsq(&sm.s, &sm.s_prime, None).unwrap();
        let a_dense = a.to_dense();
        let diff = (&a_dense - &dense)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "companion deviates by {diff}");
        // ones on the subdiagonal, zeros elsewhere off the last column
        let n = sm.snapshots();
        for i in 0..n {
            for j in 0..n - 1 {
                let expected = if i == j + 1 { 1.0 } else { 0.0 };
                assert!((a_dense[[i, j]] - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn method2_rejects_l_zero() {
        let sm = tall_snapshots(6);
        let opts = Method2Options::benchmark(0, 1);
        assert!(method2(&sm, &opts).is_err());
    }

    #[test]
    fn method2_residue_log_non_increasing_weights() {
        let sm = small_reservoir(7, 12, 480);
        let mut opts = Method2Options::benchmark(4, 3);
        opts.variant = Method2Variant::Weights;
        opts.max_iters = 15;
        opts.tol = 0.0; // run the full budget
        let model = method2(&sm, &opts).unwrap();
        for pair in model.iteration_log.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10,
                "residue rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn method2_residue_log_non_increasing_values_full_rank() {
        let sm = tall_snapshots(8);
        let mut opts = Method2Options::benchmark(5, 4);
        opts.max_iters = 15;
        opts.tol = 0.0;
        let model = method2(&sm, &opts).unwrap();
        for pair in model.iteration_log.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10,
                "residue rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn method2_with_identity_readout_recovers_method1() {
        // W1 = [I_N, 0] makes W_out the identity on the concatenated
        // state, so the first Koopman fit coincides with the full-state
        // regression.
        let sm = tall_snapshots(9);
        let l = sm.n;
        let mut w1 = Array2::zeros((l, sm.dim()));
        for i in 0..l {
            w1[[i, i]] = 1.0;
        }
        let mut opts = Method2Options::benchmark(l, 5);
        opts.initial_w1 = Some(w1);
        opts.max_iters = 1;
        let model = method2(&sm, &opts).unwrap();
        let m1 = method1(&sm).unwrap();
        assert!(
            (model.residue - m1.residue).abs() <= 1e-8,
            "residues {} vs {}",
            model.residue,
            m1.residue
        );
    }

    #[test]
    fn method2_is_deterministic() {
        let sm = tall_snapshots(10);
        let opts = Method2Options::benchmark(5, 11);
        let a = method2(&sm, &opts).unwrap();
        let b = method2(&sm, &opts).unwrap();
        assert_eq!(a.k_matrix, b.k_matrix);
        assert_eq!(a.iteration_log, b.iteration_log);
        match (&a.dictionary, &b.dictionary) {
            (
                Dictionary::ReservoirLearned { w1: wa, .. },
                Dictionary::ReservoirLearned { w1: wb, .. },
            ) => assert_eq!(wa, wb),
            _ => panic!("wrong dictionary kind"),
        }
    }

    #[test]
    fn method2_converges_on_small_instance() {
        let sm = tall_snapshots(12);
        let opts = Method2Options::benchmark(6, 2);
        let model = method2(&sm, &opts).unwrap();
        assert!(model.residue.is_finite());
        assert!(model.residue >= 0.0);
        assert_eq!(model.dim(), 6 + sm.input_dim);
        assert!(!model.iteration_log.is_empty());
        // the learned fit must improve on the random initial dictionary
        assert!(model.residue <= model.iteration_log[0] + 1e-12);
    }
}
