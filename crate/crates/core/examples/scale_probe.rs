use koopman_esn::dynamics::{self, SystemName, TrajectoryData};
use koopman_esn::koopman::{self, Method2Options};
use koopman_esn::reservoir::{self, ReservoirConfig, StateMatrices};
use ndarray::{s, Array2};

fn main() {
    for system in [SystemName::Rossler, SystemName::MackeyGlass, SystemName::Lorenz63, SystemName::Duffing] {
        let traj = dynamics::make_dataset(system).unwrap();
        let t_total = traj.len();
        let k = traj.state_dim();
        // delayed input: x'(t) = x(t-1), padded with the first sample
        let mut shifted = Array2::zeros((t_total, k));
        shifted.row_mut(0).assign(&traj.states.row(0));
        for t in 1..t_total {
            shifted.row_mut(t).assign(&traj.states.row(t - 1));
        }
        let delayed = TrajectoryData {
            states: shifted,
            time_step: traj.time_step,
            t0: traj.t0,
            scaling: traj.scaling.clone(),
        };
        let cfg = ReservoirConfig::benchmark(system, 1);
        let weights = reservoir::build_weights(&cfg).unwrap();
        let s0 = reservoir::initial_state(&cfg);
        let run = reservoir::drive(&cfg, &weights, &delayed, &s0).unwrap();
        // re-pair: state that absorbed x(t-1) sits with input x(t)
        let mut concat = run.concatenated.clone();
        for col in 0..concat.ncols() {
            let t = col + cfg.washout;
            concat
                .slice_mut(s![cfg.n.., col])
                .assign(&traj.states.row(t));
        }
        let n_cols = concat.ncols();
        let sm = StateMatrices {
            s: concat.slice(s![.., ..n_cols - 1]).to_owned(),
            s_prime: concat.slice(s![.., 1..]).to_owned(),
            n: cfg.n,
            input_dim: cfg.input_dim,
        };
        let opts = Method2Options::benchmark(15 - cfg.input_dim, 7);
        match koopman::method2(&sm, &opts) {
            Ok(m2) => println!("{system} lagged-state pairing: {:.3e}", m2.residue),
            Err(e) => println!("{system} lagged-state pairing: ERR {e}"),
        }
    }
}
