//! Statistical behaviour of the tomographic estimators on synthetic runs:
//! efficiency-compensation consistency, recovery of a state with all ten
//! independent entries nonzero, and the effect of LO phase jitter.

use std::collections::BTreeMap;

use twinbeam_core::gaussian::{self, CovarianceMatrix, ModeLabel};
use twinbeam_core::homodyne::{
    derive_seed, inject_phase_jitter, simulate_trace, simulate_vacuum_trace, NoiseModel,
};
use twinbeam_core::opo::{self, OpoParams};
use twinbeam_core::tomography::{
    assemble_cm, mode_moments, reconstruct_from_traces, reconstruct_single_mode, Scheme,
};

fn reference_state() -> CovarianceMatrix {
    opo::build_opo_state(&OpoParams::reference()).unwrap()
}

fn collect_moments(
    sigma: &CovarianceMatrix,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
    jitter: f64,
) -> BTreeMap<ModeLabel, twinbeam_core::tomography::ModeMoments> {
    let mut out = BTreeMap::new();
    for mode in ModeLabel::ALL {
        let mut trace =
            simulate_trace(sigma, mode, noise, n, derive_seed(seed, mode.as_str())).unwrap();
        if jitter > 0.0 {
            trace = inject_phase_jitter(&trace, jitter, derive_seed(seed, "jitter"));
        }
        out.insert(mode, mode_moments(&trace, noise).unwrap());
    }
    out
}

#[test]
fn compensated_estimates_match_ideal_detection() {
    let sigma = reference_state();
    let n = 400_000;
    let lossy = NoiseModel::reference();
    let ideal = NoiseModel::ideal();
    let rec_lossy = assemble_cm(&collect_moments(&sigma, &lossy, n, 101, 0.0), Scheme::Six, 0.0)
        .unwrap();
    let rec_ideal = assemble_cm(&collect_moments(&sigma, &ideal, n, 202, 0.0), Scheme::Six, 0.0)
        .unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let diff = rec_lossy.cm.entry(i, j) - rec_ideal.cm.entry(i, j);
            let combined = (rec_lossy.entry_errors[(i, j)].powi(2)
                + rec_ideal.entry_errors[(i, j)].powi(2))
            .sqrt();
            assert!(
                diff.abs() <= 5.0 * combined,
                "entry ({i},{j}): diff {diff}, combined err {combined}"
            );
        }
    }
}

#[test]
fn recovers_state_with_all_entries_nonzero() {
    // local squeezing plus mixing populates every independent CM entry;
    // recovery checks all sign conventions of the six-mode scheme at once
    let params = OpoParams {
        n_th1: 0.5,
        n_th2: 0.3,
        squeeze_r: 0.5,
        squeeze_phase: 0.0,
        local_r1: 0.12,
        local_phase1: 0.7,
        local_r2: 0.07,
        local_phase2: -0.4,
        mix_angle: 0.18,
        mix_phase: 0.9,
        eta_channel: 0.95,
    };
    let sigma = opo::build_opo_state(&params).unwrap();
    let noise = NoiseModel::reference();
    let n = 400_000;
    let rec = assemble_cm(&collect_moments(&sigma, &noise, n, 303, 0.0), Scheme::Six, 0.0)
        .unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let err = rec.entry_errors[(i, j)].max(1e-12);
            let pull = (rec.cm.entry(i, j) - sigma.entry(i, j)) / err;
            assert!(
                pull.abs() < 5.0,
                "entry ({i},{j}): pull {pull} (got {}, expect {})",
                rec.cm.entry(i, j),
                sigma.entry(i, j)
            );
        }
    }
    assert_eq!(rec.cm.entry(0, 1), rec.cm.entry(1, 0));
    assert_eq!(rec.cm.entry(0, 3), rec.cm.entry(3, 0));
}

#[test]
fn five_mode_schemes_reproduce_the_truth() {
    let sigma = reference_state();
    let noise = NoiseModel::reference();
    let moments = collect_moments(&sigma, &noise, 300_000, 404, 0.0);
    for scheme in [Scheme::FiveDropF, Scheme::FiveDropE] {
        let rec = assemble_cm(&moments, scheme, 0.0).unwrap();
        for (i, j) in [(0usize, 3usize), (1, 2)] {
            let err = rec.entry_errors[(i, j)];
            let pull = (rec.cm.entry(i, j) - sigma.entry(i, j)) / err;
            assert!(pull.abs() < 5.0, "{scheme}: entry ({i},{j}) pull {pull}");
        }
    }
}

#[test]
fn phase_jitter_leaves_thermal_modes_alone() {
    // mode a has a phase-flat variance: 20 mrad of jitter must not move
    // its reconstruction beyond statistics
    let sigma = reference_state();
    let noise = NoiseModel::reference();
    let n = 300_000;
    let plain = simulate_trace(&sigma, ModeLabel::A, &noise, n, 55).unwrap();
    let jittered = inject_phase_jitter(&plain, 0.02, 56);
    let est_plain = reconstruct_single_mode(&plain, &noise).unwrap();
    let est_jit = reconstruct_single_mode(&jittered, &noise).unwrap();
    let diff = (est_plain.cm.var_x - est_jit.cm.var_x).abs();
    assert!(
        diff < 3.0 * est_plain.var_x.stderr,
        "thermal mode moved by {diff} under jitter"
    );
}

#[test]
fn phase_jitter_bias_on_squeezed_modes_is_second_order() {
    // i.i.d. jitter of rms delta shifts second moments by O(delta^2) only;
    // the dominant systematic risk is covered by the propagated error bars
    let sigma = reference_state();
    let noise = NoiseModel::reference();
    let truth = gaussian::combine_modes(&sigma, ModeLabel::C).unwrap();
    let n = 1_000_000;
    let plain = simulate_trace(&sigma, ModeLabel::C, &noise, n, 77).unwrap();
    let jittered = inject_phase_jitter(&plain, 0.02, 78);
    let est = reconstruct_single_mode(&jittered, &noise).unwrap();
    // expected bias ~ 2 delta^2 (V_max - V_min)/2 ~ 1.2e-3, well below 5 se
    assert!(
        (est.cm.var_y - truth.var_y).abs() < 5.0 * est.var_y.stderr + 3e-3,
        "var_y {} vs {}",
        est.cm.var_y,
        truth.var_y
    );
}

#[test]
fn jitter_augmented_errors_cover_run_scatter() {
    // across repeated jittered acquisitions, the sigma_14 spread must stay
    // within the error bars reported by the assembly
    let sigma = reference_state();
    let noise = NoiseModel::reference();
    let n = 100_000;
    let mut values = Vec::new();
    let mut errs = Vec::new();
    for rep in 0..20u64 {
        let moments = collect_moments(&sigma, &noise, n, 1000 + rep, 0.02);
        let rec = assemble_cm(&moments, Scheme::Six, 0.02).unwrap();
        values.push(rec.cm.entry(0, 3));
        errs.push(rec.entry_errors[(0, 3)]);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let scatter = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (values.len() - 1) as f64)
        .sqrt();
    let typical_err = errs.iter().sum::<f64>() / errs.len() as f64;
    // reported error combines statistics and the jitter allowance, so the
    // observed scatter must not exceed it
    assert!(
        scatter < typical_err,
        "scatter {scatter} vs reported {typical_err}"
    );
    assert!(mean.abs() < 3.0 * typical_err / (values.len() as f64).sqrt() + 3e-3);
}

#[test]
fn full_reconstruction_pipeline_from_traces() {
    let sigma = reference_state();
    let noise = NoiseModel::reference();
    let n = 200_000;
    let mut traces = BTreeMap::new();
    for mode in ModeLabel::ALL {
        traces.insert(
            mode,
            simulate_trace(&sigma, mode, &noise, n, derive_seed(9, mode.as_str())).unwrap(),
        );
    }
    let vacuum = simulate_vacuum_trace(&noise, n, derive_seed(9, "vacuum"));
    let rec = reconstruct_from_traces(&traces, &vacuum, Scheme::Six, &noise, 0.02, 50).unwrap();
    assert!(rec.physical);
    assert!((rec.calibration_scale - 1.0).abs() < 0.01);
    assert_eq!(rec.gaussianity.len(), 6);
    assert!(rec.gaussianity.iter().all(|g| g.pass));
    for i in 0..4 {
        for j in 0..4 {
            let pull =
                (rec.cm.entry(i, j) - sigma.entry(i, j)) / rec.entry_errors[(i, j)].max(1e-12);
            assert!(pull.abs() < 5.0, "entry ({i},{j}) pull {pull}");
        }
    }
}
