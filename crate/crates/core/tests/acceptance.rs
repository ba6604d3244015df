//! Acceptance suite: one PASS/FAIL line per criterion at the contract tolerances.
//!
//! Runs as a plain binary (`harness = false`) so the report is always printed.
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the run.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use ionspin::couplings::{
    closed_form_estimates, derive, dipolar_fit, error_budget, screen_axial, two_spin_couplings, ClosedFormParams,
    CouplingSet, ThreeSpinVariant, TripleCoupling,
};
use ionspin::dynamics::{evolve, FidelityTarget, RampGeometry, RampPoint, RampSchedule};
use ionspin::oracles::{classical_enumerate, dense_spectrum, tfi_free_fermion};
use ionspin::phonons::ChainSpectra;
use ionspin::scan::{
    connected_regions, locate_crossing, run_scan, tricritical_estimate, write_csv, AxisRange, Observable, Phase,
    ScanGrid, ScanModel,
};
use ionspin::spin_model::{ground_cluster, ground_state, CouplingRange, SpinHamiltonian, SpinState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail for reasons recorded alongside the project notes.
const KNOWN_FAILURES: &[u8] = &[5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn benchmark() -> ClosedFormParams {
    ClosedFormParams {
        beta_x: 0.05,
        omega_x: 10.0,
        delta_x: 1.25,
        force: 0.125,
        squeeze: 0.125,
        phase: 0.0,
        chi: 0.0,
    }
}

fn coupling_magnitudes() -> Outcome {
    let cf = closed_form_estimates(&benchmark()).unwrap();
    let e2 = (cf.j2_khz - 0.625).abs() / 0.625;
    let e3 = (cf.j3_khz - 0.600).abs() / 0.600;
    outcome(
        e2 <= 1e-6 && e3 <= 1e-6,
        format!("J2 = {:.9} kHz, J3 = {:.9} kHz (rel. err {e2:.1e}, {e3:.1e})", cf.j2_khz, cf.j3_khz),
    )
}

fn error_budget_total() -> Outcome {
    let b = error_budget(0.125, 0.125, 1.25).unwrap();
    outcome(
        (b.total - 1e-2).abs() <= 1e-15,
        format!("total = {:e} (F: {:e}, M: {:e}, MF: {:e})", b.total, b.eps_f, b.eps_m, b.eps_mf),
    )
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, h: f64) -> CouplingSet {
    let mut j2 = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..j {
            let v = rng.gen_range(-1.0..1.0);
            j2[(j, k)] = v;
            j2[(k, j)] = v;
        }
    }
    let mut j3 = Vec::new();
    for j in 0..n {
        for k in 0..j {
            for l in 0..k {
                if rng.gen_bool(0.3) {
                    j3.push(TripleCoupling { j, k, l, value: rng.gen_range(-1.0..1.0) });
                }
            }
        }
    }
    CouplingSet::new(j2, j3, h).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_dense, mut worst_classical) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(2..=10);
        let h = rng.gen_range(0.1..2.0);
        let set = random_set(&mut rng, n, h);
        let ham = SpinHamiltonian::from_couplings(&set, n, CouplingRange::Full).unwrap();
        let e = ground_state(&ham, 1).unwrap().ground_energy();
        worst_dense = worst_dense.max((e - dense_spectrum(&ham).unwrap()[0]).abs());

        let classical = CouplingSet { field_h: 0.0, ..set };
        let ham0 = SpinHamiltonian::from_couplings(&classical, n, CouplingRange::Full).unwrap();
        let e0 = ground_cluster(&ham0, 1).unwrap().ground_energy();
        let c = classical_enumerate(n, &classical.j2, &classical.j3).unwrap();
        worst_classical = worst_classical.max((e0 - c.energy).abs());
    }
    outcome(
        worst_dense <= 1e-10 && worst_classical <= 1e-12,
        format!("50 instances, max |dE| dense {worst_dense:.1e}, classical {worst_classical:.1e}"),
    )
}

fn free_fermion_check() -> Outcome {
    let (mut worst, mut at) = (0.0f64, (0, 0.0));
    for n in 2..=14 {
        for ratio in [0.2, 1.0, 5.0] {
            let ham = SpinHamiltonian::nearest_neighbour_chain(n, ratio, 0.0, 1.0).unwrap();
            let e = ground_state(&ham, 1).unwrap().ground_energy();
            let err = (e - tfi_free_fermion(n, ratio, 1.0)).abs();
            if err > worst {
                (worst, at) = (err, (n, ratio));
            }
        }
    }
    let analytic = (tfi_free_fermion(2, 1.0, 1.0) + 5f64.sqrt()).abs();
    outcome(
        worst <= 1e-10 && analytic <= 1e-12,
        format!("N = 2..14, J/h in {{0.2, 1, 5}}: max |dE| {worst:.1e} at N = {}, J/h = {}; N = 2 vs -sqrt(5): {analytic:.1e}", at.0, at.1),
    )
}

fn slice_crossing(n: usize, observable: Observable) -> Result<f64, String> {
    let (j2, j3) = match observable {
        Observable::OAf => (AxisRange::new(0.5, 1.5, 51), AxisRange::new(0.0, 0.0, 1)),
        Observable::OF => (AxisRange::new(0.0, 0.0, 1), AxisRange::new(-0.5, -1.5, 51)),
    };
    let grid = ScanGrid { n, h: 1.0, j2, j3, model: ScanModel::NearestNeighbour, range: CouplingRange::Full };
    let records = run_scan(&grid, None).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = records
        .iter()
        .map(|r| match observable {
            Observable::OAf => r.j2,
            Observable::OF => r.j3.abs(),
        })
        .collect();
    let ys: Vec<f64> = records.iter().map(|r| observable.of(r)).collect();
    locate_crossing(&xs, &ys).map_err(|e| e.to_string())
}

fn critical_points() -> Outcome {
    let sizes = [9, 12, 15];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, obs) in [("O_AF", Observable::OAf), ("O_F", Observable::OF)] {
        let crossings: Vec<Result<f64, String>> = sizes.iter().map(|&n| slice_crossing(n, obs)).collect();
        let values: Vec<f64> = crossings.iter().filter_map(|c| c.as_ref().ok().copied()).collect();
        if values.len() != sizes.len() {
            pass = false;
            parts.push(format!("{name}: {:?}", crossings));
            continue;
        }
        let in_window = (0.7..=1.3).contains(&values[2]);
        let distances: Vec<f64> = values.iter().map(|c| (c - 1.0).abs()).collect();
        let approaching = distances.windows(2).all(|w| w[1] <= w[0]);
        pass &= in_window && approaching;
        parts.push(format!(
            "{name} crossings at N=9,12,15: {:.4}, {:.4}, {:.4} (N=15 in window: {in_window}, approaching h: {approaching})",
            values[0], values[1], values[2]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn phase_topology() -> Outcome {
    let grid = ScanGrid {
        n: 15,
        h: 1.0,
        j2: AxisRange::new(0.0, 3.0, 40),
        j3: AxisRange::new(-3.0, 0.0, 40),
        model: ScanModel::NearestNeighbour,
        range: CouplingRange::Full,
    };
    let records = match run_scan(&grid, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let failed = records.iter().filter(|r| r.label == Phase::Failed).count();
    let regions: Vec<usize> = [Phase::P, Phase::AF, Phase::F]
        .iter()
        .map(|&p| connected_regions(&grid, &records, p))
        .collect();
    let af_corner = &records[grid.index(39, 39)];
    let f_corner = &records[grid.index(0, 0)];
    let tri = tricritical_estimate(&grid, &records);
    let pass = failed == 0
        && regions == [1, 1, 1]
        && tri.is_ok()
        && af_corner.o_af > 0.9
        && f_corner.o_f > 0.9;
    let tri_text = match &tri {
        Ok(t) => format!(
            "{} meeting cell(s), centroid J2 = {:.3}, J3 = {:.3}",
            t.cells.len(),
            t.centroid.0,
            t.centroid.1
        ),
        Err(e) => e.to_string(),
    };
    outcome(
        pass,
        format!(
            "40x40, N = 15: components P/AF/F = {:?}, failed points {failed}, O_AF(3h, 0) = {:.4}, O_F(0, -3h) = {:.4}, {tri_text}",
            regions, af_corner.o_af, f_corner.o_f
        ),
    )
}

fn dipolar_range() -> Outcome {
    let exponent = |beta: f64| {
        let c = chain(30, beta, 0.05);
        let s = ChainSpectra::compute(&c).unwrap();
        let j = two_spin_couplings(&c, &s, &[linear_drive(1.25, 0.125)]).unwrap();
        dipolar_fit(&j).unwrap().exponent
    };
    // β ω / δ = 0.4, 0.5, 0.64
    let stiff = exponent(0.05);
    let soft: Vec<f64> = [0.0625, 0.08].iter().map(|&b| exponent(b)).collect();
    let pass = (stiff - 3.0).abs() <= 0.2 && soft.iter().all(|&p| p < 3.0);
    outcome(
        pass,
        format!(
            "N = 30: exponent {stiff:.4} at beta*omega/delta = 0.4, {:.4} at 0.5, {:.4} at 0.64",
            soft[0], soft[1]
        ),
    )
}

fn screening() -> Outcome {
    let c = chain(10, 0.05, 0.05);
    let drives = [linear_drive(1.25, 0.125), squeeze_drive(1.25, 0.125)];
    let bare = derive(&c, &drives, 1.0, ThreeSpinVariant::default(), None).unwrap();
    let consecutive: Vec<f64> = bare
        .couplings
        .j3
        .iter()
        .filter(|t| t.j == t.k + 1 && t.k == t.l + 1)
        .map(|t| t.value)
        .collect();
    let j3_nn = consecutive.iter().sum::<f64>().abs() / consecutive.len() as f64;
    let s = ChainSpectra::compute(&c).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for ratio in [0.5, 1.0, 2.0] {
        let target = j3_nn / ratio;
        match screen_axial(&bare.radial_j2, &c, &s.z, &axial_template(0.4), target) {
            Ok(r) => {
                worst = worst.max((r.mean_nn - target).abs() / target.abs().max(1.0));
                parts.push(format!(
                    "|J3|/J2 = {ratio}: Omega_L3 = {:.4}, long-range max {:.3e} kHz",
                    r.rabi_freq, r.max_long_range
                ));
            }
            Err(e) => {
                worst = f64::INFINITY;
                parts.push(format!("|J3|/J2 = {ratio}: {e}"));
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("|J3| = {j3_nn:.4e} kHz, solve consistency {worst:.1e}; {}", parts.join("; ")),
    )
}

fn ramp_fidelity(start: RampPoint, end: RampPoint, t: f64, target: FidelityTarget) -> f64 {
    let steps = (40.0 * t).ceil() as usize;
    let s = RampSchedule::linear(RampGeometry::PaulTrap, start, end, t, steps).unwrap();
    let r = evolve(&SpinState::x_polarized(3), &s, &[target], usize::MAX).unwrap();
    r.samples.last().unwrap().fidelities[0]
}

fn entanglement_protocol() -> Outcome {
    let ghz = (
        RampPoint { j2: -1.0, j3: 0.0, h: 5.0 },
        RampPoint { j2: -1.0, j3: 0.0, h: 0.05 },
        FidelityTarget::Ghz,
        0.9,
    );
    let ferri = (
        RampPoint { j2: 0.1, j3: -1.0, h: 5.0 },
        RampPoint { j2: 0.1, j3: -1.0, h: 0.05 },
        FidelityTarget::FerrimagneticManifold,
        0.8,
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, (a, b, target, threshold)) in [("GHZ", ghz), ("ferrimagnetic manifold", ferri)] {
        let at50 = ramp_fidelity(a, b, 50.0, target.clone());
        let series: Vec<f64> = [5.0, 20.0, 80.0].iter().map(|&t| ramp_fidelity(a, b, t, target.clone())).collect();
        let monotone = series.windows(2).all(|w| w[1] >= w[0] - 1e-3);
        pass &= at50 >= threshold && monotone;
        parts.push(format!(
            "{name}: {at50:.4} at T = 50/|J| (need {threshold}), T = 5, 20, 80: {:.4}, {:.4}, {:.4}",
            series[0], series[1], series[2]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn determinism() -> Outcome {
    let grid = ScanGrid {
        n: 10,
        h: 1.0,
        j2: AxisRange::new(0.0, 3.0, 8),
        j3: AxisRange::new(-3.0, 0.0, 8),
        model: ScanModel::NearestNeighbour,
        range: CouplingRange::Full,
    };
    let csv = |workers| {
        let mut buf = Vec::new();
        write_csv(&mut buf, &run_scan(&grid, Some(workers)).unwrap()).unwrap();
        buf
    };
    let a = csv(1);
    let b = csv(1);
    let c = csv(4);
    outcome(
        a == b && a == c,
        format!("{} bytes; repeat identical: {}, 1 vs 4 workers identical: {}", a.len(), a == b, a == c),
    )
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, fn() -> Outcome); 10] = [
        (1, "coupling magnitudes", coupling_magnitudes),
        (2, "error budget", error_budget_total),
        (3, "oracle equivalence", oracle_equivalence),
        (4, "free-fermion check", free_fermion_check),
        (5, "critical-point signatures", critical_points),
        (6, "phase-diagram topology", phase_topology),
        (7, "dipolar range", dipolar_range),
        (8, "screening", screening),
        (9, "entanglement protocol", entanglement_protocol),
        (10, "determinism", determinism),
    ];
    let only: Option<u8> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {id:>2} {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
