//! Phase-diagram scans over (J₂, J₃) at fixed field.
//!
//! Grid points are solved independently, each with a start vector seeded
//! from its own index, so results do not depend on the number of workers or
//! on execution order.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::couplings::{dipolar_couplings, mean_nearest_neighbour, CouplingSet, TripleCoupling};
use crate::format::{float, write_row};
use crate::spin_model::{ground_cluster_with, order_af, order_f, CouplingRange, SpinHamiltonian};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["j2", "j3", "h", "n", "e0", "gap", "o_af", "o_f", "label"];
/// Size cap for scans; each point is a full Lanczos solve.
pub const SCAN_MAX_SPINS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        AxisRange { min, max, points }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.points <= 1 {
            return self.min;
        }
        let t = i as f64 / (self.points - 1) as f64;
        // exact endpoints
        if i + 1 == self.points {
            self.max
        } else {
            self.min + (self.max - self.min) * t
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::InvalidConfiguration(format!("{name} range must be finite")));
        }
        if self.points < 2 && self.min != self.max {
            return Err(Error::InvalidConfiguration(format!(
                "{name} axis needs at least 2 points, got {}",
                self.points
            )));
        }
        if self.points == 0 {
            return Err(Error::InvalidConfiguration(format!("{name} axis has no points")));
        }
        Ok(())
    }
}

/// Coupling geometry swept by the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScanModel {
    /// Uniform nearest-neighbour chain.
    NearestNeighbour,
    /// 1/r³ two-spin and products-of-1/r³ three-spin couplings.
    Dipolar,
    /// Device-derived coupling shapes, rescaled so their nearest-neighbour
    /// means equal the grid values.
    Device { couplings: CouplingSet },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub n: usize,
    pub h: f64,
    pub j2: AxisRange,
    pub j3: AxisRange,
    pub model: ScanModel,
    #[serde(default)]
    pub range: CouplingRange,
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfiguration("scans need at least 2 spins".into()));
        }
        if self.n > SCAN_MAX_SPINS {
            return Err(Error::TooLarge(format!(
                "scan size {} exceeds the cap of {SCAN_MAX_SPINS} spins",
                self.n
            )));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidConfiguration("field must be finite".into()));
        }
        self.j2.validate("j2")?;
        self.j3.validate("j3")?;
        if let ScanModel::Device { couplings } = &self.model {
            couplings.validate()?;
            if couplings.n != self.n {
                return Err(Error::InvalidConfiguration(format!(
                    "device couplings describe {} spins, scan uses {}",
                    couplings.n, self.n
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.j2.points * self.j3.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid indices of point `index`; J₂ runs fastest.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.j2.points, index / self.j2.points)
    }

    pub fn index(&self, i2: usize, i3: usize) -> usize {
        i3 * self.j2.points + i2
    }

    pub fn hamiltonian(&self, j2: f64, j3: f64) -> Result<SpinHamiltonian> {
        match &self.model {
            ScanModel::NearestNeighbour => SpinHamiltonian::nearest_neighbour_chain(self.n, j2, j3, self.h),
            ScanModel::Dipolar => {
                let (m, t) = dipolar_couplings(self.n, j2, j3);
                let set = CouplingSet::new(m, t, self.h)?;
                SpinHamiltonian::from_couplings(&set, self.n, self.range)
            }
            ScanModel::Device { couplings } => {
                let set = rescale_device(couplings, j2, j3, self.h)?;
                SpinHamiltonian::from_couplings(&set, self.n, self.range)
            }
        }
    }
}

fn rescale_device(c: &CouplingSet, j2: f64, j3: f64, h: f64) -> Result<CouplingSet> {
    let nn2 = mean_nearest_neighbour(&c.j2);
    let consecutive: Vec<f64> = c
        .j3
        .iter()
        .filter(|t| t.j == t.k + 1 && t.k == t.l + 1)
        .map(|t| t.value)
        .collect();
    let nn3 = if consecutive.is_empty() {
        0.0
    } else {
        consecutive.iter().sum::<f64>() / consecutive.len() as f64
    };
    if (j2 != 0.0 && nn2 == 0.0) || (j3 != 0.0 && nn3 == 0.0) {
        return Err(Error::InvalidConfiguration(
            "device couplings have no nearest-neighbour component to rescale".into(),
        ));
    }
    let s2 = if nn2 == 0.0 { 0.0 } else { j2 / nn2 };
    let s3 = if nn3 == 0.0 { 0.0 } else { j3 / nn3 };
    let m: DMatrix<f64> = &c.j2 * s2;
    let t = c
        .j3
        .iter()
        .map(|t| TripleCoupling { value: t.value * s3, ..*t })
        .collect();
    CouplingSet::new(m, t, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    P,
    AF,
    F,
    Boundary,
    Failed,
}

impl Phase {
    /// AF if O_AF > ½ and O_AF > O_F, F if O_F > ½ and O_F > O_AF, P if both
    /// are below ½, boundary otherwise.
    pub fn classify(o_af: f64, o_f: f64) -> Phase {
        if o_af > 0.5 && o_af > o_f {
            Phase::AF
        } else if o_f > 0.5 && o_f > o_af {
            Phase::F
        } else if o_af < 0.5 && o_f < 0.5 {
            Phase::P
        } else {
            Phase::Boundary
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::P => "P",
            Phase::AF => "AF",
            Phase::F => "F",
            Phase::Boundary => "boundary",
            Phase::Failed => "failed",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "P" => Phase::P,
            "AF" => Phase::AF,
            "F" => Phase::F,
            "boundary" => Phase::Boundary,
            "failed" => Phase::Failed,
            other => return Err(Error::InvalidInput(format!("unknown phase label {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub index: usize,
    pub j2: f64,
    pub j3: f64,
    pub h: f64,
    pub n: usize,
    pub e0: f64,
    pub gap: f64,
    pub o_af: f64,
    pub o_f: f64,
    pub label: Phase,
    pub error: Option<String>,
}

/// Fixed per-point seed: independent of worker count and visiting order.
pub fn point_seed(index: usize) -> u64 {
    0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1) ^ 0x5eed
}

/// Solves one grid point.
pub fn solve_point(grid: &ScanGrid, index: usize) -> ScanRecord {
    let (i2, i3) = grid.coords(index);
    let (j2, j3) = (grid.j2.value(i2), grid.j3.value(i3));
    let base = ScanRecord {
        index,
        j2,
        j3,
        h: grid.h,
        n: grid.n,
        e0: f64::NAN,
        gap: f64::NAN,
        o_af: f64::NAN,
        o_f: f64::NAN,
        label: Phase::Failed,
        error: None,
    };
    let solved = grid
        .hamiltonian(j2, j3)
        .and_then(|h| ground_cluster_with(&h, point_seed(index), SCAN_KRYLOV, Some(SCAN_TOLERANCE)));
    match solved {
        Ok(s) => {
            let states = s.ground_states();
            let (o_af, o_f) = (order_af(&states), order_f(&states));
            let gap = if s.ground_degeneracy > 1 { 0.0 } else { s.gap().unwrap_or(0.0) };
            ScanRecord {
                e0: s.ground_energy(),
                gap,
                o_af,
                o_f,
                label: Phase::classify(o_af, o_f),
                ..base
            }
        }
        Err(e) => ScanRecord { error: Some(e.to_string()), ..base },
    }
}

/// Krylov size used per point; small enough that reorthogonalization stays cheap.
const SCAN_KRYLOV: usize = 32;
/// Residual tolerance relative to ‖H‖ for scan points. Energies are then
/// accurate to roughly (1e-7‖H‖)²/gap, far below what the order parameters resolve.
const SCAN_TOLERANCE: f64 = 1e-7;

/// Solves every grid point. `workers = None` uses the global rayon pool.
pub fn run_scan(grid: &ScanGrid, workers: Option<usize>) -> Result<Vec<ScanRecord>> {
    grid.validate()?;
    let work = || -> Vec<ScanRecord> { (0..grid.len()).into_par_iter().map(|i| solve_point(grid, i)).collect() };
    match workers {
        None => Ok(work()),
        Some(0) => Err(Error::InvalidConfiguration("worker count must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidConfiguration(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

pub fn write_csv<W: Write>(out: &mut W, records: &[ScanRecord]) -> io::Result<()> {
    write_row(out, &CSV_HEADER)?;
    for r in records {
        write_row(
            out,
            &[
                float(r.j2),
                float(r.j3),
                float(r.h),
                r.n.to_string(),
                float(r.e0),
                float(r.gap),
                float(r.o_af),
                float(r.o_f),
                r.label.to_string(),
            ],
        )?;
    }
    Ok(())
}

/// Observable used by [`locate_crossing`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    OAf,
    OF,
}

impl Observable {
    pub fn of(&self, r: &ScanRecord) -> f64 {
        match self {
            Observable::OAf => r.o_af,
            Observable::OF => r.o_f,
        }
    }
}

/// Noise allowance in the monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-6;

/// Coupling where `ys` crosses ½, by linear interpolation between the
/// bracketing samples. `ys` must be monotone in `xs` up to [`MONOTONE_SLACK`].
pub fn locate_crossing(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "crossing needs matching slices of length >= 2 ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::NoBracket("slice contains failed points".into()));
    }
    let up = ys.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK);
    let down = ys.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    if !up && !down {
        return Err(Error::NoBracket("observable is not monotone along the slice".into()));
    }
    for i in 0..xs.len() - 1 {
        let (a, b) = (ys[i] - 0.5, ys[i + 1] - 0.5);
        if a == 0.0 {
            return Ok(xs[i]);
        }
        if a * b < 0.0 || b == 0.0 {
            return Ok(xs[i] + (xs[i + 1] - xs[i]) * a / (a - b));
        }
    }
    Err(Error::NoBracket(format!(
        "observable stays on one side of 1/2 (range {:.3}..{:.3})",
        ys[0],
        ys[ys.len() - 1]
    )))
}

/// Cells where the paramagnetic, antiferromagnetic and ferrimagnetic regions meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TricriticalRegion {
    /// (J₂, J₃) centres of every meeting window.
    pub cells: Vec<(f64, f64)>,
    pub centroid: (f64, f64),
    /// Side of the windows that found the meeting, 2 or 3.
    pub window: usize,
}

fn labels_present(records: &[ScanRecord]) -> BTreeSet<Phase> {
    records
        .iter()
        .map(|r| r.label)
        .filter(|l| matches!(l, Phase::P | Phase::AF | Phase::F))
        .collect()
}

pub fn tricritical_estimate(grid: &ScanGrid, records: &[ScanRecord]) -> Result<TricriticalRegion> {
    if records.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} records for a grid of {} points",
            records.len(),
            grid.len()
        )));
    }
    let present = labels_present(records);
    if present.len() < 3 {
        let names: Vec<_> = present.iter().map(|p| p.as_str()).collect();
        return Err(Error::IncompletePhaseDiagram(format!(
            "only {names:?} present; the tricritical estimate needs P, AF and F"
        )));
    }
    let (n2, n3) = (grid.j2.points, grid.j3.points);
    for window in [2usize, 3] {
        if n2 < window || n3 < window {
            continue;
        }
        let mut cells = Vec::new();
        for i3 in 0..=n3 - window {
            for i2 in 0..=n2 - window {
                let mut seen = BTreeSet::new();
                for d3 in 0..window {
                    for d2 in 0..window {
                        seen.insert(records[grid.index(i2 + d2, i3 + d3)].label);
                    }
                }
                if [Phase::P, Phase::AF, Phase::F].iter().all(|p| seen.contains(p)) {
                    let c2 = 0.5 * (grid.j2.value(i2) + grid.j2.value(i2 + window - 1));
                    let c3 = 0.5 * (grid.j3.value(i3) + grid.j3.value(i3 + window - 1));
                    cells.push((c2, c3));
                }
            }
        }
        if !cells.is_empty() {
            let k = cells.len() as f64;
            let centroid = (
                cells.iter().map(|c| c.0).sum::<f64>() / k,
                cells.iter().map(|c| c.1).sum::<f64>() / k,
            );
            return Ok(TricriticalRegion { cells, centroid, window });
        }
    }
    Err(Error::IncompletePhaseDiagram(
        "P, AF and F are present but never meet within a 3x3 window".into(),
    ))
}

/// Number of 4-connected components carrying `label`.
pub fn connected_regions(grid: &ScanGrid, records: &[ScanRecord], label: Phase) -> usize {
    let (n2, n3) = (grid.j2.points, grid.j3.points);
    let mut seen = vec![false; records.len()];
    let mut count = 0;
    for start in 0..records.len() {
        if seen[start] || records[start].label != label {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (i2, i3) = grid.coords(i);
            let mut nb = Vec::with_capacity(4);
            if i2 > 0 {
                nb.push(grid.index(i2 - 1, i3));
            }
            if i2 + 1 < n2 {
                nb.push(grid.index(i2 + 1, i3));
            }
            if i3 > 0 {
                nb.push(grid.index(i2, i3 - 1));
            }
            if i3 + 1 < n3 {
                nb.push(grid.index(i2, i3 + 1));
            }
            for j in nb {
                if !seen[j] && records[j].label == label {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Records along the line of fixed J₃ index `i3` (varying J₂).
pub fn j2_slice<'a>(grid: &ScanGrid, records: &'a [ScanRecord], i3: usize) -> Vec<&'a ScanRecord> {
    (0..grid.j2.points).map(|i2| &records[grid.index(i2, i3)]).collect()
}

/// Records along the line of fixed J₂ index `i2` (varying J₃).
pub fn j3_slice<'a>(grid: &ScanGrid, records: &'a [ScanRecord], i2: usize) -> Vec<&'a ScanRecord> {
    (0..grid.j3.points).map(|i3| &records[grid.index(i2, i3)]).collect()
}
