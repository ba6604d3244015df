use std::path::{Path, PathBuf};

use ionspin::couplings::{derive, CouplingSet, DeviceDerivation, ThreeSpinVariant};
use ionspin::dynamics::evolve;
use ionspin::format::{float, write_row};
use ionspin::phonons::{Axis, ChainSpectra};
use ionspin::scan::{
    connected_regions, run_scan, tricritical_estimate, write_csv, Phase, ScanGrid, ScanModel, TricriticalRegion,
};
use ionspin::spin_model::{ground_cluster, order_af, order_f, CouplingRange, SpinHamiltonian};
use serde::Serialize;

use crate::config::{Config, Loaded, Metadata, ScanKind, TOOL_NAME};
use crate::error::CliError;

/// Settings shared by every command.
pub struct Context {
    pub out_dir: PathBuf,
    pub prefix: String,
    pub workers: Option<usize>,
    pub seed: u64,
    pub variant: ThreeSpinVariant,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(format!("{}{name}", self.prefix))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn chain_and_drives(cfg: &Config) -> Result<(ionspin::phonons::ChainConfig, Vec<ionspin::drives::DriveConfig>), CliError> {
    let section = cfg
        .chain
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no chain section"))?;
    let chain = section.to_chain()?;
    let drives = cfg
        .drives
        .iter()
        .enumerate()
        .map(|(i, d)| d.to_drive(i, &chain, section.angular))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((chain, drives))
}

fn derive_device(cfg: &Config, ctx: &Context) -> Result<DeviceDerivation, CliError> {
    let (chain, drives) = chain_and_drives(cfg)?;
    if drives.is_empty() {
        return Err(CliError::validation("config has no drives"));
    }
    let (h, target) = cfg
        .model
        .as_ref()
        .map_or((0.0, None), |m| (m.h_khz, m.screening_target_khz));
    Ok(derive(&chain, &drives, h, ctx.variant, target)?)
}

/// Per-axis table `axis,n,eigenvalue,frequency` (frequency in the configured MHz convention).
pub fn modes(loaded: &Loaded, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let section = loaded
        .config
        .chain
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no chain section"))?;
    let chain = section.to_chain()?;
    let spectra = ChainSpectra::compute(&chain)?;
    let bytes = csv_bytes(|out| {
        write_row(out, &["axis", "n", "eigenvalue", "frequency"])?;
        for axis in Axis::ALL {
            let s = spectra.get(axis);
            for (n, (&v, &w)) in s.eigenvalues.iter().zip(&s.frequencies).enumerate() {
                write_row(out, &[axis.to_string(), n.to_string(), float(v), float(section.report_mhz(w))])?;
            }
        }
        Ok(())
    });
    Ok(vec![ctx.write("modes.csv", &bytes)?])
}

#[derive(Serialize)]
struct CouplingsDocument<'a> {
    variant: ThreeSpinVariant,
    #[serde(flatten)]
    derivation: &'a DeviceDerivation,
}

pub fn couplings(loaded: &Loaded, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let d = derive_device(&loaded.config, ctx)?;
    let json = ctx.write_json("couplings.json", &CouplingsDocument { variant: ctx.variant, derivation: &d })?;
    let j2 = &d.couplings.j2;
    let j2_csv = csv_bytes(|out| {
        write_row(out, &["j", "k", "value"])?;
        for j in 0..j2.nrows() {
            for k in (j + 1)..j2.ncols() {
                write_row(out, &[j.to_string(), k.to_string(), float(j2[(j, k)])])?;
            }
        }
        Ok(())
    });
    let j3_csv = csv_bytes(|out| {
        write_row(out, &["j", "k", "l", "value"])?;
        for t in &d.couplings.j3 {
            write_row(out, &[t.j.to_string(), t.k.to_string(), t.l.to_string(), float(t.value)])?;
        }
        Ok(())
    });
    Ok(vec![json, ctx.write("j2.csv", &j2_csv)?, ctx.write("j3.csv", &j3_csv)?])
}

#[derive(Serialize)]
struct LevelOut {
    energy: f64,
    residual: f64,
}

#[derive(Serialize)]
struct GroundDocument {
    n: usize,
    source: &'static str,
    field_h: f64,
    e0: f64,
    degeneracy: usize,
    gap: Option<f64>,
    o_af: f64,
    o_f: f64,
    levels: Vec<LevelOut>,
}

fn model_couplings(cfg: &Config, ctx: &Context) -> Result<(usize, CouplingSet, CouplingRange, &'static str), CliError> {
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no model section"))?;
    if model.is_direct() {
        let (n, set) = model.direct_couplings()?;
        Ok((n, set, model.range, "direct"))
    } else {
        let d = derive_device(cfg, ctx)?;
        Ok((d.couplings.n, d.couplings, model.range, "device"))
    }
}

pub fn ground(loaded: &Loaded, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let (n, set, range, source) = model_couplings(&loaded.config, ctx)?;
    let h = SpinHamiltonian::from_couplings(&set, n, range)?;
    let s = ground_cluster(&h, ctx.seed)?;
    let states = s.ground_states();
    let doc = GroundDocument {
        n,
        source,
        field_h: set.field_h,
        e0: s.ground_energy(),
        degeneracy: s.ground_degeneracy,
        gap: s.gap(),
        o_af: order_af(&states),
        o_f: order_f(&states),
        levels: s
            .levels
            .iter()
            .map(|l| LevelOut { energy: l.energy, residual: l.residual })
            .collect(),
    };
    Ok(vec![ctx.write_json("ground.json", &doc)?])
}

#[derive(Serialize)]
struct ScanSummary {
    points: usize,
    failed_points: usize,
    components: ComponentCounts,
    tricritical: Option<TricriticalRegion>,
    tricritical_error: Option<String>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct ComponentCounts {
    P: usize,
    AF: usize,
    F: usize,
}

pub fn scan(loaded: &Loaded, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &loaded.config;
    let s = cfg
        .scan
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no scan section"))?;
    let model = match s.model {
        ScanKind::NearestNeighbour => ScanModel::NearestNeighbour,
        ScanKind::Dipolar => ScanModel::Dipolar,
        ScanKind::Device => {
            let d = derive_device(cfg, ctx)?;
            if d.couplings.n != s.n {
                return Err(CliError::validation(format!(
                    "scan.n = {} differs from the chain size {}",
                    s.n, d.couplings.n
                )));
            }
            ScanModel::Device { couplings: d.couplings }
        }
    };
    let grid = ScanGrid {
        n: s.n,
        h: s.h_khz,
        j2: s.j2_khz.into(),
        j3: s.j3_khz.into(),
        model,
        range: s.range,
    };
    let records = run_scan(&grid, ctx.workers)?;
    let csv = csv_bytes(|out| write_csv(out, &records));
    let tri = tricritical_estimate(&grid, &records);
    let summary = ScanSummary {
        points: records.len(),
        failed_points: records.iter().filter(|r| r.label == Phase::Failed).count(),
        components: ComponentCounts {
            P: connected_regions(&grid, &records, Phase::P),
            AF: connected_regions(&grid, &records, Phase::AF),
            F: connected_regions(&grid, &records, Phase::F),
        },
        tricritical_error: tri.as_ref().err().map(|e| e.to_string()),
        tricritical: tri.ok(),
    };
    let meta = Metadata {
        tool: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "scan".into(),
        variant: ctx.variant,
        config: loaded.raw.clone(),
    };
    Ok(vec![
        ctx.write("scan.csv", &csv)?,
        ctx.write_json("scan.meta.json", &meta)?,
        ctx.write_json("scan.summary.json", &summary)?,
    ])
}

pub fn ramp(loaded: &Loaded, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let r = loaded
        .config
        .ramp
        .as_ref()
        .ok_or_else(|| CliError::validation("config has no ramp section"))?;
    let schedule = r.schedule()?;
    let initial = r.initial_state()?;
    let targets = r.targets();
    let result = evolve(&initial, &schedule, &targets, r.sample_every)?;
    let csv = csv_bytes(|out| {
        let mut header: Vec<String> = ["time", "j2", "j3", "h", "energy", "ground_energy", "gap", "ground_fidelity"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(targets.iter().map(|t| format!("fidelity_{}", t.label())));
        write_row(out, &header)?;
        for s in &result.samples {
            let mut row = vec![
                float(s.time),
                float(s.couplings.j2),
                float(s.couplings.j3),
                float(s.couplings.h),
                float(s.energy),
                float(s.ground_energy),
                float(s.gap),
                float(s.ground_fidelity),
            ];
            row.extend(s.fidelities.iter().map(|&f| float(f)));
            write_row(out, &row)?;
        }
        Ok(())
    });
    Ok(vec![ctx.write("ramp.csv", &csv)?])
}

/// Directory for outputs: the flag, then the config, then the working directory.
pub fn output_dir(flag: Option<&Path>, cfg: Option<&Config>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output.dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("."))
}
