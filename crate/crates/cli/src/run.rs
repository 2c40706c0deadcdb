use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use stringlab::certificate::{certificate_constants, certificate_with, constant_c};
use stringlab::diagnostics::{energy_report, fit_decay, write_energy_csv, EnergyReport};
use stringlab::discretize::{assemble_with, build_grid, InterfaceMass, SecondOrderSystem, StateVector};
use stringlab::integrate::{simulate_from, snapshot_rows};
use stringlab::model::{
    validate_params, Gains, InitialCondition, ParamFile, PhysicalParams, Preset, SegmentSamples,
    DEFAULT_WAVENUMBER,
};
use stringlab::output;
use stringlab::spectral::{eigenvalues, spectral_metrics};

use crate::Common;

#[derive(Debug, Clone, PartialEq)]
pub enum IcChoice {
    Zero,
    Paper,
    Sine,
    Box,
    File(PathBuf),
}

impl FromStr for IcChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(IcChoice::Zero),
            "paper" => Ok(IcChoice::Paper),
            "sine" => Ok(IcChoice::Sine),
            "box" => Ok(IcChoice::Box),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(IcChoice::File(PathBuf::from(path))),
                _ => Err(format!("unknown initial condition '{s}' (zero, paper, sine, box or file:PATH)")),
            },
        }
    }
}

impl std::fmt::Display for IcChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IcChoice::Zero => f.write_str("zero"),
            IcChoice::Paper => f.write_str("paper"),
            IcChoice::Sine => f.write_str("sine"),
            IcChoice::Box => f.write_str("box"),
            IcChoice::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    segment1: SegmentSamples,
    segment2: SegmentSamples,
}

impl IcChoice {
    fn resolve(&self) -> Result<InitialCondition> {
        Ok(match self {
            IcChoice::Zero => InitialCondition::Zero,
            IcChoice::Paper => InitialCondition::PaperExperiment,
            IcChoice::Sine => InitialCondition::SineVelocity {
                wavenumber: DEFAULT_WAVENUMBER,
            },
            IcChoice::Box => InitialCondition::BoxDisplacement,
            IcChoice::File(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading initial condition {}", path.display()))?;
                let f: SampleFile = serde_json::from_str(&text)
                    .with_context(|| format!("parsing initial condition {}", path.display()))?;
                InitialCondition::CustomSamples {
                    segment1: f.segment1,
                    segment2: f.segment2,
                }
            }
        })
    }
}

/// A preset letter, or `custom` to keep the gains of the parameter file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetTag {
    Preset(Preset),
    Custom,
}

impl FromStr for PresetTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "custom" {
            return Ok(PresetTag::Custom);
        }
        s.parse::<Preset>().map(PresetTag::Preset).map_err(|e| e.to_string())
    }
}

/// Everything a run needs, echoed to meta.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub gains: Gains,
    pub preset: String,
    pub n1: usize,
    pub n2: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
    pub ic: String,
    pub interface: InterfaceMass,
    pub seed: u64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps_source: String,
    pub version: &'static str,
}

fn load_params(common: &Common) -> Result<(PhysicalParams, Gains)> {
    let file = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ParamFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ParamFile::default(),
    };
    Ok(file.split())
}

/// Weights for `L` and `V`: the run's own certificate when feasible, else the
/// unit-gain certificate for the same strings, else `1/(4C)` for both.
fn lyapunov_weights(p: &PhysicalParams, g: &Gains) -> (f64, f64, String) {
    let own = certificate_constants(p, g);
    if own.feasible {
        return (own.eps1, own.eps2, "certificate".into());
    }
    let unit = certificate_constants(p, &Gains::new(1.0, 1.0, 1.0));
    if unit.feasible {
        return (unit.eps1, unit.eps2, "unit-gain certificate".into());
    }
    let eps = 1.0 / (4.0 * constant_c(p));
    (eps, eps, "1/(4C)".into())
}

pub fn resolve(common: &Common, preset: Option<Preset>) -> Result<RunConfig> {
    let (params, file_gains) = load_params(common)?;
    let preset = preset.or(match common.preset {
        Some(PresetTag::Preset(p)) => Some(p),
        _ => None,
    });
    let gains = preset.map_or(file_gains, Preset::gains);
    validate_params(&params, &gains)
        .into_result()
        .map_err(|e| anyhow!(e))?;
    let (eps1, eps2, eps_source) = lyapunov_weights(&params, &gains);
    Ok(RunConfig {
        params,
        gains,
        preset: preset.map_or_else(|| "custom".to_string(), |p| p.label().to_string()),
        n1: common.n1,
        n2: common.n2,
        dt: common.dt,
        t_final: common.t_final,
        record_every: common.record_every,
        ic: common.ic.to_string(),
        interface: common.interface,
        seed: common.seed,
        eps1,
        eps2,
        eps_source,
        version: env!("CARGO_PKG_VERSION"),
    })
}

fn build_system(cfg: &RunConfig) -> Result<SecondOrderSystem> {
    let grid = build_grid(&cfg.params, cfg.n1, cfg.n2)?;
    Ok(assemble_with(&cfg.params, &cfg.gains, &grid, cfg.interface)?)
}

fn run_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = common.out.join(&cfg.preset);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let meta = serde_json::to_string_pretty(cfg)?;
    fs::write(dir.join("meta.json"), meta + "\n")?;
    Ok(dir)
}

fn dump(common: &Common, sys: &SecondOrderSystem, sub: Option<&str>) -> Result<()> {
    if let Some(dir) = &common.dump_matrices {
        let dir = sub.map_or_else(|| dir.clone(), |s| dir.join(s));
        sys.dump_matrices(&dir)
            .with_context(|| format!("writing matrices to {}", dir.display()))?;
    }
    Ok(())
}

pub fn certificate(common: &Common, choice: Option<(f64, f64, f64)>) -> Result<ExitCode> {
    let cfg = resolve(common, None)?;
    let cert = match choice {
        Some((e1, e2, d)) => certificate_with(&cfg.params, &cfg.gains, e1, e2, d),
        None => certificate_constants(&cfg.params, &cfg.gains),
    };
    println!("{}", serde_json::to_string_pretty(&cert)?);
    Ok(if cert.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Debug, Serialize)]
struct SpectrumSummary {
    count: usize,
    abscissa: f64,
    min_gap: f64,
    max_residual: f64,
    norm: f64,
}

fn spectrum_of(cfg: &RunConfig, sys: &SecondOrderSystem, dir: &Path) -> Result<SpectrumSummary> {
    let spec = eigenvalues(sys, cfg.seed)?;
    spec.write_csv(&dir.join("spectrum.csv"))?;
    let m = spectral_metrics(&spec);
    Ok(SpectrumSummary {
        count: spec.len(),
        abscissa: m.abscissa,
        min_gap: m.min_gap,
        max_residual: spec.max_residual(),
        norm: spec.norm,
    })
}

pub fn spectrum(common: &Common) -> Result<ExitCode> {
    let cfg = resolve(common, None)?;
    let sys = build_system(&cfg)?;
    dump(common, &sys, None)?;
    let dir = run_dir(common, &cfg)?;
    let summary = spectrum_of(&cfg, &sys, &dir)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    samples: usize,
    e0: f64,
    e_norm_final: f64,
    sigma_hat: Option<f64>,
    r2_exp: Option<f64>,
    p_hat: Option<f64>,
    r2_poly: Option<f64>,
}

fn simulate_into(
    cfg: &RunConfig,
    sys: &SecondOrderSystem,
    dir: &Path,
    snapshots: bool,
) -> Result<SimulationSummary> {
    let ic = cfg.ic.parse::<IcChoice>().map_err(|e| anyhow!(e))?.resolve()?;
    let psi0 = StateVector::from_initial_condition(&sys.grid, &sys.params, &ic)?;
    let e0 = stringlab::diagnostics::discrete_energy(sys, &psi0);

    let mut reports: Vec<EnergyReport> = Vec::new();
    let mut snap_rows: Vec<[f64; 4]> = Vec::new();
    simulate_from(sys, psi0, cfg.dt, cfg.t_final, cfg.record_every, |t, psi| {
        reports.push(energy_report(sys, psi, t, e0, cfg.eps1, cfg.eps2));
        if snapshots {
            snap_rows.extend(snapshot_rows(&sys.grid, t, psi));
        }
        Ok(())
    })?;
    write_energy_csv(&dir.join("energy.csv"), &reports)?;
    if snapshots {
        output::write_csv(&dir.join("snapshots.csv"), &["t", "x", "w", "w_t"], &snap_rows)?;
    }

    let times: Vec<f64> = reports.iter().map(|r| r.t).collect();
    let energies: Vec<f64> = reports.iter().map(|r| r.e).collect();
    let fit = fit_decay(&times, &energies).ok();
    Ok(SimulationSummary {
        samples: reports.len(),
        e0,
        e_norm_final: reports.last().map_or(0.0, |r| r.e_norm),
        sigma_hat: fit.map(|f| f.sigma_hat),
        r2_exp: fit.map(|f| f.r2_exp),
        p_hat: fit.and_then(|f| f.p_hat),
        r2_poly: fit.and_then(|f| f.r2_poly),
    })
}

pub fn simulate(common: &Common, snapshots: bool) -> Result<ExitCode> {
    let cfg = resolve(common, None)?;
    let sys = build_system(&cfg)?;
    dump(common, &sys, None)?;
    let dir = run_dir(common, &cfg)?;
    let summary = simulate_into(&cfg, &sys, &dir, snapshots)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    abscissa: f64,
    min_gap: f64,
    sigma_hat: Option<f64>,
    r2_exp: Option<f64>,
    #[serde(rename = "E_norm_final")]
    e_norm_final: f64,
}

fn sweep_one(common: &Common, preset: Preset) -> Result<SweepEntry> {
    let cfg = resolve(common, Some(preset))?;
    let sys = build_system(&cfg)?;
    dump(common, &sys, Some(preset.label()))?;
    let dir = run_dir(common, &cfg)?;
    let spec = spectrum_of(&cfg, &sys, &dir)?;
    fs::copy(
        dir.join("spectrum.csv"),
        common.out.join(format!("spectrum_{}.csv", preset.label())),
    )?;
    let sim = simulate_into(&cfg, &sys, &dir, false)?;
    Ok(SweepEntry {
        abscissa: spec.abscissa,
        min_gap: spec.min_gap,
        sigma_hat: sim.sigma_hat,
        r2_exp: sim.r2_exp,
        e_norm_final: sim.e_norm_final,
    })
}

pub fn sweep(common: &Common, presets: &[Preset]) -> Result<ExitCode> {
    if presets.is_empty() {
        bail!("no presets given");
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let mut unique = presets.to_vec();
    unique.sort();
    unique.dedup();

    let results: Vec<(Preset, Result<SweepEntry>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = unique
            .iter()
            .map(|&p| (p, scope.spawn(move || sweep_one(common, p))))
            .collect();
        handles
            .into_iter()
            .map(|(p, h)| {
                let r = h.join().unwrap_or_else(|_| Err(anyhow!("worker for preset {p} panicked")));
                (p, r)
            })
            .collect()
    });

    let mut summary = serde_json::Map::new();
    for (p, r) in results {
        let entry = r.with_context(|| format!("preset {p}"))?;
        summary.insert(p.label().to_string(), serde_json::to_value(entry)?);
    }
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(common.out.join("summary.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}
