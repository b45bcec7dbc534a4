//! Command-line orchestration: argument/config parsing with full validation,
//! deterministic output emission, and provenance verification.

use crate::dispersion::{self, CollisionModel, ProjectionSpan};
use crate::error::{Result, SegError};
use crate::front::{self, FrontSolverOptions};
use crate::kernel::{InteractionPotential, SpatialGrid, VelocityGrid};
use crate::kinetics::characteristics::{integrate_characteristics, ForceField};
use crate::kinetics::experiments::{
    run_instability_experiment, run_stability_experiment, ExperimentGrids, StabilityCase,
};
use crate::kinetics::DiagnosticsRecord;
use crate::phasediag;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "segkin", version, about = "Two-species kinetic segregation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order parameter and pure-phase densities over a beta range
    PhaseDiagram(PhaseDiagramArgs),
    /// Front minimizer, excess free energy and spectral gap
    Front(FrontArgs),
    /// Penrose scan: beta*Uhat(k) and collisionless growth rates
    Dispersion(DispersionArgs),
    /// Rightmost eigenvalue of the collisional linearized operator
    Eigen(EigenArgs),
    /// Nonlinear stability / instability experiment from a JSON config
    Simulate(SimulateArgs),
    /// Characteristic curves of the front force field
    Characteristics(CharacteristicsArgs),
    /// Recompute and check the config hash embedded in an output file
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PotentialArgs {
    /// potential family: bump | mollifier | tabulated
    #[arg(long, default_value = "bump")]
    pub potential: String,
    /// polynomial degree for the bump family (even, >= 2)
    #[arg(long, default_value_t = 6)]
    pub degree: u32,
    /// two-column CSV (r, U) for the tabulated family
    #[arg(long)]
    pub potential_file: Option<PathBuf>,
}

impl PotentialArgs {
    pub fn build(&self) -> Result<InteractionPotential> {
        match self.potential.as_str() {
            "bump" => InteractionPotential::polynomial_bump(self.degree),
            "mollifier" => Ok(InteractionPotential::mollifier()),
            "tabulated" => {
                let path = self.potential_file.as_ref().ok_or_else(|| {
                    SegError::Config("tabulated potential needs --potential-file".into())
                })?;
                let text = std::fs::read_to_string(path)?;
                let mut r = Vec::new();
                let mut u = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut parts = line.split(',');
                    let (a, b) = (parts.next(), parts.next());
                    match (a, b) {
                        (Some(a), Some(b)) => {
                            r.push(a.trim().parse::<f64>().map_err(|_| {
                                SegError::Config(format!("bad radius on line {}", i + 1))
                            })?);
                            u.push(b.trim().parse::<f64>().map_err(|_| {
                                SegError::Config(format!("bad value on line {}", i + 1))
                            })?);
                        }
                        _ => {
                            return Err(SegError::Config(format!(
                                "line {} is not `r,U`",
                                i + 1
                            )))
                        }
                    }
                }
                InteractionPotential::tabulated(r, u)
            }
            other => Err(SegError::Config(format!("unknown potential family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PhaseDiagramArgs {
    #[arg(long, default_value_t = 0.25)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 111)]
    pub samples: usize,
    #[arg(long, default_value_t = 2.0)]
    pub rho: f64,
    #[arg(long, default_value = "phase_diagram.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FrontArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1024)]
    pub nx: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// CSV with columns (x, rho1, rho2) used as the starting point
    #[arg(long)]
    pub initial_guess: Option<PathBuf>,
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// prefix for <prefix>.csv and <prefix>.json
    #[arg(long, default_value = "front")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DispersionArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 4.0)]
    pub k_max: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[arg(long, default_value = "dispersion.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EigenArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub k: f64,
    /// comma-separated collision strengths
    #[arg(long, default_value = "0.1,1,10,100", value_delimiter = ',')]
    pub alpha_list: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub nu0: f64,
    #[arg(long, default_value_t = 128)]
    pub nv: usize,
    /// invariants kept by the collision projection: full | mass
    #[arg(long, default_value = "full")]
    pub span: String,
    /// constant or hard-sphere-like collision frequency: const | hs
    #[arg(long, default_value = "const")]
    pub frequency: String,
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[arg(long, default_value = "eigen.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// JSON experiment description (see SimulateSpec)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// JSON schema of `segkin simulate --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub beta: f64,
    /// "instability" | "stability-front" | "stability-pure" | "stability-mixed"
    pub experiment: String,
    #[serde(default = "default_potential")]
    pub potential: String,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub k0: Option<f64>,
    #[serde(default)]
    pub delta_list: Option<Vec<f64>>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// escape threshold as a fraction of the equilibrium weighted scale
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_nu0")]
    pub nu0: f64,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_nv")]
    pub nv: usize,
    /// pinned half-length for the front case, periodic length otherwise
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
}

fn default_potential() -> String {
    "bump".into()
}
fn default_degree() -> u32 {
    6
}
fn default_theta() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    1.0
}
fn default_nu0() -> f64 {
    1.0
}
fn default_nx() -> usize {
    128
}
fn default_nv() -> usize {
    128
}
fn default_bound() -> f64 {
    10.0
}
fn default_output_every() -> usize {
    5
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CharacteristicsArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub l: f64,
    #[arg(long, default_value_t = 512)]
    pub nx: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub v0: f64,
    #[arg(long, default_value_t = 20.0)]
    pub s_span: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[arg(long, default_value = "characteristics.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub file: PathBuf,
}

/// Fully validated run configuration; serializes to the canonical JSON that
/// the config hash covers.
#[derive(Debug, Clone, Serialize)]
pub enum RunConfig {
    PhaseDiagram(PhaseDiagramArgs),
    Front(FrontArgs),
    Dispersion(DispersionArgs),
    Eigen(EigenArgs),
    Simulate { spec: SimulateSpec, out_dir: PathBuf },
    Characteristics(CharacteristicsArgs),
    Verify { file: PathBuf },
}

/// Validate the parsed arguments, collecting every violation instead of
/// stopping at the first.
pub fn parse_and_validate(command: Command) -> std::result::Result<RunConfig, Vec<String>> {
    let mut errs: Vec<String> = Vec::new();
    let cfg = match command {
        Command::PhaseDiagram(a) => {
            if a.samples < 2 {
                errs.push("samples must be >= 2".into());
            }
            if !(a.beta_max > a.beta_min) {
                errs.push("empty beta range".into());
            }
            if !(a.rho > 0.0) {
                errs.push("rho must be positive".into());
            }
            RunConfig::PhaseDiagram(a)
        }
        Command::Front(a) => {
            if !(a.beta > 0.0) {
                errs.push("beta must be positive".into());
            } else if a.beta * 2.0 <= 2.0 {
                errs.push(format!(
                    "subcritical beta for front: beta*rho = {} <= 2",
                    a.beta * 2.0
                ));
            }
            if a.l < 5.0 {
                errs.push("front grid needs L >= 5".into());
            }
            if a.nx < 64 {
                errs.push("front grid needs nx >= 64".into());
            }
            if !(a.tol > 0.0 && a.tol < 1e-2) {
                errs.push("tol must lie in (0, 1e-2)".into());
            }
            if let Err(e) = a.potential.build() {
                errs.push(e.to_string());
            }
            RunConfig::Front(a)
        }
        Command::Dispersion(a) => {
            if a.samples < 2 {
                errs.push("samples must be >= 2".into());
            }
            if !(a.k_max > 0.0) {
                errs.push("k_max must be positive".into());
            }
            if let Err(e) = a.potential.build() {
                errs.push(e.to_string());
            }
            RunConfig::Dispersion(a)
        }
        Command::Eigen(a) => {
            if a.k == 0.0 {
                errs.push("k must be nonzero".into());
            }
            if !(a.nu0 > 0.0) {
                errs.push("nu0 must be positive".into());
            }
            if a.nv < 16 {
                errs.push("nv must be >= 16".into());
            }
            if a.alpha_list.is_empty() {
                errs.push("alpha list must be nonempty".into());
            }
            if !matches!(a.span.as_str(), "full" | "mass") {
                errs.push(format!("unknown span `{}` (full | mass)", a.span));
            }
            if !matches!(a.frequency.as_str(), "const" | "hs") {
                errs.push(format!("unknown frequency `{}` (const | hs)", a.frequency));
            }
            if let Err(e) = a.potential.build() {
                errs.push(e.to_string());
            }
            RunConfig::Eigen(a)
        }
        Command::Simulate(a) => {
            let text = match std::fs::read_to_string(&a.config) {
                Ok(t) => t,
                Err(e) => {
                    errs.push(format!("cannot read config {}: {e}", a.config.display()));
                    return Err(errs);
                }
            };
            let spec: SimulateSpec = match serde_json::from_str(&text) {
                Ok(s) => s,
                Err(e) => {
                    errs.push(format!("bad config JSON: {e}"));
                    return Err(errs);
                }
            };
            if !(spec.beta > 0.0) {
                errs.push("beta must be positive".into());
            }
            match spec.experiment.as_str() {
                "instability" => {
                    if spec.k0.is_none() {
                        errs.push("instability experiment needs k0".into());
                    }
                    if spec.delta_list.as_ref().map_or(true, |d| d.is_empty()) {
                        errs.push("instability experiment needs a nonempty delta_list".into());
                    }
                }
                "stability-front" | "stability-pure" | "stability-mixed" => {
                    if spec.delta.is_none() {
                        errs.push("stability experiment needs delta".into());
                    }
                }
                other => errs.push(format!("unknown experiment `{other}`")),
            }
            if spec.nx < 16 || spec.nv < 16 {
                errs.push("nx and nv must be >= 16".into());
            }
            if !(spec.alpha >= 0.0) {
                errs.push("alpha must be >= 0".into());
            }
            RunConfig::Simulate {
                spec,
                out_dir: a.out_dir,
            }
        }
        Command::Characteristics(a) => {
            if !(a.beta > 1.0) {
                errs.push("characteristics uses the front field: beta must exceed 1".into());
            }
            if a.samples < 2 {
                errs.push("samples must be >= 2".into());
            }
            if !(a.s_span > 0.0) {
                errs.push("s_span must be positive".into());
            }
            if let Err(e) = a.potential.build() {
                errs.push(e.to_string());
            }
            RunConfig::Characteristics(a)
        }
        Command::Verify(a) => RunConfig::Verify { file: a.file },
    };
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}

/// FNV-1a 64-bit hash of the canonical config JSON.
pub fn config_hash(canonical_json: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical_json.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn canonical_config(cfg: &RunConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

struct Meta {
    config: String,
    hash: u64,
}

impl Meta {
    fn new(cfg: &RunConfig) -> Self {
        let config = canonical_config(cfg);
        let hash = config_hash(&config);
        Self { config, hash }
    }

    fn csv_preamble(&self) -> String {
        format!(
            "# segkin {VERSION}\n# config_hash: {:016x}\n# config: {}\n",
            self.hash, self.config
        )
    }

    fn json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "version": VERSION,
            "config_hash": format!("{:016x}", self.hash),
            "config": serde_json::from_str::<serde_json::Value>(&self.config).unwrap(),
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Run the selected pipeline, writing artifacts to disk. All payload bytes are
/// deterministic functions of the config (and seed).
pub fn dispatch(cfg: RunConfig) -> Result<()> {
    match cfg {
        RunConfig::PhaseDiagram(ref a) => {
            let meta = Meta::new(&cfg);
            let a = a.clone();
            let table = phasediag::bifurcation_scan(a.beta_min, a.beta_max, a.rho, a.samples)?;
            let mut out = meta.csv_preamble();
            out.push_str("beta,m,rho_plus,rho_minus,regime\n");
            for p in &table {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    p.beta, p.m, p.rho_plus, p.rho_minus, p.regime
                ));
            }
            write_atomic(&a.out, out.as_bytes())
        }
        RunConfig::Front(ref a) => {
            let meta = Meta::new(&cfg);
            let a = a.clone();
            let pot = a.potential.build()?;
            let grid = SpatialGrid::pinned(a.l, a.nx, 0.0, 0.0)?;
            let opts = FrontSolverOptions {
                tol: a.tol,
                damping: a.damping,
                ..Default::default()
            };
            let guess = match &a.initial_guess {
                Some(path) => Some(read_profile_csv(path, a.nx)?),
                None => None,
            };
            let profile = front::solve_front(
                &pot,
                a.beta,
                &grid,
                &opts,
                guess.as_ref().map(|(g1, g2)| (g1.as_slice(), g2.as_slice())),
            )?;
            let excess = front::excess_free_energy(&pot, &profile)?;
            let gap = front::spectral_gap(&pot, &profile, 1e-12)?;
            let decay = front::tail_decay_rate(&profile, None)?;

            let mut csv = meta.csv_preamble();
            csv.push_str("x,rho1,rho2\n");
            for i in 0..a.nx {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    grid.node(i),
                    profile.rho1[i],
                    profile.rho2[i]
                ));
            }
            write_atomic(&a.out_prefix.with_extension("csv"), csv.as_bytes())?;

            let summary = serde_json::json!({
                "meta": meta.json_value(),
                "potential": pot.describe(),
                "beta": a.beta,
                "chem_pot": profile.chem_pot,
                "residual": profile.residual,
                "iterations": profile.iterations,
                "rho_plus": profile.phase.rho_plus,
                "rho_minus": profile.phase.rho_minus,
                "midpoint_rho1": profile.midpoint_rho1(),
                "excess_free_energy": excess.value,
                "excess_tail_sensitivity": excess.tail_sensitivity,
                "truncation_dominated": excess.truncation_dominated,
                "spectral_gap": gap.gap,
                "null_residual": gap.null_residual,
                "tail_decay_rate": decay.rate,
                "tail_fit_residual": decay.fit_residual,
                "oddness_defect": profile.oddness_defect(),
                "derivative_identity_defect": profile.derivative_identity_defect(&pot)?,
            });
            write_atomic(
                &a.out_prefix.with_extension("json"),
                serde_json::to_string_pretty(&summary)?.as_bytes(),
            )
        }
        RunConfig::Dispersion(ref a) => {
            let meta = Meta::new(&cfg);
            let a = a.clone();
            let pot = a.potential.build()?;
            let scan = dispersion::penrose_scan(&pot, a.beta, a.k_max, a.samples)?;
            let mut out = meta.csv_preamble();
            out.push_str("k,uhat,lambda\n");
            for i in 0..scan.k_values.len() {
                match scan.lambda[i] {
                    Some(l) => out.push_str(&format!(
                        "{},{},{}\n",
                        scan.k_values[i], scan.uhat[i], l
                    )),
                    None => out.push_str(&format!("{},{},\n", scan.k_values[i], scan.uhat[i])),
                }
            }
            write_atomic(&a.out, out.as_bytes())
        }
        RunConfig::Eigen(ref a) => {
            let meta = Meta::new(&cfg);
            let a = a.clone();
            let pot = a.potential.build()?;
            let vgrid = VelocityGrid::gauss_hermite(a.nv, a.beta)?;
            let span = if a.span == "mass" {
                ProjectionSpan::MassOnly
            } else {
                ProjectionSpan::MassMomentumEnergy
            };
            let mut rows = Vec::new();
            for &alpha in &a.alpha_list {
                let model = CollisionModel {
                    kind: if alpha == 0.0 {
                        dispersion::CollisionKind::None
                    } else if a.frequency == "hs" {
                        dispersion::CollisionKind::BgkHardSphereFrequency { nu0: a.nu0 }
                    } else {
                        dispersion::CollisionKind::Bgk { nu0: a.nu0 }
                    },
                    alpha,
                    span,
                };
                let op = dispersion::build_talpha(&pot, a.beta, a.k, model, &vgrid)?;
                let eig = dispersion::rightmost_eigenvalue(&op)?;
                rows.push(serde_json::json!({
                    "alpha": alpha,
                    "lambda_re": eig.lambda_re,
                    "lambda_im": eig.lambda_im,
                    "residual": eig.residual,
                    "continuity_residual": eig.continuity_residual(&vgrid),
                }));
            }
            let doc = serde_json::json!({
                "meta": meta.json_value(),
                "beta": a.beta,
                "k": a.k,
                "uhat": pot.uhat(a.k),
                "results": rows,
            });
            write_atomic(&a.out, serde_json::to_string_pretty(&doc)?.as_bytes())
        }
        RunConfig::Simulate { ref spec, ref out_dir } => {
            let meta = Meta::new(&cfg);
            let spec = spec.clone();
            let out_dir = out_dir.clone();
            run_simulation(&meta, &spec, &out_dir)
        }
        RunConfig::Characteristics(ref a) => {
            let meta = Meta::new(&cfg);
            let a = a.clone();
            let pot = a.potential.build()?;
            let grid = SpatialGrid::pinned(a.l, a.nx, 0.0, 0.0)?;
            let profile =
                front::solve_front(&pot, a.beta, &grid, &FrontSolverOptions::default(), None)?;
            let force = crate::kernel::vlasov_force_with_halo(
                &pot,
                &grid,
                &profile.rho2,
                (profile.phase.rho_plus, profile.phase.rho_minus),
            )?;
            let field = ForceField::from_samples(&grid, &force)?;
            let trace =
                integrate_characteristics(&field, (0.0, a.x0, a.v0), a.s_span, a.tol, a.samples)?;
            let mut out = meta.csv_preamble();
            out.push_str("s,x,v,dx_dv,dv_dv,energy\n");
            for p in &trace.samples {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    p.s, p.x, p.v, p.dx_dv, p.dv_dv, p.energy
                ));
            }
            write_atomic(&a.out, out.as_bytes())
        }
        RunConfig::Verify { ref file } => verify_file(file),
    }
}

fn read_profile_csv(path: &Path, nx: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(SegError::Config("initial guess rows need x,rho1,rho2".into()));
        }
        g1.push(cols[1].trim().parse().map_err(|_| {
            SegError::Config("bad rho1 in initial guess".into())
        })?);
        g2.push(cols[2].trim().parse().map_err(|_| {
            SegError::Config("bad rho2 in initial guess".into())
        })?);
    }
    if g1.len() != nx {
        return Err(SegError::Config(format!(
            "initial guess has {} rows, grid has {nx}",
            g1.len()
        )));
    }
    Ok((g1, g2))
}

fn run_simulation(meta: &Meta, spec: &SimulateSpec, out_dir: &Path) -> Result<()> {
    let pot = PotentialArgs {
        potential: spec.potential.clone(),
        degree: spec.degree,
        potential_file: None,
    }
    .build()?;
    let grids = ExperimentGrids {
        nx: spec.nx,
        nv: spec.nv,
        cfl: 0.85,
        output_every: spec.output_every,
    };
    let (series, summary): (Vec<Vec<DiagnosticsRecord>>, serde_json::Value) =
        match spec.experiment.as_str() {
            "instability" => {
                let report = run_instability_experiment(
                    &pot,
                    spec.beta,
                    spec.k0.unwrap(),
                    spec.delta_list.as_ref().unwrap(),
                    spec.theta,
                    spec.alpha,
                    spec.nu0,
                    &grids,
                    spec.t_end,
                )?;
                let summary = serde_json::json!({
                    "meta": meta.json_value(),
                    "experiment": "instability",
                    "lambda_ref": report.lambda_ref,
                    "fitted_rate": report.fitted_rate,
                    "rate_rel_err": report.rate_rel_err,
                    "rate_ok": report.rate_rel_err <= 0.05,
                    "harmonic_takeover": report.harmonic_takeover,
                    "theta_w": report.theta_w,
                    "theta_l2": report.theta_l2,
                    "escapes": report.escapes,
                    "escape_slope": report.escape_slope,
                    "escape_slope_expected": report.escape_slope_expected,
                    "escape_slope_rel_err": report.escape_slope_rel_err,
                    "escape_ok": report.escape_slope_rel_err.map(|e| e <= 0.10),
                });
                if spec.snapshots {
                    if let Some(state) = &report.final_state {
                        write_snapshot(&out_dir.join("final_state.bin"), state)?;
                    }
                }
                (report.series, summary)
            }
            other => {
                let case = match other {
                    "stability-front" => StabilityCase::Front {
                        l: spec.l.unwrap_or(12.0),
                    },
                    "stability-pure" => StabilityCase::PurePhase {
                        period: spec.l.unwrap_or(20.0),
                    },
                    "stability-mixed" => StabilityCase::Mixed {
                        period: spec.l.unwrap_or(20.0),
                    },
                    _ => unreachable!("validated"),
                };
                let report = run_stability_experiment(
                    &pot,
                    spec.beta,
                    case,
                    spec.delta.unwrap(),
                    spec.alpha,
                    spec.nu0,
                    &grids,
                    spec.t_end.unwrap_or(50.0),
                    spec.bound,
                )?;
                let summary = serde_json::json!({
                    "meta": meta.json_value(),
                    "experiment": other,
                    "w_linf_initial": report.w_linf_initial,
                    "w_linf_sup": report.w_linf_sup,
                    "ratio": report.ratio,
                    "bound": report.bound,
                    "pass": report.pass,
                });
                if spec.snapshots {
                    if let Some(state) = &report.final_state {
                        write_snapshot(&out_dir.join("final_state.bin"), state)?;
                    }
                }
                (vec![report.series], summary)
            }
        };

    for (i, s) in series.iter().enumerate() {
        let mut csv = meta.csv_preamble();
        csv.push_str("t,mass1,mass2,energy,h_function,hcal,w_linf,l2\n");
        for r in s {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.t, r.mass1, r.mass2, r.energy, r.h_function, r.hcal, r.w_linf, r.l2
            ));
        }
        write_atomic(&out_dir.join(format!("diagnostics_{i}.csv")), csv.as_bytes())?;
    }
    write_atomic(
        &out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )
}

/// Write a phase-space snapshot: header (Nx u64, Nv u64, t f64), then f1 and
/// f2 row-major, all little-endian 64-bit.
pub fn write_snapshot(path: &Path, state: &crate::kinetics::SpeciesState) -> Result<()> {
    let mut bytes = Vec::with_capacity(24 + 16 * state.f1.len());
    bytes.extend_from_slice(&(state.nx() as u64).to_le_bytes());
    bytes.extend_from_slice(&(state.nv() as u64).to_le_bytes());
    bytes.extend_from_slice(&state.t.to_le_bytes());
    for v in state.f1.iter().chain(state.f2.iter()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Read back a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<(usize, usize, f64, Vec<f64>, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 24 {
        return Err(SegError::Config("snapshot too short".into()));
    }
    let nx = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let nv = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let t = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let n = nx * nv;
    if bytes.len() != 24 + 16 * n {
        return Err(SegError::Config(format!(
            "snapshot payload length {} does not match header ({nx} x {nv})",
            bytes.len() - 24
        )));
    }
    let read_f = |off: usize| -> Vec<f64> {
        (0..n)
            .map(|i| f64::from_le_bytes(bytes[off + 8 * i..off + 8 * i + 8].try_into().unwrap()))
            .collect()
    };
    Ok((nx, nv, t, read_f(24), read_f(24 + 8 * n)))
}

/// Recompute the config hash embedded in a CSV or JSON artifact.
pub fn verify_file(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let (embedded, config) = if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| SegError::Config(format!("bad JSON: {e}")))?;
        let meta = doc
            .get("meta")
            .ok_or_else(|| SegError::Config("no meta object".into()))?;
        let hash = meta
            .get("config_hash")
            .and_then(|v| v.as_str())
            .ok_or_else(|| SegError::Config("no config_hash in meta".into()))?
            .to_string();
        let config = serde_json::to_string(
            meta.get("config")
                .ok_or_else(|| SegError::Config("no config in meta".into()))?,
        )?;
        (hash, config)
    } else {
        let mut hash = None;
        let mut config = None;
        for line in text.lines().take(8) {
            if let Some(rest) = line.strip_prefix("# config_hash: ") {
                hash = Some(rest.trim().to_string());
            } else if let Some(rest) = line.strip_prefix("# config: ") {
                config = Some(rest.trim().to_string());
            }
        }
        (
            hash.ok_or_else(|| SegError::Config("no `# config_hash:` line".into()))?,
            config.ok_or_else(|| SegError::Config("no `# config:` line".into()))?,
        )
    };
    let recomputed = format!("{:016x}", config_hash(&config));
    if recomputed == embedded {
        println!("{}: config hash OK ({embedded})", path.display());
        Ok(())
    } else {
        Err(SegError::Config(format!(
            "config hash mismatch: embedded {embedded}, recomputed {recomputed}"
        )))
    }
}
