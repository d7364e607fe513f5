//! Batch front end: configuration loading and validation, the five
//! commands, and report emission.
//!
//! Every command returns a [`RunReport`] whose residual table decides the
//! exit code: 0 when all rows pass, 1 otherwise. Schema and configuration
//! errors exit with 2, computation errors with 3.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::darboux::{self, AnalyticSeed, DressingSeed, SchrodingerOp};
use crate::derham::{self, DiffMode, GenComplex};
use crate::error::{Error, Result};
use crate::factorize::{self, ProjectorChain};
use crate::grid::{Boundary, Grid1D, ProductGrid};
use crate::io::{self, Series};
use crate::lagrange::{FormField, SurfaceRegion};
use crate::linalg;
use crate::spectral;
use crate::transmute::{self, Side, Sign, TransmutationData};
use crate::verify::{self, ResidualRow, Tolerances};
use crate::{CMat, C64};

pub const CONFIG_SCHEMA: &str = include_str!("../schema/config.schema.json");

pub const EXIT_PASS: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Darboux,
    Transmute,
    Factorize,
    Derham,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Darboux => "darboux",
            Command::Transmute => "transmute",
            Command::Factorize => "factorize",
            Command::Derham => "derham",
            Command::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    #[serde(default = "dirichlet")]
    pub boundary: Boundary,
}

fn dirichlet() -> Boundary {
    Boundary::Dirichlet
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D> {
        match self.boundary {
            Boundary::Dirichlet => Grid1D::dirichlet(self.lower, self.upper, self.n),
            Boundary::Periodic => Grid1D::periodic(self.lower, self.upper, self.n),
        }
        .map_err(|e| Error::Config(format!("grid: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// `amplitude * sech^2(x / width)`.
    Sech2 {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// `amplitude * cos(x)`.
    Cosine { amplitude: f64 },
    /// One `[re, im]` pair per grid point.
    Samples { values: Vec<[f64; 2]> },
    /// CSV with columns `x, q_re, q_im`, relative to the config file.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default = "two")]
    pub scheme: usize,
    #[serde(default = "zero_potential")]
    pub potential: PotentialSpec,
}

fn two() -> usize {
    2
}

fn zero_potential() -> PotentialSpec {
    PotentialSpec::Zero
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self { scheme: 2, potential: PotentialSpec::Zero }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Analytic,
    Sampled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarbouxSpec {
    pub kappas: Option<Vec<f64>>,
    pub seed_source: Option<SeedSource>,
    pub seeds: Option<Vec<DressingSeed>>,
    pub n_low: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    /// Exact discrete one-soliton seed on a free Dirichlet grid.
    Soliton { kappa: f64 },
    /// The `count` eigenpairs of smallest modulus of the base operator.
    Eigen { count: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmuteSpec {
    pub family: Option<FamilySpec>,
    pub signs: Option<Vec<Sign>>,
    pub bandwidth: Option<usize>,
    pub edge: Option<usize>,
    pub spectrum: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiSpec {
    Zero {
        n: usize,
    },
    Random {
        n: usize,
        #[serde(default = "one_count")]
        count: usize,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Matrix CSV with `c{j}_re, c{j}_im` columns, relative to the config file.
    File {
        path: PathBuf,
    },
}

fn one_count() -> usize {
    1
}

fn default_scale() -> f64 {
    0.3
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizeSpec {
    pub phi: Option<PhiSpec>,
    pub chain: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerhamSpec {
    pub n: Option<Vec<usize>>,
    pub lengths: Option<Vec<f64>>,
    pub boundary: Option<Boundary>,
    pub fiber: Option<usize>,
    pub connection: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    pub mode: Option<DiffMode>,
    pub hodge_samples: Option<usize>,
    pub oracle: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub criteria: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub darboux: DarbouxSpec,
    #[serde(default)]
    pub transmute: TransmuteSpec,
    #[serde(default)]
    pub factorize: FactorizeSpec,
    #[serde(default)]
    pub derham: DerhamSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory that relative file references resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Schema violations as one message per failing location.
pub fn schema_errors(instance: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(CONFIG_SCHEMA).expect("bundled schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    validator.iter_errors(instance).map(|e| format!("{}: {e}", e.instance_path())).collect()
}

impl RunConfig {
    /// Schema validation, deserialization and semantic checks; every
    /// failure is an [`Error::Config`].
    pub fn from_value(value: &Value, base_dir: &Path) -> Result<Self> {
        let errors = schema_errors(value);
        if !errors.is_empty() {
            return Err(Error::Config(format!("schema violation: {}", errors.join("; "))));
        }
        let mut cfg: RunConfig = serde_json::from_value(value.clone()).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Value)> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_value(&value, &base)?, value))
    }

    fn check(&self) -> Result<()> {
        if let Some((k, v)) = self.tolerances.0.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Config(format!("tolerance {k} = {v} is not a finite non-negative number")));
        }
        if let Some(g) = &self.grid {
            if !(g.lower < g.upper) {
                return Err(Error::Config(format!("grid: lower {} must be below upper {}", g.lower, g.upper)));
            }
        }
        let d = &self.derham;
        if let (Some(n), Some(l)) = (&d.n, &d.lengths) {
            if n.len() != l.len() {
                return Err(Error::Config("derham: n and lengths differ in length".into()));
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn grid_or(&self, lower: f64, upper: f64, n: usize) -> Result<Grid1D> {
        match &self.grid {
            Some(g) => g.build(),
            None => Grid1D::dirichlet(lower, upper, n),
        }
    }

    fn potential(&self, grid: &Grid1D) -> Result<Vec<C64>> {
        let xs = grid.points();
        Ok(match &self.operator.potential {
            PotentialSpec::Zero => vec![C64::new(0.0, 0.0); xs.len()],
            PotentialSpec::Sech2 { amplitude, width } => {
                xs.iter().map(|x| C64::new(amplitude / (x / width).cosh().powi(2), 0.0)).collect()
            }
            PotentialSpec::Cosine { amplitude } => xs.iter().map(|x| C64::new(amplitude * x.cos(), 0.0)).collect(),
            PotentialSpec::Samples { values } => {
                if values.len() != xs.len() {
                    return Err(Error::Config(format!("{} potential samples for {} grid points", values.len(), xs.len())));
                }
                values.iter().map(|v| C64::new(v[0], v[1])).collect()
            }
            PotentialSpec::File { path } => read_potential(&self.resolve(path), &xs)?,
        })
    }
}

fn read_potential(path: &Path, xs: &[f64]) -> Result<Vec<C64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let f = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad value in column {i}", path.display())))
        };
        out.push((f(0)?, C64::new(f(1)?, f(2)?)));
    }
    if out.len() != xs.len() || out.iter().zip(xs).any(|((x, _), g)| (x - g).abs() > 1e-9 * (1.0 + g.abs())) {
        return Err(Error::Config(format!("{}: x column does not match the grid", path.display())));
    }
    Ok(out.into_iter().map(|(_, q)| q).collect())
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub plots: bool,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub residuals: Vec<ResidualRow>,
    pub diagnostics: BTreeMap<String, Value>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock seconds per stage; excluded from the hash and written to
    /// `timings.json` rather than `report.json`.
    pub timings: Vec<StageTime>,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    pub fn failing(&self) -> Vec<&ResidualRow> {
        self.residuals.iter().filter(|r| !r.pass).collect()
    }

    /// Canonical JSON of everything except the timings.
    pub fn hashed_json(&self) -> String {
        let v = json!({
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "residuals": self.residuals,
            "diagnostics": self.diagnostics,
            "artifacts": self.artifacts,
        });
        serde_json::to_string(&v).expect("report serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.hashed_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The line printed for determinism comparisons.
    pub fn hash_line(&self) -> String {
        format!("report-sha256 {} {}", self.command, self.hash())
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            EXIT_PASS
        } else {
            EXIT_RESIDUAL
        }
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_SCHEMA,
        _ => EXIT_COMPUTE,
    }
}

/// Output directory, collected artifacts and stage timings of one run.
struct Run {
    out: PathBuf,
    plots: bool,
    seed: u64,
    rows: Vec<ResidualRow>,
    diagnostics: BTreeMap<String, Value>,
    artifacts: Vec<String>,
    timings: Vec<StageTime>,
}

impl Run {
    fn new(cfg: &RunConfig, opts: &RunOptions) -> Self {
        let out = opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Self {
            out,
            plots: opts.plots,
            seed: opts.seed.or(cfg.seed).unwrap_or(0),
            rows: Vec::new(),
            diagnostics: BTreeMap::new(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.timings.push(StageTime { stage: name.into(), seconds: t.elapsed().as_secs_f64() });
        r
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_atomic(&self.out.join(name), bytes)?;
        self.artifacts.push(name.into());
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: &Value) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(v)?.as_bytes())
    }

    fn plot(&mut self, name: &str, title: &str, series: &[Series]) -> Result<()> {
        if self.plots {
            self.write(name, io::svg_plot(title, series).as_bytes())?;
        }
        Ok(())
    }

    fn diag(&mut self, key: &str, v: impl Serialize) {
        self.diagnostics.insert(key.into(), serde_json::to_value(v).expect("diagnostic serializes"));
    }

    fn finish(mut self, command: Command, config: &Value) -> Result<RunReport> {
        let mut report = RunReport {
            command: command.name().into(),
            seed: self.seed,
            config: config.clone(),
            residuals: std::mem::take(&mut self.rows),
            diagnostics: std::mem::take(&mut self.diagnostics),
            artifacts: std::mem::take(&mut self.artifacts),
            timings: std::mem::take(&mut self.timings),
        };
        report.artifacts.push("report.json".into());
        report.artifacts.push("timings.json".into());
        let mut hashed: Value = serde_json::from_str(&report.hashed_json())?;
        hashed["hash"] = Value::String(report.hash());
        io::write_atomic(&self.out.join("report.json"), serde_json::to_string_pretty(&hashed)?.as_bytes())?;
        io::write_atomic(&self.out.join("timings.json"), serde_json::to_string_pretty(&report.timings)?.as_bytes())?;
        Ok(report)
    }
}

fn seeds_for(cfg: &RunConfig) -> Vec<DressingSeed> {
    let d = &cfg.darboux;
    if let Some(s) = &d.seeds {
        return s.clone();
    }
    let kappas = d.kappas.clone().unwrap_or_else(|| vec![1.0]);
    match d.seed_source.unwrap_or(SeedSource::Analytic) {
        SeedSource::Analytic => DressingSeed::soliton_sequence(&kappas),
        SeedSource::Sampled => {
            let mut k = kappas;
            k.sort_by(f64::total_cmp);
            k.iter().map(|k| DressingSeed::Sampled { energy: -k * k }).collect()
        }
    }
}

/// Closed form of a single analytic cosh dressing of the free operator.
fn closed_form(seeds: &[DressingSeed]) -> Option<impl Fn(f64) -> f64> {
    match seeds {
        [DressingSeed::Analytic { seed: AnalyticSeed::Cosh { kappa, center } }] => {
            let (k, c) = (*kappa, *center);
            Some(move |x: f64| -2.0 * k * k / (k * (x - c)).cosh().powi(2))
        }
        _ => None,
    }
}

fn nearest_index(grid: &Grid1D, x: f64) -> usize {
    (0..grid.len()).min_by(|&a, &b| (grid.point(a) - x).abs().total_cmp(&(grid.point(b) - x).abs())).unwrap_or(0)
}

/// Dressing pipeline with spectrum comparison; writes the dressed potential.
pub fn cmd_darboux(cfg: &RunConfig, config: &Value, opts: &RunOptions) -> Result<RunReport> {
    let mut run = Run::new(cfg, opts);
    let tol = &cfg.tolerances;
    let grid = cfg.grid_or(-20.0, 20.0, 401)?;
    let base = SchrodingerOp::new(grid.clone(), cfg.potential(&grid)?)?.with_scheme(cfg.operator.scheme)?;
    let seeds = seeds_for(cfg);
    let dressed = run.stage("dressing", || darboux::crum_iterate(&base, &seeds))?;
    let n_low = cfg.darboux.n_low.unwrap_or(20);
    let rep = run.stage("spectrum", || darboux::spectrum_compare(&base, &dressed, n_low))?;

    let mut energies: Vec<f64> = seeds.iter().map(DressingSeed::energy).filter(|e| *e < 0.0).collect();
    energies.sort_by(f64::total_cmp);
    run.rows.push(tol.equal("darboux.new_negative", rep.new_negative.len() as f64, energies.len() as f64));
    for (j, e) in energies.iter().enumerate() {
        let err = rep.new_negative.get(j).map_or(f64::INFINITY, |l| (l - e).abs());
        run.rows.push(tol.max(&format!("darboux.bound_state_{j}"), err, 5e-3).with_detail(format!("expected {e}")));
    }
    let i0 = nearest_index(&grid, 0.0);
    let q0 = dressed.potential()[i0];
    run.diag("q_tilde_at_origin", json!({ "x": grid.point(i0), "re": q0.re, "im": q0.im }));
    if let Some(f) = closed_form(&seeds) {
        if base.potential().iter().all(|q| q.norm() == 0.0) {
            let x = grid.point(i0);
            run.rows.push(
                tol.max("darboux.q_tilde_at_origin", (q0 - C64::new(f(x), 0.0)).norm(), 1e-8)
                    .with_detail(format!("q~({x}) = {} against {}", q0.re, f(x))),
            );
            let worst = (0..grid.len()).map(|i| (dressed.potential()[i].re - f(grid.point(i))).abs()).fold(0.0, f64::max);
            run.rows.push(tol.max("darboux.closed_form", worst, 1e-8));
        }
    }
    run.diag("spectrum", &rep);

    run.write("potential.csv", &io::potential_csv(&dressed)?)?;
    run.write("potential_base.csv", &io::potential_csv(&base)?)?;
    run.write_json("spectrum.json", &serde_json::to_value(&rep)?)?;
    let xs = grid.points();
    let qb: Vec<f64> = base.potential().iter().map(|z| z.re).collect();
    let qd: Vec<f64> = dressed.potential().iter().map(|z| z.re).collect();
    run.plot("potential.svg", "potential before and after dressing", &[
        Series { name: "base", x: &xs, y: &qb },
        Series { name: "dressed", x: &xs, y: &qd },
    ])?;
    let idx: Vec<f64> = (0..rep.before.len()).map(|i| i as f64).collect();
    run.plot("eigenvalues.svg", "lowest eigenvalues", &[
        Series { name: "base", x: &idx, y: &rep.before },
        Series { name: "dressed", x: &idx, y: &rep.after },
    ])?;
    run.finish(Command::Darboux, config)
}

/// Full transmutation construction with intertwining, locality,
/// independence and spectrum diagnostics.
pub fn cmd_transmute(cfg: &RunConfig, config: &Value, opts: &RunOptions) -> Result<RunReport> {
    let mut run = Run::new(cfg, opts);
    let tol = &cfg.tolerances;
    let t = &cfg.transmute;
    let grid = cfg.grid_or(-20.0, 20.0, 400)?;
    let base_op = SchrodingerOp::new(grid.clone(), cfg.potential(&grid)?)?.with_scheme(cfg.operator.scheme)?;
    let l = base_op.operator()?;
    let family = t.family.clone().unwrap_or(FamilySpec::Soliton { kappa: 1.0 });
    let data = run.stage("family", || match &family {
        FamilySpec::Soliton { kappa } => {
            if base_op.potential().iter().any(|q| q.norm() != 0.0) || cfg.operator.scheme != 2 {
                return Err(Error::Config("the soliton family needs the free order-2 operator".into()));
            }
            transmute::soliton_data(&grid, *kappa)
        }
        FamilySpec::Eigen { count } => TransmutationData::from_family(grid.clone(), 1, &spectral::eigensolve(&l, *count, None)?),
    })?;
    let (bw, edge) = (t.bandwidth.unwrap_or(cfg.operator.scheme / 2), t.edge.unwrap_or(verify::SOLITON_EDGE));
    // the discrete soliton seed vanishes only at the lower exterior node, so
    // only the plus operator sees no boundary concomitant
    let signs = t.signs.clone().unwrap_or_else(|| match family {
        FamilySpec::Soliton { .. } => vec![Sign::Plus],
        FamilySpec::Eigen { .. } => vec![Sign::Plus, Sign::Minus],
    });
    let mut conds = BTreeMap::new();
    let mut inter = BTreeMap::new();
    let mut local = BTreeMap::new();
    for sign in signs {
        let s = match sign {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        };
        let om = run.stage(&format!("build {s}"), || transmute::delsarte_operator(&data, sign, Side::Forward))?;
        let ltd = run.stage(&format!("transform {s}"), || transmute::transform_operator_dd(&l, &om))?;
        let lt = crate::grid::OperatorMatrix::from_dense(ltd.to_cmat());
        let ir = transmute::intertwining_residual(&lt, &om, &l)?;
        let loc = transmute::locality_check(&lt, bw, edge);
        conds.insert(s, om.condition_number());
        inter.insert(s, ir);
        local.insert(s, loc);
        run.rows.push(tol.max(&format!("transmute.{s}.intertwining"), ir, 1e-9));
        run.rows.push(tol.max(&format!("transmute.{s}.locality"), loc, 1e-6).with_detail(format!("bandwidth {bw}, edge {edge}")));
        run.rows.push(tol.max(&format!("transmute.{s}.inverse"), om.inverse_residual(), 1e-8));
        run.rows.push(tol.max(&format!("transmute.{s}.volterra_radius"), om.volterra_radius()?, 1e-10));
        run.rows.push(tol.max(&format!("transmute.{s}.condition"), om.condition_number(), transmute::COND_LIMIT));
        if t.spectrum.unwrap_or(true) {
            let sm = run.stage(&format!("spectrum {s}"), || transmute::spectrum_mismatch(&l, &ltd))?;
            run.rows.push(tol.max(&format!("transmute.{s}.spectrum"), sm, 1e-10));
        }
        let q = darboux::extract_potential(&lt);
        let (xs, qs): (Vec<f64>, Vec<f64>) =
            (0..grid.len()).filter_map(|i| q[i].map(|v| (grid.point(i), v.re))).unzip();
        run.write(&format!("potential_{s}.csv"), &io::columns_csv(&["x", "q_re"], &[xs.clone(), qs.clone()])?)?;
        if let FamilySpec::Soliton { kappa } = family {
            let k = kappa;
            let exact: Vec<f64> = xs.iter().map(|x| -2.0 * k * k / (k * x).cosh().powi(2)).collect();
            let err = qs.iter().zip(&exact).skip(edge).take(qs.len().saturating_sub(2 * edge)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            run.diag(&format!("{s}_potential_vs_sech2"), err);
            run.plot(&format!("potential_{s}.svg"), "extracted potential", &[
                Series { name: "extracted", x: &xs, y: &qs },
                Series { name: "-2k^2 sech^2(kx)", x: &xs, y: &exact },
            ])?;
        }
    }
    let independence = run.stage("independence", || transmute::independence_check(&data, &l, edge))?;
    let adjoint = transmute::adjoint_compat_check(&data, &l, Sign::Plus)?;
    let diagnostics = json!({
        "intertwining": inter,
        "locality": local,
        "independence": independence,
        "adjoint_compat": adjoint,
        "condition_numbers": conds,
    });
    run.write_json("transmute_diagnostics.json", &diagnostics)?;
    run.diag("independence", independence);
    run.diag("adjoint_compat", adjoint);
    for p in io::write_transmutation(&data, &run.out)? {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        run.artifacts.push(name);
    }
    run.finish(Command::Transmute, config)
}

fn phi_samples(cfg: &RunConfig, seed: u64) -> Result<Vec<CMat>> {
    Ok(match cfg.factorize.phi.clone().unwrap_or(PhiSpec::Random { n: 50, count: 200, scale: 0.3 }) {
        PhiSpec::Zero { n } => vec![CMat::zeros(n, n)],
        PhiSpec::Random { n, count, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| factorize::random_unit_minor(n, scale, &mut rng)).collect()
        }
        PhiSpec::File { path } => {
            let m = io::read_matrix_csv(&cfg.resolve(&path)).map_err(|e| Error::Config(e.to_string()))?;
            if !m.is_square() || m.nrows() == 0 {
                return Err(Error::Config(format!("{}: Phi must be square and non-empty", path.display())));
            }
            vec![m]
        }
    })
}

/// GK factorization and GLM solve on supplied or generated `Phi`.
pub fn cmd_factorize(cfg: &RunConfig, config: &Value, opts: &RunOptions) -> Result<RunReport> {
    let mut run = Run::new(cfg, opts);
    let tol = &cfg.tolerances;
    let samples = phi_samples(cfg, run.seed)?;
    let n = samples[0].nrows();
    let chain = match &cfg.factorize.chain {
        Some(order) => ProjectorChain::new(order.clone()).map_err(|e| Error::Config(format!("chain: {e}")))?,
        None => ProjectorChain::natural(n),
    };
    if chain.len() != n {
        return Err(Error::Config(format!("chain of length {} for {n}x{n} Phi", chain.len())));
    }
    let (mut recon, mut brk, mut ddev, mut bad) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let (mut glm, mut agree, mut integral) = (0.0f64, 0.0f64, 0.0f64);
    let mut last = None;
    let outcome = run.stage("factorize", || -> Result<()> {
        for phi in &samples {
            let pair = factorize::gk_factorize(phi, &chain)?;
            recon = recon.max(pair.reconstruction_residual());
            brk = brk.max(pair.break_relation());
            ddev = ddev.max(pair.d_deviation());
            bad += usize::from(!pair.structure_exact());
            let (kp, km) = factorize::glm_solve(phi, &chain)?;
            glm = glm.max(factorize::glm_residual(phi, &kp, &km));
            agree = agree.max((&kp - &pair.k_plus).iter().map(|z| z.norm()).fold(0.0, f64::max));
            let chain_sum = factorize::gk_integral_factors(phi, &chain, factorize::Endpoint::Left)?;
            integral = integral.max(linalg::frob(&(chain_sum - &pair.k_plus)));
            last = Some(pair);
        }
        Ok(())
    });
    let singular = match &outcome {
        Err(Error::SingularMinor { k }) => Some(*k),
        _ => None,
    };
    let summary = json!({ "residual": recon, "D_deviation": ddev, "first_singular_minor": singular });
    run.write_json("factorization.json", &summary)?;
    outcome?;
    run.rows.push(tol.max("factorize.reconstruction", recon, 1e-10).with_detail(format!("{} matrices of size {n}", samples.len())));
    run.rows.push(tol.equal("factorize.structure_violations", bad as f64, 0.0));
    run.rows.push(tol.max("factorize.break_relation", brk, 0.0));
    run.rows.push(tol.max("factorize.glm_residual", glm, 1e-10));
    run.rows.push(tol.max("factorize.glm_vs_gk", agree, 1e-9));
    run.diag("D_deviation", ddev);
    run.diag("chain_sum_vs_gk", integral);
    if let (1, Some(pair)) = (samples.len(), last) {
        run.write("k_plus.csv", &io::matrix_csv(&pair.k_plus)?)?;
        run.write("k_minus.csv", &io::matrix_csv(&pair.k_minus)?)?;
    }
    run.finish(Command::Factorize, config)
}

fn connection_matrices(spec: &DerhamSpec, dim: usize, fiber: usize) -> Result<Option<Vec<CMat>>> {
    let Some(raw) = &spec.connection else { return Ok(None) };
    if raw.len() != dim {
        return Err(Error::Config(format!("connection needs {dim} matrices, got {}", raw.len())));
    }
    raw.iter()
        .map(|m| {
            if m.len() != fiber || m.iter().any(|r| r.len() != fiber) {
                return Err(Error::Config(format!("connection matrices must be {fiber}x{fiber}")));
            }
            Ok(CMat::from_fn(fiber, fiber, |i, j| C64::new(m[i][j][0], m[i][j][1])))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Complex assembly, harmonic dimensions against the expected Betti
/// numbers, Hodge decomposition and period checks.
pub fn cmd_derham(cfg: &RunConfig, config: &Value, opts: &RunOptions) -> Result<RunReport> {
    let mut run = Run::new(cfg, opts);
    let tol = &cfg.tolerances;
    let d = &cfg.derham;
    let ns = d.n.clone().unwrap_or_else(|| vec![12, 12]);
    let lengths = d.lengths.clone().unwrap_or_else(|| vec![1.0; ns.len()]);
    if lengths.len() != ns.len() {
        return Err(Error::Config("derham: n and lengths differ in length".into()));
    }
    let boundary = d.boundary.unwrap_or(Boundary::Periodic);
    let fiber = d.fiber.unwrap_or(1);
    let axes = ns
        .iter()
        .zip(&lengths)
        .map(|(&n, &t)| match boundary {
            Boundary::Periodic => Grid1D::periodic(0.0, t, n),
            Boundary::Dirichlet => Grid1D::dirichlet(0.0, t, n),
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Config(format!("derham grid: {e}")))?;
    let grid = ProductGrid::new(axes, fiber).map_err(|e| Error::Config(format!("derham grid: {e}")))?;
    let r = grid.dim();
    let conn = connection_matrices(d, r, fiber)?;
    let mode = d.mode.unwrap_or(DiffMode::Forward);
    let cx = run.stage("assembly", || match &conn {
        Some(a) => GenComplex::with_connection(&grid, a.clone(), mode),
        None => GenComplex::with_connection(&grid, vec![CMat::zeros(fiber, fiber); r], mode),
    })?;
    run.rows.push(tol.max("derham.d_squared", verify::d_squared(&cx)?, 1e-12));

    let joint = derham::joint_kernel_dim(cx.connection().unwrap_or(&[]), 1e-10);
    let expect = |k: usize| (boundary == Boundary::Periodic).then(|| joint * verify::binomial(r, k));
    let mut min_gap = f64::INFINITY;
    let mut harmonic = Vec::new();
    for k in 0..=r {
        let rep = run.stage(&format!("harmonic {k}"), || derham::harmonic_space(&cx, k, 1e-8))?;
        min_gap = min_gap.min(rep.gap);
        let mut summary = rep.summary_json();
        summary["betti_expected"] = json!(expect(k));
        run.write_json(&format!("harmonic_{k}.json"), &summary)?;
        if let Some(e) = expect(k) {
            run.rows.push(tol.equal(&format!("derham.harmonic_dim_{k}"), rep.dim as f64, e as f64));
        }
        if d.oracle.unwrap_or(true) {
            let o = run.stage(&format!("oracle {k}"), || derham::harmonic_dim_oracle(&cx, k, 1e-8))?;
            run.rows.push(tol.equal(&format!("derham.oracle_dim_{k}"), o as f64, rep.dim as f64));
        }
        harmonic.push(rep);
    }
    run.rows.push(tol.min("derham.harmonic_gap", min_gap, derham::GAP_MIN));

    let samples = d.hodge_samples.unwrap_or(5);
    if samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
        let (mut orth, mut recon) = (0.0f64, 0.0f64);
        run.stage("hodge", || -> Result<()> {
            for k in 0..=r {
                for _ in 0..samples {
                    let len = crate::lagrange::subsets(r, k).len() * grid.unknowns();
                    let v: Vec<C64> = (0..len)
                        .map(|_| C64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0)))
                        .collect();
                    let parts = derham::hodge_decompose(&cx, &FormField::from_vector(&grid, k, &v)?)?;
                    orth = orth.max(parts.orthogonality);
                    recon = recon.max(parts.reconstruction);
                }
            }
            Ok(())
        })?;
        run.rows.push(tol.max("derham.hodge_orthogonality", orth, 1e-10).with_detail(format!("{samples} random forms per degree")));
        run.rows.push(tol.max("derham.hodge_reconstruction", recon, 1e-10));
    }

    if boundary == Boundary::Periodic && r >= 2 {
        let dual = derham::dual_kernel(&cx, 1e-8);
        let h1 = &harmonic[1];
        if dual.ncols() > 0 && h1.dim > 0 {
            let phi: Vec<C64> = dual.column(0).iter().cloned().collect();
            let loops: Vec<SurfaceRegion> = (0..r).map(|a| SurfaceRegion::loop_around(&grid, a, &vec![0; r])).collect();
            let periods = derham::skrypnik_map(&cx, &phi, &h1.basis, &loops)?;
            run.write("periods.csv", &io::matrix_csv(&periods)?)?;
            if r == 2 {
                let spread = verify::homologous_spread(&cx, &phi, &h1.basis)?;
                run.rows.push(tol.max("derham.homologous_invariance", spread, 1e-10));
            }
        }
        if conn.is_none() && fiber == 1 {
            let ones = vec![C64::new(1.0, 0.0); grid.unknowns()];
            let dts = (0..r)
                .map(|a| {
                    let mut f = FormField::zeros(&grid, 1)?;
                    f.component_mut(&[a]).expect("1-form component").iter_mut().for_each(|z| *z = C64::new(1.0, 0.0));
                    Ok(f)
                })
                .collect::<Result<Vec<_>>>()?;
            let loops: Vec<SurfaceRegion> = (0..r).map(|a| SurfaceRegion::loop_around(&grid, a, &vec![0; r])).collect();
            let periods = derham::skrypnik_map(&cx, &ones, &dts, &loops)?;
            let diag = CMat::from_fn(r, r, |i, j| if i == j { C64::new(lengths[i], 0.0) } else { C64::new(0.0, 0.0) });
            let err = (&periods - diag).iter().map(|z| z.norm()).fold(0.0, f64::max);
            run.write("periods_dt.csv", &io::matrix_csv(&periods)?)?;
            run.rows.push(tol.max("derham.period_matrix", err, 1e-10).with_detail(format!("diag{lengths:?}")));
        }
    }
    run.diag("joint_kernel_dim", joint);
    run.finish(Command::Derham, config)
}

/// The acceptance suite (criteria 1-9, or the configured subset).
pub fn cmd_verify(cfg: &RunConfig, config: &Value, opts: &RunOptions) -> Result<RunReport> {
    let mut run = Run::new(cfg, opts);
    let ids = cfg.verify.criteria.clone().unwrap_or_else(|| (1..=9).collect());
    let mut timings = Vec::new();
    let crits = verify::run_selected(&ids, run.seed, &cfg.tolerances, &mut |c, s| {
        timings.push(StageTime { stage: format!("criterion {}", c.id), seconds: s })
    })?;
    run.timings.extend(timings);
    let mut summary = Vec::new();
    for c in &crits {
        summary.push(json!({ "id": c.id, "title": c.title, "pass": c.pass() }));
        run.rows.extend(c.rows.iter().cloned());
        if let Some(p) = &c.plot {
            let series: Vec<Series> = p.series.iter().map(|(n, x, y)| Series { name: n, x, y }).collect();
            run.plot(&format!("criterion_{}.svg", c.id), &p.title, &series)?;
        }
    }
    run.diag("criteria", summary);
    run.finish(Command::Verify, config)
}

pub fn run_command(command: Command, cfg: &RunConfig, config: &Value, opts: &RunOptions) -> Result<RunReport> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::Config(format!("config is for `{}`, not `{}`", c.name(), command.name())));
        }
    }
    match command {
        Command::Darboux => cmd_darboux(cfg, config, opts),
        Command::Transmute => cmd_transmute(cfg, config, opts),
        Command::Factorize => cmd_factorize(cfg, config, opts),
        Command::Derham => cmd_derham(cfg, config, opts),
        Command::Verify => cmd_verify(cfg, config, opts),
    }
}

/// Loads the config, runs the command, prints the residual table and the
/// hash line, and returns the exit code.
pub fn main_with(command: Command, config_path: &Path, opts: &RunOptions) -> i32 {
    let result = RunConfig::load(config_path).and_then(|(cfg, value)| run_command(command, &cfg, &value, opts));
    match result {
        Ok(report) => {
            for r in &report.residuals {
                println!(
                    "{} {} value={:e} threshold={:e} ({:?})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.value,
                    r.threshold,
                    r.comparator
                );
            }
            for r in report.failing() {
                eprintln!("failing row: {}", r.name);
            }
            println!("{}", report.hash_line());
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}
