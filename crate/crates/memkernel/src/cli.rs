//! Configuration-driven command-line front end.
//!
//! `memkernel <command> --config <path> [--out <dir>] [--seed <n>]` builds
//! the configured surface and model, runs the requested suite, prints a
//! pass/fail line per check, and (with `--out`) writes `report.json` plus
//! CSV tables. Exit codes: `0` all checks pass, `1` a numerical bound
//! failed or the run aborted, `2` configuration error.
//!
//! Commands:
//! - `check-identities`: exact-identity residuals over refinement levels,
//!   with a `grid,residual,observed_order` convergence table;
//! - `shape-residual`: Euler–Lagrange residual statistics, normal/tangential
//!   split, and the generic-vs-closed-form route gap;
//! - `stress`: stress and torque fields, assembly consistency, global
//!   force/torque balance on closed surfaces;
//! - `variation`: first and second variation against the finite-difference
//!   oracle along the configured variation;
//! - `catalog`: list the registered surfaces, energy terms, and variation
//!   families.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::catalog::{
    make_surface, make_variation, quadrature_sphere, ScalarProfile, SurfaceDef, VariationDef,
};
use crate::energy::{total_energy, EnergyTerm};
use crate::geometry::{
    build_from_samples, check_identities, compute_geometry, GeometryField, SurfaceField,
};
use crate::jet::dot3;
use crate::mechanics::{
    euler_lagrange, global_balance, heterogeneous_description, noether_current_identity,
    shape_residual_closed_form, stress_field, MechanicsError,
};
use crate::oracle::{fd_first_variation, fd_second_variation, first_variation_pre_ibp, OracleConfig};
use crate::second_variation::{
    second_variation, second_variation_expanded, soap_normal_second_variation_quadrature,
    SecondVariationError,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration: reported with the offending key where possible.
    #[error("{0}")]
    Config(String),
    /// The run itself failed (degenerate geometry, refused model, I/O).
    #[error("{0}")]
    Run(String),
}

// ---------------------------------------------------------------------------
// Arguments and configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "memkernel",
    version,
    about = "Covariant variational calculus for fluid membranes on parametric grids"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact geometric identities and their refinement behaviour.
    CheckIdentities(CommonArgs),
    /// Shape-equation residual statistics and route cross-checks.
    ShapeResidual(CommonArgs),
    /// Stress/torque fields, assembly gaps, and global balance.
    Stress(CommonArgs),
    /// First/second variation against the finite-difference oracle.
    Variation(CommonArgs),
    /// List registered surfaces, energy terms, and variation families.
    Catalog(CatalogArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json and CSV tables (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CatalogArgs {
    /// Directory for report.json (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDims {
    pub n1: usize,
    pub n2: usize,
}

/// Whether surface jets come from the catalog's analytic formulas or from
/// fourth-order differencing of sampled positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JetMode {
    #[default]
    Analytic,
    Sampled,
}

/// One run = one JSON document. Unknown keys are rejected so typos surface
/// as config errors instead of silently ignored options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceDef,
    pub grid: GridDims,
    #[serde(default)]
    pub model: Vec<EnergyTerm>,
    #[serde(default)]
    pub variation: Option<VariationDef>,
    /// Refinement levels (square grids) for convergence studies; empty
    /// means the single configured grid.
    #[serde(default)]
    pub levels: Vec<usize>,
    #[serde(default)]
    pub jets: JetMode,
    #[serde(default)]
    pub seed: u64,
    /// Also write per-node field tables as CSV.
    #[serde(default)]
    pub dump_fields: bool,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    /// Per-check bound overrides by check name.
    #[serde(default)]
    pub bounds: BTreeMap<String, f64>,
    /// Declare the configured surface stationary for the model, adding a
    /// bound on the residual itself (not just on cross-route gaps).
    #[serde(default)]
    pub expect_stationary: bool,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    cfg.surface.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(o) = &cfg.oracle {
        o.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if cfg.grid.n1 < 4 || cfg.grid.n2 < 4 {
        return Err(CliError::Config(format!(
            "at `grid`: need at least 4 nodes per axis, got {}×{}",
            cfg.grid.n1, cfg.grid.n2
        )));
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Report plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Pass if `value <= bound`.
    Upper,
    /// Pass if `value >= bound`.
    Lower,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub kind: BoundKind,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub grid: usize,
    pub residual: f64,
    /// `log2(res(h)/res(h/2))` from the previous level; absent on the first
    /// level or when either residual sits at roundoff.
    pub observed_order: Option<f64>,
    /// Both residuals of the pair were below the roundoff floor, so the
    /// order is not a discretization statement.
    pub exact: bool,
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub timestamp: String,
    pub seed: u64,
    pub config: Value,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub convergence: Vec<ConvergenceRow>,
    pub pass: bool,
}

/// Residuals below this are indistinguishable from roundoff; observed
/// orders are only quoted when both members of a pair exceed it.
pub const ORDER_NOISE_FLOOR: f64 = 100.0 * f64::EPSILON;

/// Turn per-level residuals into a convergence table.
pub fn convergence_table(levels: &[(usize, f64)]) -> Vec<ConvergenceRow> {
    let mut rows = Vec::with_capacity(levels.len());
    for (idx, &(grid, residual)) in levels.iter().enumerate() {
        let (mut observed_order, mut exact) = (None, false);
        if idx > 0 {
            let prev = levels[idx - 1].1;
            if prev > ORDER_NOISE_FLOOR && residual > ORDER_NOISE_FLOOR {
                observed_order = Some((prev / residual).log2());
            } else {
                exact = true;
            }
        }
        rows.push(ConvergenceRow { grid, residual, observed_order, exact });
    }
    rows
}

/// Check accumulator with config-supplied bound overrides.
struct Checks {
    list: Vec<Check>,
    overrides: BTreeMap<String, f64>,
}

impl Checks {
    fn new(overrides: &BTreeMap<String, f64>) -> Self {
        Self { list: Vec::new(), overrides: overrides.clone() }
    }
    fn push(&mut self, name: &str, value: f64, default_bound: f64, kind: BoundKind) {
        let bound = *self.overrides.get(name).unwrap_or(&default_bound);
        let pass = match kind {
            BoundKind::Upper => value <= bound,
            BoundKind::Lower => value >= bound,
        };
        self.list.push(Check { name: name.to_string(), value, bound, kind, pass });
    }
    fn upper(&mut self, name: &str, value: f64, default_bound: f64) {
        self.push(name, value, default_bound, BoundKind::Upper);
    }
    fn lower(&mut self, name: &str, value: f64, default_bound: f64) {
        self.push(name, value, default_bound, BoundKind::Lower);
    }
}

fn metadata(command: &str, seed: u64, config: Value) -> Metadata {
    Metadata {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        seed,
        config,
    }
}

fn finish(metadata: Metadata, results: BTreeMap<String, Value>, checks: Checks,
          convergence: Vec<ConvergenceRow>) -> Report {
    let pass = checks.list.iter().all(|c| c.pass);
    Report { metadata, results, checks: checks.list, convergence, pass }
}

// ---------------------------------------------------------------------------
// Shared build steps
// ---------------------------------------------------------------------------

fn build_surface(cfg: &RunConfig) -> Result<SurfaceField, CliError> {
    if matches!(cfg.surface, SurfaceDef::SphereQuadrature { .. }) {
        return Err(CliError::Config(
            "at `surface.kind`: the quadrature sphere is grid-free; it is only \
             supported by the `variation` command (uniform-normal tension mode) — \
             use kind \"sphere\" for gridded runs"
                .into(),
        ));
    }
    let grid = cfg
        .surface
        .default_grid(cfg.grid.n1, cfg.grid.n2)
        .map_err(|e| CliError::Config(format!("at `grid`: {e}")))?;
    let sf = make_surface(&cfg.surface, grid)
        .map_err(|e| CliError::Config(format!("at `surface`: {e}")))?;
    match cfg.jets {
        JetMode::Analytic => Ok(sf),
        JetMode::Sampled => build_from_samples(sf.grid, sf.x.clone())
            .map_err(|e| CliError::Config(format!("at `jets`: {e}"))),
    }
}

fn geometry_of(sf: &SurfaceField) -> Result<GeometryField, CliError> {
    compute_geometry(sf).map_err(|e| CliError::Run(e.to_string()))
}

fn require_model(cfg: &RunConfig) -> Result<&[EnergyTerm], CliError> {
    if cfg.model.is_empty() {
        return Err(CliError::Config(
            "at `model`: this command needs at least one energy term".into(),
        ));
    }
    Ok(&cfg.model)
}

fn max_norm3(field: &crate::grid::Field<[f64; 3]>) -> f64 {
    field
        .data
        .iter()
        .map(|v| dot3(v, v).sqrt())
        .fold(0.0, f64::max)
}

/// Relative gap guarded against comparisons of two near-zero numbers: the
/// denominator never drops below a small fraction of the problem scale, so
/// symmetry-protected zeros compare at finite-difference noise instead of
/// 0/0.
fn guarded_rel_gap(a: f64, b: f64, problem_scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3 * (1.0 + problem_scale.abs()))
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_check_identities(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let mut results = BTreeMap::new();
    let mut checks = Checks::new(&cfg.bounds);

    // One grid per refinement level (square grids), or the configured grid.
    let mut levels: Vec<(usize, GridDims)> = if cfg.levels.is_empty() {
        vec![(cfg.grid.n1.max(cfg.grid.n2), cfg.grid)]
    } else {
        cfg.levels
            .iter()
            .map(|&n| (n, GridDims { n1: n, n2: n }))
            .collect()
    };
    levels.sort_by_key(|&(n, _)| n);

    let mut residuals: Vec<(usize, f64)> = Vec::new();
    let mut finest: Option<crate::geometry::IdentityReport> = None;
    for &(label, dims) in &levels {
        let level_cfg = RunConfig { grid: dims, ..cfg.clone() };
        let sf = build_surface(&level_cfg)?;
        let geo = geometry_of(&sf)?;
        let rep = check_identities(&sf, &geo, seed).map_err(|e| CliError::Run(e.to_string()))?;
        residuals.push((label, rep.gauss.max(rep.codazzi)));
        finest = Some(rep);
    }
    let finest = finest.expect("at least one level");
    results.insert("gauss_residual_max".into(), json!(finest.gauss));
    results.insert("codazzi_residual_max".into(), json!(finest.codazzi));
    results.insert("completeness_residual_max".into(), json!(finest.completeness));
    results.insert("gamma_route_gap_max".into(), json!(finest.gamma_consistency));
    results.insert("jets".into(), json!(cfg.jets));

    let convergence = convergence_table(&residuals);
    checks.upper("gamma_route_gap", finest.gamma_consistency, 1e-10);
    match cfg.jets {
        JetMode::Analytic => {
            let worst = residuals.iter().map(|&(_, r)| r).fold(0.0, f64::max);
            checks.upper("identity_residual_analytic", worst, 1e-10);
            checks.upper("completeness_residual", finest.completeness, 1e-10);
        }
        JetMode::Sampled => {
            let orders: Vec<f64> =
                convergence.iter().filter_map(|r| r.observed_order).collect();
            if orders.is_empty() {
                // Every pair sat at roundoff: the sampled jets are exact for
                // this surface, so bound the residual directly.
                let worst = residuals.iter().map(|&(_, r)| r).fold(0.0, f64::max);
                checks.upper("identity_residual_sampled", worst, 1e-10);
            } else {
                let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
                checks.lower("sampled_convergence_order", min_order, 3.5);
            }
        }
    }

    Ok(finish(
        metadata("check-identities", seed, json!(cfg)),
        results,
        checks,
        convergence,
    ))
}

fn cmd_shape_residual(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let model = require_model(cfg)?;
    let sf = build_surface(cfg)?;
    let geo = geometry_of(&sf)?;
    let mut results = BTreeMap::new();
    let mut checks = Checks::new(&cfg.bounds);

    let el = euler_lagrange(model, &sf).map_err(|e| CliError::Run(e.to_string()))?;

    let grid = sf.grid;
    let (mut el_max, mut normal_max, mut tangential_max) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let pg = geo.at(i, j);
            let pj = sf.point_jets_f64(i, j);
            let e = el.at(i, j);
            el_max = el_max.max(dot3(&e, &e).sqrt());
            normal_max = normal_max.max(dot3(&e, &pg.n).abs());
            for a in 0..2 {
                tangential_max = tangential_max.max(dot3(&e, &pj.dx[a]).abs());
            }
        }
    }
    results.insert("residual_max".into(), json!(el_max));
    results.insert("residual_normal_max".into(), json!(normal_max));
    results.insert("residual_tangential_max".into(), json!(tangential_max));

    match shape_residual_closed_form(model, &sf) {
        Ok(cf) => {
            let mut gap = 0.0f64;
            for (a, b) in el.data.iter().zip(cf.data.iter()) {
                for mu in 0..3 {
                    gap = gap.max((a[mu] - b[mu]).abs());
                }
            }
            results.insert("closed_form_route_gap".into(), json!(gap));
            checks.upper("shape_residual_route_gap", gap, 1e-8);
        }
        Err(MechanicsError::UnsupportedTerm(what)) => {
            results.insert(
                "closed_form_route_gap".into(),
                json!(format!("skipped: no closed form for {what}")),
            );
        }
        Err(e) => return Err(CliError::Run(e.to_string())),
    }

    match heterogeneous_description(model) {
        None => checks.upper("tangential_residual", tangential_max, 1e-8),
        Some(desc) => {
            results.insert(
                "tangential_residual_note".into(),
                json!(format!("tangential flow expected: model has {desc}")),
            );
        }
    }
    if cfg.expect_stationary {
        checks.upper("stationary_residual", el_max, 1e-8);
    }

    let mut report = finish(metadata("shape-residual", seed, json!(cfg)), results, checks, vec![]);
    if cfg.dump_fields {
        report.results.insert("fields_csv".into(), json!("fields.csv"));
        FIELD_DUMP.with(|cell| {
            let mut rows = Vec::with_capacity(grid.len());
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    let (u, v) = grid.coord(i, j);
                    let e = el.at(i, j);
                    let pg = geo.at(i, j);
                    rows.push(vec![
                        i as f64,
                        j as f64,
                        u,
                        v,
                        e[0],
                        e[1],
                        e[2],
                        dot3(&e, &e).sqrt(),
                        dot3(&e, &pg.n),
                    ]);
                }
            }
            *cell.borrow_mut() = Some((
                vec!["i", "j", "u", "v", "el_x", "el_y", "el_z", "el_norm", "el_normal"],
                rows,
            ));
        });
    }
    Ok(report)
}

fn cmd_stress(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let model = require_model(cfg)?;
    let sf = build_surface(cfg)?;
    let mut results = BTreeMap::new();
    let mut checks = Checks::new(&cfg.bounds);

    let stress = stress_field(model, &sf).map_err(|e| CliError::Run(e.to_string()))?;
    let grid = sf.grid;

    let mut f_max = 0.0f64;
    let mut m_max = 0.0f64;
    for k in 0..grid.len() {
        for a in 0..2 {
            let fa = stress.f_a.data[k][a];
            let ma = stress.m_a.data[k][a];
            f_max = f_max.max(dot3(&fa, &fa).sqrt());
            m_max = m_max.max(dot3(&ma, &ma).sqrt());
        }
    }
    let ida_max = max_norm3(&stress.ida_residual);
    results.insert("stress_max".into(), json!(f_max));
    results.insert("torque_stress_max".into(), json!(m_max));
    results.insert("residual_max".into(), json!(max_norm3(&stress.el)));
    results.insert("assembly_gap".into(), json!(stress.der1f_gap));
    results.insert("angular_identity_residual_max".into(), json!(ida_max));

    checks.upper("force_assembly_gap", stress.der1f_gap, 1e-8);
    let has_external_field =
        model.iter().any(|t| matches!(t, EnergyTerm::Magnetic { .. }));
    if has_external_field {
        results.insert(
            "angular_identity_note".into(),
            json!("external field exerts torque density; angular identity not bounded"),
        );
    } else {
        checks.upper("angular_identity_residual", ida_max, 1e-8);
    }

    if grid.closed() {
        let (force, torque) =
            global_balance(model, &sf).map_err(|e| CliError::Run(e.to_string()))?;
        let fmag = dot3(&force, &force).sqrt();
        let tmag = dot3(&torque, &torque).sqrt();
        results.insert("net_force".into(), json!(force));
        results.insert("net_torque".into(), json!(torque));
        checks.upper("net_force", fmag, 1e-9);
        checks.upper("net_torque", tmag, 1e-9);
    } else {
        results.insert(
            "global_balance_note".into(),
            json!("surface has a boundary; global balance needs the boundary flux"),
        );
    }

    if cfg.dump_fields {
        FIELD_DUMP.with(|cell| {
            let mut rows = Vec::with_capacity(grid.len());
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    let (u, v) = grid.coord(i, j);
                    let k = grid.idx(i, j);
                    let f = &stress.f_a.data[k];
                    let m = &stress.m_a.data[k];
                    let e = &stress.el.data[k];
                    rows.push(vec![
                        i as f64, j as f64, u, v,
                        f[0][0], f[0][1], f[0][2], f[1][0], f[1][1], f[1][2],
                        m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2],
                        e[0], e[1], e[2],
                    ]);
                }
            }
            *cell.borrow_mut() = Some((
                vec![
                    "i", "j", "u", "v", "f1_x", "f1_y", "f1_z", "f2_x", "f2_y", "f2_z",
                    "m1_x", "m1_y", "m1_z", "m2_x", "m2_y", "m2_z", "el_x", "el_y", "el_z",
                ],
                rows,
            ));
        });
    }

    Ok(finish(metadata("stress", seed, json!(cfg)), results, checks, vec![]))
}

fn cmd_variation(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    if let SurfaceDef::SphereQuadrature { radius } = cfg.surface {
        return quadrature_variation(cfg, seed, radius);
    }
    let model = require_model(cfg)?;
    let sf = build_surface(cfg)?;
    let geo = geometry_of(&sf)?;
    let mut results = BTreeMap::new();
    let mut checks = Checks::new(&cfg.bounds);

    let vdef = cfg
        .variation
        .clone()
        .ok_or_else(|| CliError::Config("at `variation`: this command needs one".into()))?;
    let w = make_variation(&vdef, &sf, &geo)
        .map_err(|e| CliError::Config(format!("at `variation`: {e}")))?;
    let ocfg = cfg.oracle.clone().unwrap_or_default();

    let energy = total_energy(model, &sf).map_err(|e| CliError::Run(e.to_string()))?;
    results.insert("total_energy".into(), json!(energy));

    let d1 = first_variation_pre_ibp(model, &sf, &w).map_err(|e| CliError::Run(e.to_string()))?;
    let d1_fd =
        fd_first_variation(model, &sf, &w, &ocfg).map_err(|e| CliError::Run(e.to_string()))?;
    results.insert("first_variation".into(), json!(d1));
    results.insert("first_variation_oracle".into(), json!(d1_fd.value));
    results.insert("first_variation_oracle_error_estimate".into(), json!(d1_fd.error_estimate));
    checks.upper(
        "first_variation_oracle_gap",
        guarded_rel_gap(d1, d1_fd.value, energy),
        1e-6,
    );

    let split = noether_current_identity(model, &sf, &w)
        .map_err(|e| CliError::Run(e.to_string()))?;
    results.insert("variation_split_residual_max".into(), json!(split));
    checks.upper("variation_split_residual", split, 1e-8);

    match second_variation(model, &sf, &w) {
        Ok(d2) => {
            let d2_alt = second_variation_expanded(model, &sf, &w)
                .map_err(|e| CliError::Run(e.to_string()))?;
            let d2_fd = fd_second_variation(model, &sf, &w, &ocfg)
                .map_err(|e| CliError::Run(e.to_string()))?;
            results.insert("second_variation".into(), json!(d2));
            results.insert("second_variation_expanded".into(), json!(d2_alt));
            results.insert("second_variation_oracle".into(), json!(d2_fd.value));
            results.insert(
                "second_variation_oracle_error_estimate".into(),
                json!(d2_fd.error_estimate),
            );
            checks.upper(
                "second_variation_route_gap",
                guarded_rel_gap(d2, d2_alt, energy),
                1e-10,
            );
            checks.upper(
                "second_variation_oracle_gap",
                guarded_rel_gap(d2, d2_fd.value, energy),
                1e-5,
            );
        }
        Err(SecondVariationError::UnsupportedTerm(what)) => {
            results.insert(
                "second_variation".into(),
                json!(format!("skipped: no second variation for {what}")),
            );
        }
        Err(e) => return Err(CliError::Run(e.to_string())),
    }

    if cfg.dump_fields {
        let grid = sf.grid;
        FIELD_DUMP.with(|cell| {
            let mut rows = Vec::with_capacity(grid.len());
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    let (u, v) = grid.coord(i, j);
                    let wv = w.w.at(i, j);
                    rows.push(vec![i as f64, j as f64, u, v, wv[0], wv[1], wv[2]]);
                }
            }
            *cell.borrow_mut() =
                Some((vec!["i", "j", "u", "v", "w_x", "w_y", "w_z"], rows));
        });
    }

    Ok(finish(metadata("variation", seed, json!(cfg)), results, checks, vec![]))
}

/// The grid-free closed sphere supports exactly one variation study: a
/// uniform normal displacement of a constant-tension sphere, where the area
/// derivatives are classical closed forms.
fn quadrature_variation(cfg: &RunConfig, seed: u64, radius: f64) -> Result<Report, CliError> {
    let unsupported = || {
        CliError::Config(
            "at `surface.kind`: with the quadrature sphere the variation command \
             supports exactly one configuration — model = [single constant-σ tension \
             term], variation = normal with a constant profile"
                .into(),
        )
    };
    let sigma = match cfg.model.as_slice() {
        [EnergyTerm::Soap { sigma }] => sigma.as_constant().ok_or_else(unsupported)?,
        _ => return Err(unsupported()),
    };
    let phi = match &cfg.variation {
        Some(VariationDef::Normal { profile: ScalarProfile::Constant(c) }) => *c,
        _ => return Err(unsupported()),
    };
    let q = quadrature_sphere(radius, cfg.grid.n1.max(cfg.grid.n2).max(16))
        .map_err(|e| CliError::Config(format!("at `surface`: {e}")))?;

    let area = q.area();
    let energy = sigma * area;
    // F(t) = σ·4π(R + tφ)².
    let d1_exact = 2.0 * sigma * area * phi / radius;
    let d2_exact = 2.0 * sigma * area * phi * phi / (radius * radius);
    let d2_quad = soap_normal_second_variation_quadrature(sigma, &q, phi);

    let mut results = BTreeMap::new();
    results.insert("total_energy".into(), json!(energy));
    results.insert("area".into(), json!(area));
    results.insert("enclosed_volume".into(), json!(q.volume()));
    results.insert("first_variation".into(), json!(d1_exact));
    results.insert("second_variation".into(), json!(d2_exact));
    results.insert("second_variation_quadrature".into(), json!(d2_quad));

    let mut checks = Checks::new(&cfg.bounds);
    checks.upper(
        "second_variation_quadrature_gap",
        (d2_quad - d2_exact).abs(),
        1e-8,
    );
    checks.upper(
        "area_quadrature_gap",
        (area - 4.0 * std::f64::consts::PI * radius * radius).abs(),
        1e-8,
    );
    Ok(finish(metadata("variation", seed, json!(cfg)), results, checks, vec![]))
}

fn cmd_catalog() -> Report {
    let surfaces = json!([
        {"kind": "sphere", "params": ["radius"]},
        {"kind": "sphere_quadrature", "params": ["radius"]},
        {"kind": "cylinder", "params": ["radius", "length"]},
        {"kind": "torus", "params": ["minor", "major"]},
        {"kind": "monge_patch", "params": ["amplitude", "k1", "k2"]},
        {"kind": "perturbed_torus",
         "params": ["minor", "major", "amplitude", "mode_theta", "mode_phi"]},
    ]);
    let terms = json!([
        {"kind": "soap", "params": ["sigma"], "density": "σ √g"},
        {"kind": "bending", "params": ["kappa"], "density": "κ √g K²"},
        {"kind": "mean", "params": ["beta"], "density": "β √g K"},
        {"kind": "gaussian", "params": ["kappa_bar"], "density": "κ̄ √g ℛ"},
        {"kind": "volume", "params": ["pressure"], "density": "−(P/3) √g n·X"},
        {"kind": "phase_field", "params": ["lambda", "beta_phi", "potential", "phi"],
         "density": "√g [λ/2 (∇φ)² + V(φ) + β_φ φ K]"},
        {"kind": "magnetic", "params": ["alpha", "field"], "density": "−α √g (n·B)²"},
    ]);
    let variations = json!([
        {"kind": "translation", "params": ["direction"]},
        {"kind": "rotation", "params": ["axis"]},
        {"kind": "normal", "params": ["profile"]},
        {"kind": "random_smooth", "params": ["seed", "amplitude", "max_mode"]},
    ]);
    let mut results = BTreeMap::new();
    results.insert("surfaces".to_string(), surfaces);
    results.insert("terms".to_string(), terms);
    results.insert("variations".to_string(), variations);
    // Scalar moduli accept either a plain number or a Fourier profile map.
    results.insert(
        "profile_syntax".to_string(),
        json!({"constant": 1.0,
               "fourier": {"base": 1.0, "amplitude": 0.1, "mode1": 1, "mode2": 0,
                            "phase1": 0.0, "phase2": 0.0}}),
    );
    Report {
        metadata: metadata("catalog", 0, Value::Null),
        results,
        checks: vec![],
        convergence: vec![],
        pass: true,
    }
}

// ---------------------------------------------------------------------------
// Output writing and the entry point
// ---------------------------------------------------------------------------

// Per-command field dumps, handed from the command body to the writer.
thread_local! {
    static FIELD_DUMP: std::cell::RefCell<Option<(Vec<&'static str>, Vec<Vec<f64>>)>> =
        const { std::cell::RefCell::new(None) };
}

fn write_outputs(out: &Path, report: &Report) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Run(format!("cannot write outputs: {e}"));
    fs::create_dir_all(out).map_err(io)?;
    let pretty = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Run(format!("cannot serialize report: {e}")))?;
    fs::write(out.join("report.json"), pretty + "\n").map_err(io)?;

    if !report.convergence.is_empty() {
        let mut w = csv::Writer::from_path(out.join("convergence.csv"))
            .map_err(|e| CliError::Run(e.to_string()))?;
        w.write_record(["grid", "residual", "observed_order"])
            .map_err(|e| CliError::Run(e.to_string()))?;
        for row in &report.convergence {
            let order = if row.exact {
                "exact".to_string()
            } else {
                row.observed_order.map(|o| format!("{o:.4}")).unwrap_or_default()
            };
            w.write_record([row.grid.to_string(), format!("{:e}", row.residual), order])
                .map_err(|e| CliError::Run(e.to_string()))?;
        }
        w.flush().map_err(io)?;
    }

    let dump = FIELD_DUMP.with(|cell| cell.borrow_mut().take());
    if let Some((headers, rows)) = dump {
        let mut w = csv::Writer::from_path(out.join("fields.csv"))
            .map_err(|e| CliError::Run(e.to_string()))?;
        w.write_record(&headers).map_err(|e| CliError::Run(e.to_string()))?;
        for row in rows {
            w.write_record(row.iter().map(|x| format!("{x}")))
                .map_err(|e| CliError::Run(e.to_string()))?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

fn print_summary(report: &Report) {
    for c in &report.checks {
        let rel = match c.kind {
            BoundKind::Upper => "<=",
            BoundKind::Lower => ">=",
        };
        println!(
            "  [{}] {} = {:.6e} (required {} {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            rel,
            c.bound
        );
    }
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
}

/// Parse the process arguments, run the command, write outputs, and return
/// the process exit code.
pub fn run() -> i32 {
    run_parsed(Cli::parse())
}

fn run_parsed(cli: Cli) -> i32 {
    let (name, args): (&str, CommonArgs) = match cli.command {
        Command::CheckIdentities(a) => ("check-identities", a),
        Command::ShapeResidual(a) => ("shape-residual", a),
        Command::Stress(a) => ("stress", a),
        Command::Variation(a) => ("variation", a),
        Command::Catalog(a) => {
            let report = cmd_catalog();
            println!(
                "{}",
                serde_json::to_string_pretty(&report.results).expect("static catalog")
            );
            if let Some(out) = a.out {
                if let Err(e) = write_outputs(&out, &report) {
                    eprintln!("error: {e}");
                    return EXIT_NUMERICAL;
                }
            }
            return EXIT_PASS;
        }
    };

    let outcome = (|| -> Result<Report, CliError> {
        let mut cfg = load_config(&args.config)?;
        if let Some(s) = args.seed {
            cfg.seed = s;
            if let Some(VariationDef::RandomSmooth { seed, .. }) = &mut cfg.variation {
                *seed = s;
            }
        }
        let seed = cfg.seed;
        match name {
            "check-identities" => cmd_check_identities(&cfg, seed),
            "shape-residual" => cmd_shape_residual(&cfg, seed),
            "stress" => cmd_stress(&cfg, seed),
            "variation" => cmd_variation(&cfg, seed),
            _ => unreachable!(),
        }
    })();

    match outcome {
        Ok(report) => {
            print_summary(&report);
            if let Some(out) = &args.out {
                if let Err(e) = write_outputs(out, &report) {
                    eprintln!("error: {e}");
                    return EXIT_NUMERICAL;
                }
                println!("wrote {}", out.join("report.json").display());
            }
            if report.pass {
                EXIT_PASS
            } else {
                EXIT_NUMERICAL
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Run(msg)) => {
            eprintln!("run failed: {msg}");
            EXIT_NUMERICAL
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<RunConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, json).unwrap();
        load_config(&path)
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = parse(
            r#"{
                "surface": {"kind": "torus", "minor": 1.0, "major": 3.0},
                "grid": {"n1": 24, "n2": 24},
                "model": [
                    {"kind": "bending", "kappa": 1.0},
                    {"kind": "soap",
                     "sigma": {"base": 1.0, "amplitude": 0.1, "mode1": 1, "mode2": 0,
                                "phase1": 0.0, "phase2": 0.0}}
                ],
                "variation": {"kind": "random_smooth", "seed": 3, "amplitude": 0.5,
                               "max_mode": 3}
            }"#,
        )
        .unwrap();
        let echoed: RunConfig =
            serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(echoed.grid.n1, 24);
        assert!(matches!(echoed.surface, SurfaceDef::Torus { .. }));
        assert_eq!(echoed.model.len(), 2);
    }

    #[test]
    fn unknown_surface_tag_is_named_in_the_error() {
        let err = parse(
            r#"{"surface": {"kind": "banana", "radius": 1.0},
                "grid": {"n1": 16, "n2": 16}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("banana"), "error does not name the tag: {msg}");
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse(
            r#"{"surface": {"kind": "torus", "minor": 1.0, "major": 3.0},
                "grid": {"n1": 16, "n2": 16},
                "modle": []}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("modle"), "error does not name the key: {msg}");
    }

    #[test]
    fn convergence_orders_are_quoted_only_above_the_noise_floor() {
        let rows = convergence_table(&[
            (32, 1e-4),
            (64, 1e-4 / 16.0),
            (128, 1e-15),
            (256, 5e-16),
        ]);
        assert!(rows[0].observed_order.is_none() && !rows[0].exact);
        let o = rows[1].observed_order.unwrap();
        assert!((o - 4.0).abs() < 1e-12);
        assert!(rows[2].observed_order.is_none() && rows[2].exact);
        assert!(rows[3].observed_order.is_none() && rows[3].exact);
    }

    #[test]
    fn guarded_gap_tolerates_symmetry_zeros() {
        // Two FD-noise numbers compare as small, not as O(1) relative junk.
        let g = guarded_rel_gap(1e-13, -2e-13, 50.0);
        assert!(g < 1e-11, "{g}");
        // Genuine relative gaps are unaffected.
        let g = guarded_rel_gap(100.0, 101.0, 50.0);
        assert!((g - 1.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_variation_matches_area_derivatives() {
        let cfg = parse(
            r#"{
                "surface": {"kind": "sphere_quadrature", "radius": 1.0},
                "grid": {"n1": 48, "n2": 48},
                "model": [{"kind": "soap", "sigma": 2.0}],
                "variation": {"kind": "normal", "profile": 1.0}
            }"#,
        )
        .unwrap();
        let report = cmd_variation(&cfg, 0).unwrap();
        assert!(report.pass);
        let d1 = report.results["first_variation"].as_f64().unwrap();
        let d2 = report.results["second_variation"].as_f64().unwrap();
        let expect = 16.0 * std::f64::consts::PI; // 8πσ with σ = 2, R = 1, φ = 1
        assert!((d1 - expect).abs() < 1e-10);
        assert!((d2 - expect).abs() < 1e-10);
    }

    #[test]
    fn gridded_quadrature_request_is_a_config_error() {
        let cfg = parse(
            r#"{"surface": {"kind": "sphere_quadrature", "radius": 1.0},
                "grid": {"n1": 16, "n2": 16},
                "model": [{"kind": "soap", "sigma": 1.0}]}"#,
        )
        .unwrap();
        assert!(matches!(cmd_stress(&cfg, 0), Err(CliError::Config(_))));
    }
}
