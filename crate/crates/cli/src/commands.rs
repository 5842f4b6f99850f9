//! Subcommand drivers behind the `hjt` binary.
//!
//! Every runner resolves its inputs from flags with config-file fallback,
//! validates them before touching core entry points that assert, and
//! returns a process exit code: 0 success, 1 failed check, 2 bad usage,
//! 3 numerical failure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use hjt_core::grid::map_points;
use hjt_core::systems::{self, BuiltCandidate};
use hjt_core::{
    build_complete_solution, guard_from, integrate, poisson_bracket, transversality_check,
    verify, verify_h, AxisSpec, CandidateVectorField, DiffConfig, GridSpec, HjtError,
    LeafSolveConfig, ResidualReport, ScalarField, SectionKind, SystemDescriptor, VerifyMode,
};

use crate::candidate::{self, LoadedCandidate};
use crate::config::{self, FileSettings};
use crate::report;

/// A command failure carrying its process exit code.
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Failure {
            code: 3,
            msg: msg.into(),
        }
    }
}

impl From<HjtError> for Failure {
    fn from(e: HjtError) -> Self {
        Failure::numerical(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Shared flag parsing.
// ---------------------------------------------------------------------------

/// Flag lookup with config-file fallback for one subcommand section.
struct Ctx<'a> {
    cfg: &'a FileSettings,
    section: &'static str,
}

impl<'a> Ctx<'a> {
    fn get(&self, cli: Option<&String>, key: &str) -> Option<String> {
        config::resolve(cli, self.cfg, self.section, key)
    }

    fn req(&self, cli: Option<&String>, key: &str) -> Result<String, Failure> {
        self.get(cli, key)
            .ok_or_else(|| Failure::usage(format!("--{key} is required (flag or config file)")))
    }

    fn f64(&self, cli: Option<&String>, key: &str, default: f64) -> Result<f64, Failure> {
        match self.get(cli, key) {
            None => Ok(default),
            Some(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::usage(format!("--{key}: `{s}` is not a finite number"))),
        }
    }

    fn usize(&self, cli: Option<&String>, key: &str, default: usize) -> Result<usize, Failure> {
        match self.get(cli, key) {
            None => Ok(default),
            Some(s) => s
                .trim()
                .parse::<usize>()
                .map_err(|_| Failure::usage(format!("--{key}: `{s}` is not a non-negative integer"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

fn parse_format(s: &str) -> Result<Format, Failure> {
    match s {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        other => Err(Failure::usage(format!(
            "--format must be json or csv, got `{other}`"
        ))),
    }
}

fn parse_diff(s: &str) -> Result<DiffConfig, Failure> {
    match s {
        "dual" => Ok(DiffConfig::default()),
        "central" => Ok(DiffConfig::central()),
        other => Err(Failure::usage(format!(
            "--diff must be dual or central, got `{other}`"
        ))),
    }
}

fn parse_mode(s: &str) -> Result<VerifyMode, Failure> {
    match s {
        "generalized" => Ok(VerifyMode::Generalized),
        "standard" => Ok(VerifyMode::Standard),
        "singular-isotropy" => Ok(VerifyMode::SingularIsotropy),
        other => Err(Failure::usage(format!(
            "--mode must be generalized, standard or singular-isotropy, got `{other}`"
        ))),
    }
}

/// `name=value` pairs separated by commas.
fn parse_params(text: &str) -> Result<BTreeMap<String, f64>, Failure> {
    let mut map = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--params entry `{part}` is not name=value")))?;
        let val = v.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            Failure::usage(format!("--params `{}`: `{}` is not a finite number", k.trim(), v))
        })?;
        map.insert(k.trim().to_string(), val);
    }
    Ok(map)
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::usage(format!("{what}: `{p}` is not a finite number")))
        })
        .collect()
}

/// Grid syntax: comma-separated axes `name:min:max:count`.
fn parse_grid(text: &str) -> Result<(Vec<String>, GridSpec), Failure> {
    let mut names = Vec::new();
    let mut axes = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 4 {
            return Err(Failure::usage(format!(
                "--grid axis `{part}` must be name:min:max:count"
            )));
        }
        let min = fields[1].parse::<f64>().ok().filter(|v| v.is_finite());
        let max = fields[2].parse::<f64>().ok().filter(|v| v.is_finite());
        let count = fields[3].parse::<usize>().ok();
        match (min, max, count) {
            (Some(lo), Some(hi), Some(n)) if n >= 1 && lo <= hi => {
                names.push(fields[0].to_string());
                axes.push(AxisSpec::new(lo, hi, n));
            }
            _ => {
                return Err(Failure::usage(format!(
                    "--grid axis `{part}` needs min <= max and count >= 1"
                )))
            }
        }
    }
    if axes.is_empty() {
        return Err(Failure::usage("--grid is empty"));
    }
    Ok((names, GridSpec::new(axes)))
}

/// Worker count from HJT_NUM_THREADS, default 1.
pub fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var("HJT_NUM_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(_) => Err(Failure::usage("HJT_NUM_THREADS is not valid unicode")),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Failure::usage(format!("HJT_NUM_THREADS must be a positive integer, got `{s}`"))
            }),
    }
}

fn build_system(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemDescriptor, Failure> {
    systems::build(name, params).ok_or_else(|| {
        Failure::usage(format!(
            "unknown system `{name}`; run `hjt list-systems` for the registry"
        ))
    })
}

/// Reject --params keys that neither the system nor the candidate declares.
fn reject_unknown_params(
    d: &SystemDescriptor,
    candidate_keys: &BTreeSet<String>,
    params: &BTreeMap<String, f64>,
) -> Result<(), Failure> {
    for k in params.keys() {
        if !d.has_param(k) && !candidate_keys.contains(k) {
            return Err(Failure::usage(format!(
                "`{}` takes no parameter `{}`",
                d.name, k
            )));
        }
    }
    Ok(())
}

/// A candidate is either a registered name on the system or a file path.
/// Returns (display name, candidate's declared parameter names, preferred
/// grid, built section).
fn resolve_candidate(
    d: &SystemDescriptor,
    key: &str,
    params: &BTreeMap<String, f64>,
) -> Result<(String, BTreeSet<String>, Option<GridSpec>, LoadedCandidate), Failure> {
    if let Some(spec) = d.candidate(key) {
        let declared: BTreeSet<String> = spec.params.iter().map(|(k, _)| k.to_string()).collect();
        let built = match spec.build(params)? {
            BuiltCandidate::Vector(v) => LoadedCandidate::Vector(v),
            BuiltCandidate::OneForm(a) => LoadedCandidate::OneForm(a),
        };
        return Ok((key.to_string(), declared, spec.grid.clone(), built));
    }
    let path = Path::new(key);
    if path.is_file() {
        let file = candidate::load(path).map_err(|e| Failure::usage(e.to_string()))?;
        let declared: BTreeSet<String> = file.params.keys().cloned().collect();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| key.to_string());
        let built =
            candidate::compile(&file, &name, d.dof, params).map_err(|e| Failure::usage(e.to_string()))?;
        return Ok((name, declared, None, built));
    }
    Err(Failure::usage(format!(
        "candidate `{}` is neither registered on `{}` nor a readable file",
        key, d.name
    )))
}

fn write_text(out: Option<&str>, content: &str) -> Result<(), Failure> {
    let path = out.map(PathBuf::from);
    report::write_output(path.as_deref(), content)
        .map_err(|e| Failure::usage(format!("cannot write output: {e}")))
}

fn channel_max(rep: &ResidualReport) -> f64 {
    rep.channels.values().map(|c| c.max).fold(0.0, f64::max)
}

/// Newline-terminate every CSV row.
fn csv_concat(rows: Vec<String>) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Registered system name
    #[arg(long)]
    pub system: Option<String>,
    /// Registered candidate name or path to a candidate file
    #[arg(long)]
    pub candidate: Option<String>,
    /// Comma-separated name=value parameter overrides
    #[arg(long)]
    pub params: Option<String>,
    /// Verification grid, comma-separated axes name:min:max:count
    #[arg(long)]
    pub grid: Option<String>,
    /// Residual tolerance (default 1e-8)
    #[arg(long)]
    pub tol: Option<String>,
    /// generalized, standard or singular-isotropy
    #[arg(long)]
    pub mode: Option<String>,
    /// Differentiation kernel: dual or central
    #[arg(long)]
    pub diff: Option<String>,
    /// Output format: json or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run_verify(a: &VerifyArgs, cfg: &FileSettings, threads: usize) -> Result<i32, Failure> {
    let ctx = Ctx {
        cfg,
        section: "verify",
    };
    let system = ctx.req(a.system.as_ref(), "system")?;
    let params = parse_params(&ctx.get(a.params.as_ref(), "params").unwrap_or_default())?;
    let d = build_system(&system, &params)?;
    let cand_key = ctx.req(a.candidate.as_ref(), "candidate")?;
    let tol = ctx.f64(a.tol.as_ref(), "tol", 1e-8)?;
    if tol <= 0.0 {
        return Err(Failure::usage("--tol must be positive"));
    }
    let mode = parse_mode(&ctx.get(a.mode.as_ref(), "mode").unwrap_or_else(|| "generalized".into()))?;
    let dcfg = parse_diff(&ctx.get(a.diff.as_ref(), "diff").unwrap_or_else(|| "dual".into()))?;
    let format = parse_format(&ctx.get(a.format.as_ref(), "format").unwrap_or_else(|| "json".into()))?;

    let (cand_name, declared, cand_grid, built) = resolve_candidate(&d, &cand_key, &params)?;
    reject_unknown_params(&d, &declared, &params)?;

    let grid = match ctx.get(a.grid.as_ref(), "grid") {
        Some(s) => parse_grid(&s)?.1,
        None => cand_grid.unwrap_or_else(|| d.base_grid.clone()),
    };
    if grid.dim() != d.dof {
        return Err(Failure::usage(format!(
            "grid has {} axes but `{}` has {} degrees of freedom",
            grid.dim(),
            d.name,
            d.dof
        )));
    }

    let rep = match &built {
        LoadedCandidate::Vector(x) => {
            if let Some(ov) = &d.verify_override {
                ov(x, &grid, mode, tol, &dcfg, threads)?
            } else {
                let sys = d.lagrangian.as_ref().ok_or_else(|| {
                    Failure::usage(format!(
                        "`{}` registers no Lagrangian; vector candidates cannot be verified",
                        d.name
                    ))
                })?;
                verify(sys, x, &grid, mode, tol, &dcfg, threads)?
            }
        }
        LoadedCandidate::OneForm(alpha) => {
            if mode == VerifyMode::SingularIsotropy {
                return Err(Failure::usage(
                    "mode singular-isotropy applies to vector-field candidates",
                ));
            }
            let sys = d.hamiltonian.as_ref().ok_or_else(|| {
                Failure::usage(format!(
                    "`{}` registers no Hamiltonian; one-form candidates cannot be verified",
                    d.name
                ))
            })?;
            verify_h(sys, alpha, &grid, mode, tol, &dcfg, threads)?
        }
    };

    let text = match format {
        Format::Json => report::verify_json(d.name, &cand_name, &rep),
        Format::Csv => report::verify_csv(&rep),
    };
    write_text(ctx.get(a.out.as_ref(), "out").as_deref(), &text)?;
    Ok(if rep.pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    /// Registered system name
    #[arg(long)]
    pub system: Option<String>,
    /// Comma-separated name=value parameter overrides
    #[arg(long)]
    pub params: Option<String>,
    /// Initial state, comma-separated (system default when omitted)
    #[arg(long)]
    pub x0: Option<String>,
    /// Step size (system default when omitted)
    #[arg(long)]
    pub dt: Option<String>,
    /// Step count (system default when omitted)
    #[arg(long)]
    pub steps: Option<String>,
    /// `projection` compares the base curve of --candidate with the
    /// projected dynamics trajectory
    #[arg(long)]
    pub mode: Option<String>,
    /// Vector-field candidate for projection mode
    #[arg(long)]
    pub candidate: Option<String>,
    /// Differentiation kernel: dual or central
    #[arg(long)]
    pub diff: Option<String>,
    /// Output format: json or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<String>,
}

/// Extra per-step column for projection mode.
struct ProjectionColumn {
    distances: Vec<f64>,
    sup: f64,
}

pub fn run_integrate(a: &IntegrateArgs, cfg: &FileSettings) -> Result<i32, Failure> {
    let ctx = Ctx {
        cfg,
        section: "integrate",
    };
    let system = ctx.req(a.system.as_ref(), "system")?;
    let params = parse_params(&ctx.get(a.params.as_ref(), "params").unwrap_or_default())?;
    let d = build_system(&system, &params)?;
    let dcfg = parse_diff(&ctx.get(a.diff.as_ref(), "diff").unwrap_or_else(|| "dual".into()))?;
    let format = parse_format(&ctx.get(a.format.as_ref(), "format").unwrap_or_else(|| "json".into()))?;
    let dt = ctx.f64(a.dt.as_ref(), "dt", d.default_dt)?;
    if dt <= 0.0 {
        return Err(Failure::usage("--dt must be positive"));
    }
    let steps = ctx.usize(a.steps.as_ref(), "steps", d.default_steps)?;
    if steps == 0 {
        return Err(Failure::usage("--steps must be at least 1"));
    }
    let rhs = d.rhs(dcfg)?;
    let project: Option<&(dyn Fn(&mut [f64]) + Sync)> = match &d.projection {
        Some(p) => Some(&**p),
        None => None,
    };

    let mode = ctx.get(a.mode.as_ref(), "mode");
    let (traj, proj) = match mode.as_deref() {
        None | Some("trajectory") => {
            let x0 = match ctx.get(a.x0.as_ref(), "x0") {
                Some(s) => parse_floats(&s, "--x0")?,
                None => d.default_x0.clone(),
            };
            if x0.len() != d.state_dim {
                return Err(Failure::usage(format!(
                    "--x0 has {} entries but `{}` integrates a {}-dimensional state",
                    x0.len(),
                    d.name,
                    d.state_dim
                )));
            }
            reject_unknown_params(&d, &BTreeSet::new(), &params)?;
            (
                integrate(|x| rhs(x), &x0, dt, steps, &d.state_guard, project),
                None,
            )
        }
        Some("projection") => {
            if d.state_dim != 2 * d.dof {
                return Err(Failure::usage(format!(
                    "projection mode requires state = (q, velocity); `{}` has state dimension {}",
                    d.name, d.state_dim
                )));
            }
            let cand_key = ctx.req(a.candidate.as_ref(), "candidate")?;
            let (_, declared, _, built) = resolve_candidate(&d, &cand_key, &params)?;
            reject_unknown_params(&d, &declared, &params)?;
            let xf = match built {
                LoadedCandidate::Vector(v) => v,
                LoadedCandidate::OneForm(_) => {
                    return Err(Failure::usage(
                        "projection mode needs a vector-field candidate",
                    ))
                }
            };
            let q0: Vec<f64> = match ctx.get(a.x0.as_ref(), "x0") {
                Some(s) => {
                    let v = parse_floats(&s, "--x0")?;
                    if v.len() == d.dof {
                        v
                    } else if v.len() == d.state_dim {
                        v[..d.dof].to_vec()
                    } else {
                        return Err(Failure::usage(format!(
                            "--x0 needs {} (base point) or {} (full state) entries",
                            d.dof, d.state_dim
                        )));
                    }
                }
                None => d.default_x0[..d.dof].to_vec(),
            };
            let v0 = xf.section.value(&q0)?;
            let mut lifted = q0.clone();
            lifted.extend_from_slice(&v0);
            let full = integrate(|x| rhs(x), &lifted, dt, steps, &d.state_guard, project);
            let base = integrate(
                |q| xf.section.value(q),
                &q0,
                dt,
                steps,
                xf.section.guard(),
                None,
            );
            let rows = full.states.len().min(base.states.len());
            let distances: Vec<f64> = (0..rows)
                .map(|k| {
                    (0..d.dof)
                        .map(|i| (full.states[k][i] - base.states[k][i]).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            let sup = distances.iter().fold(0.0, |m: f64, &v| m.max(v));
            let traj = if base.complete {
                full
            } else {
                // the base curve stopping early also makes the run partial
                hjt_core::Trajectory {
                    times: full.times[..rows].to_vec(),
                    states: full.states[..rows].to_vec(),
                    complete: false,
                    violation_step: base.violation_step,
                }
            };
            (traj, Some(ProjectionColumn { distances, sup }))
        }
        Some(other) => {
            return Err(Failure::usage(format!(
                "--mode for integrate must be trajectory or projection, got `{other}`"
            )));
        }
    };

    // conserved quantities along the trajectory and their drift; a state
    // outside a quantity's own guard leaves a hole instead of killing the
    // report
    let mut conserved_cols: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    let mut drifts: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for (label, field) in &d.conserved {
        let vals: Vec<Option<f64>> = traj
            .states
            .iter()
            .map(|s| field.value(s).ok())
            .collect();
        let drift = vals.iter().flatten().next().map(|first| {
            vals.iter()
                .flatten()
                .map(|v| (v - first).abs())
                .fold(0.0, f64::max)
        });
        drifts.insert(label.clone(), drift);
        conserved_cols.push((label.clone(), vals));
    }

    let text = match format {
        Format::Json => {
            let mut doc = json!({
                "complete": traj.complete,
                "drifts": drifts,
                "dt": dt,
                "final_state": traj.last_state(),
                "steps_requested": steps,
                "steps_run": traj.times.len() - 1,
                "system": d.name,
                "t_final": traj.times.last().copied(),
            });
            let map = doc.as_object_mut().expect("object literal");
            map.insert(
                "violation_step".into(),
                match traj.violation_step {
                    Some(k) => json!(k),
                    None => serde_json::Value::Null,
                },
            );
            if let Some(p) = &proj {
                map.insert("sup_projection".into(), json!(p.sup));
            }
            report::json_doc(&doc)
        }
        Format::Csv => {
            let mut header: Vec<String> = vec!["t".into()];
            header.extend((1..=d.state_dim).map(|i| format!("x{i}")));
            header.extend(conserved_cols.iter().map(|(l, _)| l.clone()));
            if proj.is_some() {
                header.push("proj_dist".into());
            }
            let width = header.len();
            let mut lines = vec![report::csv_row(&header)];
            for (k, state) in traj.states.iter().enumerate() {
                let mut row = vec![report::fmt_f64(traj.times[k])];
                row.extend(state.iter().map(|&v| report::fmt_f64(v)));
                for (_, vals) in &conserved_cols {
                    row.push(vals[k].map(report::fmt_f64).unwrap_or_default());
                }
                if let Some(p) = &proj {
                    row.push(report::fmt_f64(p.distances[k]));
                }
                lines.push(report::csv_row(&row));
            }
            let mut summary = vec!["max_drift".to_string()];
            summary.extend(std::iter::repeat_n(String::new(), d.state_dim));
            for (label, _) in &conserved_cols {
                summary.push(drifts[label].map(report::fmt_f64).unwrap_or_default());
            }
            if let Some(p) = &proj {
                summary.push(report::fmt_f64(p.sup));
            }
            lines.push(report::csv_row(&summary));
            if let Some(step) = traj.violation_step {
                let mut row = vec!["guard_violation_step".to_string(), step.to_string()];
                row.resize(width, String::new());
                lines.push(report::csv_row(&row));
            }
            csv_concat(lines)
        }
    };
    write_text(ctx.get(a.out.as_ref(), "out").as_deref(), &text)?;
    Ok(if traj.complete { 0 } else { 3 })
}

// ---------------------------------------------------------------------------
// brackets
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct BracketsArgs {
    /// Registered system name
    #[arg(long)]
    pub system: Option<String>,
    /// Comma-separated name=value parameter overrides
    #[arg(long)]
    pub params: Option<String>,
    /// Comma-separated integral labels (all registered when omitted)
    #[arg(long)]
    pub integrals: Option<String>,
    /// Involution tolerance (default 1e-8)
    #[arg(long)]
    pub tol: Option<String>,
    /// Fail (exit 1) when any bracket magnitude exceeds the tolerance
    #[arg(long)]
    pub require_involution: bool,
    /// Differentiation kernel: dual or central
    #[arg(long)]
    pub diff: Option<String>,
    /// Output format: json or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run_brackets(a: &BracketsArgs, cfg: &FileSettings, threads: usize) -> Result<i32, Failure> {
    let ctx = Ctx {
        cfg,
        section: "brackets",
    };
    let system = ctx.req(a.system.as_ref(), "system")?;
    let params = parse_params(&ctx.get(a.params.as_ref(), "params").unwrap_or_default())?;
    let d = build_system(&system, &params)?;
    reject_unknown_params(&d, &BTreeSet::new(), &params)?;
    let tol = ctx.f64(a.tol.as_ref(), "tol", 1e-8)?;
    if tol <= 0.0 {
        return Err(Failure::usage("--tol must be positive"));
    }
    let dcfg = parse_diff(&ctx.get(a.diff.as_ref(), "diff").unwrap_or_else(|| "dual".into()))?;
    let format = parse_format(&ctx.get(a.format.as_ref(), "format").unwrap_or_else(|| "json".into()))?;
    let require = a.require_involution
        || matches!(
            ctx.get(None, "require-involution").as_deref(),
            Some("true") | Some("1")
        );

    let labels: Vec<String> = match ctx.get(a.integrals.as_ref(), "integrals") {
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(String::from)
            .collect(),
        None => d.integrals.iter().map(|(l, _)| l.clone()).collect(),
    };
    if labels.is_empty() {
        return Err(Failure::usage(format!(
            "`{}` registers no first integrals",
            d.name
        )));
    }
    let sys = d.lagrangian.as_ref().ok_or_else(|| {
        Failure::usage(format!(
            "`{}` registers no Lagrangian; brackets need the Cartan structure",
            d.name
        ))
    })?;
    let mut fields: Vec<&ScalarField> = Vec::with_capacity(labels.len());
    for l in &labels {
        let f = d.integral(l).ok_or_else(|| {
            Failure::usage(format!("`{}` registers no integral `{}`", d.name, l))
        })?;
        if f.arity() != 2 * sys.dof() {
            return Err(Failure::usage(format!(
                "integral `{}` does not live on the velocity phase space",
                l
            )));
        }
        fields.push(f);
    }

    let pts = d.state_grid.guarded_points(&d.state_guard)?;
    let k = fields.len();
    let mut table = vec![vec![0.0; k]; k];
    let mut max_abs = 0.0f64;
    for i in 0..k {
        for j in 0..=i {
            let vals = map_points(&pts, threads, |s| {
                match poisson_bracket(sys, fields[i], fields[j], s, &dcfg) {
                    Ok(v) => Ok(Some(v.abs())),
                    Err(HjtError::GuardViolation) => Ok(None),
                    Err(e) => Err(e),
                }
            });
            let mut best: Option<f64> = None;
            for r in vals {
                if let Some(v) = r? {
                    best = Some(best.map_or(v, |b| b.max(v)));
                }
            }
            let m = best.ok_or_else(|| {
                Failure::numerical("every state grid point violates an integral guard")
            })?;
            table[i][j] = m;
            table[j][i] = m;
            max_abs = max_abs.max(m);
        }
    }
    let pass = !require || max_abs <= tol;

    let text = match format {
        Format::Json => {
            let doc = json!({
                "labels": labels,
                "max_abs": max_abs,
                "pass": pass,
                "require_involution": require,
                "system": d.name,
                "table": table,
                "tol": tol,
            });
            report::json_doc(&doc)
        }
        Format::Csv => {
            let mut header = vec!["integral".to_string()];
            header.extend(labels.iter().cloned());
            let mut lines = vec![report::csv_row(&header)];
            for (i, l) in labels.iter().enumerate() {
                let mut row = vec![l.clone()];
                row.extend(table[i].iter().map(|&v| report::fmt_f64(v)));
                lines.push(report::csv_row(&row));
            }
            csv_concat(lines)
        }
    };
    write_text(ctx.get(a.out.as_ref(), "out").as_deref(), &text)?;
    Ok(if pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Registered system name
    #[arg(long)]
    pub system: Option<String>,
    /// Comma-separated name=value parameter overrides
    #[arg(long)]
    pub params: Option<String>,
    /// Integral labels spanning the leaf family, one per degree of freedom
    #[arg(long)]
    pub integrals: Option<String>,
    /// Level-value grid, axes label:min:max:count matching --integrals
    #[arg(long)]
    pub grid: Option<String>,
    /// Verification tolerance (default 1e-8)
    #[arg(long)]
    pub tol: Option<String>,
    /// Fiber seed velocity, comma-separated (default from the system state)
    #[arg(long)]
    pub seed: Option<String>,
    /// Differentiation kernel: dual or central
    #[arg(long)]
    pub diff: Option<String>,
    /// Output format: json or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<String>,
}

struct ScanCell {
    lambda: Vec<f64>,
    status: String,
    generalized: Option<bool>,
    standard: Option<bool>,
    generalized_max: Option<f64>,
    standard_max: Option<f64>,
    min_abs_det: Option<f64>,
}

pub fn run_scan(a: &ScanArgs, cfg: &FileSettings, threads: usize) -> Result<i32, Failure> {
    let ctx = Ctx {
        cfg,
        section: "scan",
    };
    let system = ctx.req(a.system.as_ref(), "system")?;
    let params = parse_params(&ctx.get(a.params.as_ref(), "params").unwrap_or_default())?;
    let d = build_system(&system, &params)?;
    reject_unknown_params(&d, &BTreeSet::new(), &params)?;
    let tol = ctx.f64(a.tol.as_ref(), "tol", 1e-8)?;
    if tol <= 0.0 {
        return Err(Failure::usage("--tol must be positive"));
    }
    let dcfg = parse_diff(&ctx.get(a.diff.as_ref(), "diff").unwrap_or_else(|| "dual".into()))?;
    let format = parse_format(&ctx.get(a.format.as_ref(), "format").unwrap_or_else(|| "json".into()))?;

    let labels: Vec<String> = ctx
        .req(a.integrals.as_ref(), "integrals")?
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect();
    if labels.len() != d.dof {
        return Err(Failure::usage(format!(
            "a complete family on `{}` needs exactly {} integral labels, got {}",
            d.name,
            d.dof,
            labels.len()
        )));
    }
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let fam = d.family(&label_refs).ok_or_else(|| {
        Failure::usage(format!(
            "`{}` does not register all of the integrals {:?}",
            d.name, labels
        ))
    })?;
    if d.lagrangian.is_none() && d.verify_override.is_none() {
        return Err(Failure::usage(format!(
            "`{}` cannot verify vector candidates",
            d.name
        )));
    }

    let (axis_names, lam_grid) = parse_grid(&ctx.req(a.grid.as_ref(), "grid")?)?;
    if axis_names != labels {
        return Err(Failure::usage(format!(
            "--grid axes {:?} must match --integrals {:?}",
            axis_names, labels
        )));
    }

    let seed: Vec<f64> = match ctx.get(a.seed.as_ref(), "seed") {
        Some(s) => {
            let v = parse_floats(&s, "--seed")?;
            if v.len() != d.dof {
                return Err(Failure::usage(format!(
                    "--seed needs {} fiber coordinates",
                    d.dof
                )));
            }
            v
        }
        None => {
            if d.state_dim == 2 * d.dof {
                d.default_x0[d.dof..].to_vec()
            } else {
                return Err(Failure::usage(
                    "this system's state is not (q, velocity); pass --seed",
                ));
            }
        }
    };

    let q_grid = d.base_grid.clone();
    // leaf sections carry a box guard matching the verification grid, with a
    // hair of margin so the endpoints are admitted
    let bounds: Vec<(f64, f64)> = q_grid
        .axes
        .iter()
        .map(|ax| (ax.min - 1e-9, ax.max + 1e-9))
        .collect();
    let guard = guard_from(move |q: &[f64]| {
        q.len() == bounds.len()
            && q.iter()
                .zip(&bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    });
    let lcfg = LeafSolveConfig::default();

    let verify_cell = |x: &CandidateVectorField, mode: VerifyMode| -> Result<ResidualReport, HjtError> {
        if let Some(ov) = &d.verify_override {
            ov(x, &q_grid, mode, tol, &dcfg, threads)
        } else {
            verify(
                d.lagrangian.as_ref().expect("checked above"),
                x,
                &q_grid,
                mode,
                tol,
                &dcfg,
                threads,
            )
        }
    };

    let mut cells: Vec<ScanCell> = Vec::new();
    for lambda in lam_grid.points() {
        let mut cell = ScanCell {
            lambda: lambda.clone(),
            status: "ok".into(),
            generalized: None,
            standard: None,
            generalized_max: None,
            standard_max: None,
            min_abs_det: None,
        };
        match build_complete_solution(&fam, &lambda, &q_grid, &seed, guard.clone(), &lcfg, &dcfg) {
            Err(e) => cell.status = format!("build failed: {e}"),
            Ok(cand) => {
                match verify_cell(&cand, VerifyMode::Generalized) {
                    Ok(rep) => {
                        cell.generalized = Some(rep.pass);
                        cell.generalized_max = Some(channel_max(&rep));
                    }
                    Err(e) => cell.status = format!("generalized check failed: {e}"),
                }
                match verify_cell(&cand, VerifyMode::Standard) {
                    Ok(rep) => {
                        cell.standard = Some(rep.pass);
                        cell.standard_max = Some(channel_max(&rep));
                    }
                    Err(e) => cell.status = format!("standard check failed: {e}"),
                }
                let cell_axes: Vec<AxisSpec> =
                    lambda.iter().map(|&v| AxisSpec::new(v, v, 1)).collect();
                match transversality_check(
                    &fam,
                    &q_grid,
                    &GridSpec::new(cell_axes),
                    &seed,
                    &lcfg,
                    &dcfg,
                ) {
                    Ok(tr) => cell.min_abs_det = Some(tr.min_abs_det),
                    Err(e) => cell.status = format!("transversality check failed: {e}"),
                }
            }
        }
        cells.push(cell);
    }

    let text = match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = cells
                .iter()
                .map(|c| {
                    let lam: BTreeMap<&str, f64> = labels
                        .iter()
                        .map(String::as_str)
                        .zip(c.lambda.iter().copied())
                        .collect();
                    json!({
                        "generalized": c.generalized,
                        "generalized_max": c.generalized_max,
                        "lambda": lam,
                        "min_abs_det": c.min_abs_det,
                        "standard": c.standard,
                        "standard_max": c.standard_max,
                        "status": c.status,
                    })
                })
                .collect();
            let doc = json!({
                "cells": rows,
                "integrals": labels,
                "seed": seed,
                "system": d.name,
                "tol": tol,
            });
            report::json_doc(&doc)
        }
        Format::Csv => {
            let mut header = labels.clone();
            header.extend(
                [
                    "status",
                    "generalized",
                    "standard",
                    "generalized_max",
                    "standard_max",
                    "min_abs_det",
                ]
                .map(String::from),
            );
            let verdict = |v: Option<bool>| match v {
                Some(true) => "pass".to_string(),
                Some(false) => "fail".to_string(),
                None => String::new(),
            };
            let opt_num = |v: Option<f64>| v.map(report::fmt_f64).unwrap_or_default();
            let mut lines = vec![report::csv_row(&header)];
            for c in &cells {
                let mut row: Vec<String> = c.lambda.iter().map(|&v| report::fmt_f64(v)).collect();
                row.push(c.status.clone());
                row.push(verdict(c.generalized));
                row.push(verdict(c.standard));
                row.push(opt_num(c.generalized_max));
                row.push(opt_num(c.standard_max));
                row.push(opt_num(c.min_abs_det));
                lines.push(report::csv_row(&row));
            }
            csv_concat(lines)
        }
    };
    write_text(ctx.get(a.out.as_ref(), "out").as_deref(), &text)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// list-systems
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ListArgs {
    /// Output format: json or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run_list_systems(a: &ListArgs, cfg: &FileSettings) -> Result<i32, Failure> {
    let ctx = Ctx {
        cfg,
        section: "list-systems",
    };
    let format = parse_format(&ctx.get(a.format.as_ref(), "format").unwrap_or_else(|| "json".into()))?;
    let registry = systems::registry();

    let text = match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = registry
                .iter()
                .map(|d| {
                    let cands: Vec<serde_json::Value> = d
                        .candidates
                        .iter()
                        .map(|c| {
                            let params: BTreeMap<&str, f64> = c.params.iter().copied().collect();
                            json!({
                                "kind": match c.kind {
                                    SectionKind::Vector => "vector",
                                    SectionKind::OneForm => "oneform",
                                },
                                "name": c.name,
                                "params": params,
                                "standard": c.standard,
                                "summary": c.summary,
                            })
                        })
                        .collect();
                    let params: BTreeMap<&str, f64> = d.params.iter().copied().collect();
                    json!({
                        "candidates": cands,
                        "conserved": d.conserved.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
                        "dof": d.dof,
                        "integrals": d.integrals.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
                        "name": d.name,
                        "params": params,
                        "singular": d.singular,
                        "state_dim": d.state_dim,
                        "summary": d.summary,
                    })
                })
                .collect();
            report::json_doc(&serde_json::Value::Array(rows))
        }
        Format::Csv => {
            let header = ["name", "dof", "state_dim", "singular", "summary"].map(String::from);
            let mut lines = vec![report::csv_row(&header)];
            for d in &registry {
                let row = vec![
                    d.name.to_string(),
                    d.dof.to_string(),
                    d.state_dim.to_string(),
                    d.singular.to_string(),
                    d.summary.to_string(),
                ];
                lines.push(report::csv_row(&row));
            }
            csv_concat(lines)
        }
    };
    write_text(ctx.get(a.out.as_ref(), "out").as_deref(), &text)?;
    Ok(0)
}
