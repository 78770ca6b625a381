//! Scenario files: TOML documents with one section per concern, resolved
//! into a validated [`Scenario`] with every expression parsed and the time
//! step fixed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wavepot_core::expr::Expression;
use wavepot_core::maxwell::{MaxwellSystem, SourceSpec, DEFAULT_SAFETY as MAXWELL_SAFETY};
use wavepot_core::phi::{stable_dt, DEFAULT_SAFETY as PHI_SAFETY};
use wavepot_core::schrodinger::{Potential, QuantumParams, QuantumSystem};
use wavepot_core::{Backend, Grid, Ops};

use crate::error::{CliError, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Schrodinger,
    Phi,
    MaxwellFields,
    MaxwellPotential,
    ReconstructPhi,
    ReconstructA,
    Compare,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Schrodinger,
        Kind::Phi,
        Kind::MaxwellFields,
        Kind::MaxwellPotential,
        Kind::ReconstructPhi,
        Kind::ReconstructA,
        Kind::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Schrodinger => "schrodinger",
            Kind::Phi => "phi",
            Kind::MaxwellFields => "maxwell-fields",
            Kind::MaxwellPotential => "maxwell-potential",
            Kind::ReconstructPhi => "reconstruct-phi",
            Kind::ReconstructA => "reconstruct-A",
            Kind::Compare => "compare",
        }
    }

    fn is_quantum(self) -> bool {
        matches!(self, Kind::Schrodinger | Kind::Phi)
    }

    fn is_maxwell(self) -> bool {
        matches!(self, Kind::MaxwellFields | Kind::MaxwellPotential)
    }

    fn is_forward(self) -> bool {
        self.is_quantum() || self.is_maxwell()
    }

    /// Names of the monitor ceilings that apply to this kind.
    pub fn monitors(self) -> &'static [&'static str] {
        match self {
            Kind::Schrodinger => &["norm_drift", "energy_drift"],
            Kind::Phi => &["norm_drift", "energy_drift", "identity"],
            Kind::MaxwellFields | Kind::MaxwellPotential => &["energy_drift", "constraint", "div_b"],
            Kind::ReconstructPhi => &["closure", "equation"],
            Kind::ReconstructA => &["closure"],
            Kind::Compare => &["difference"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                CliError::invalid_field("kind", format!("`{s}` is not one of {}", names.join(", ")))
            })
    }
}

/// Grid, constants and potential of a run: everything needed to rebuild
/// the operators. Stored verbatim in snapshot headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
    pub backend: String,
    pub hbar: f64,
    pub m: f64,
    pub c: f64,
    pub potential: String,
    /// User constants bound by name in every expression.
    pub constants: BTreeMap<String, f64>,
}

impl Physics {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.points, &self.lengths).context("grid")
    }

    pub fn ops(&self) -> Result<Ops> {
        Ok(Ops::new(self.backend.parse::<Backend>().context("grid.backend")?))
    }

    /// Constants visible to expressions: user constants, `hbar`, `m`, `c`
    /// and the box lengths `Lx`, `Ly`, `Lz` of the axes present.
    pub fn bindings(&self) -> HashMap<String, f64> {
        let mut b: HashMap<String, f64> = self.constants.iter().map(|(k, v)| (k.clone(), *v)).collect();
        b.insert("hbar".into(), self.hbar);
        b.insert("m".into(), self.m);
        b.insert("c".into(), self.c);
        for (name, l) in ["Lx", "Ly", "Lz"].iter().zip(&self.lengths) {
            b.entry(name.to_string()).or_insert(*l);
        }
        b
    }

    pub fn quantum_system(&self) -> Result<QuantumSystem> {
        let grid = self.grid()?;
        let params = QuantumParams::new(self.hbar, self.m).context("constants")?;
        let expr = Expression::parse(&self.potential).context("potential.V")?;
        let potential = Potential::from_expression(expr, &grid, &self.bindings()).context("potential.V")?;
        Ok(QuantumSystem::new(params, potential, self.ops()?))
    }

    pub fn maxwell_system(&self) -> Result<MaxwellSystem> {
        MaxwellSystem::new(self.c, self.ops()?).context("constants.c")
    }
}

/// Initial data, interpreted according to the scenario kind.
#[derive(Debug, Clone)]
pub enum Initial {
    /// A wave function `re + i im`; for `phi` runs the potential is solved
    /// from it.
    Psi {
        re: Expression,
        im: Expression,
        normalize: bool,
    },
    Phi {
        phi: Expression,
        phi_dot: Expression,
    },
    /// Eigenstate `level` of the discrete Hamiltonian.
    Stationary { level: usize, amplitude: f64 },
    /// Smooth random data from a few low Fourier modes, drawn from `seed`.
    Random { modes: usize, amplitude: f64 },
    Fields {
        e: [Expression; 3],
        b: [Expression; 3],
    },
    Potential {
        a: [Expression; 3],
        a_dot: [Expression; 3],
    },
    /// Vacuum plane wave with wave vector `2 pi mode / L` per axis.
    PlaneWave {
        mode: [i64; 3],
        polarization: [f64; 3],
        amplitude: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Sources {
    pub rho: String,
    pub j: [String; 3],
    pub spec: SourceSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    CrankNicolson,
    /// Dense eigendecomposition propagator (oracle runs on small grids).
    Exact,
    Verlet,
    Rk4,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CrankNicolson => "crank-nicolson",
            Method::Exact => "exact",
            Method::Verlet => "verlet",
            Method::Rk4 => "rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
    pub diagnostics_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    None,
    PhiToPsi,
    AToFields,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::PhiToPsi => "phi-to-psi",
            Transform::AToFields => "a-to-fields",
        }
    }
}

impl FromStr for Transform {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Transform::None),
            "phi-to-psi" => Ok(Transform::PhiToPsi),
            "a-to-fields" => Ok(Transform::AToFields),
            other => Err(CliError::invalid_field(
                "compare.transform",
                format!("`{other}` is not one of none, phi-to-psi, a-to-fields"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub a: PathBuf,
    pub b: PathBuf,
    pub transform: Transform,
}

/// Ceilings on monitored invariants; a run that exceeds any of them exits
/// with status 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monitors {
    pub norm_drift: Option<f64>,
    pub energy_drift: Option<f64>,
    pub identity: Option<f64>,
    pub constraint: Option<f64>,
    pub div_b: Option<f64>,
    pub closure: Option<f64>,
    pub equation: Option<f64>,
    pub difference: Option<f64>,
}

impl Monitors {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "norm_drift" => self.norm_drift,
            "energy_drift" => self.energy_drift,
            "identity" => self.identity,
            "constraint" => self.constraint,
            "div_b" => self.div_b,
            "closure" => self.closure,
            "equation" => self.equation,
            "difference" => self.difference,
            _ => None,
        }
    }

    fn set_names(&self) -> Vec<&'static str> {
        [
            "norm_drift",
            "energy_drift",
            "identity",
            "constraint",
            "div_b",
            "closure",
            "equation",
            "difference",
        ]
        .into_iter()
        .filter(|n| self.get(n).is_some())
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub snapshots: String,
    pub diagnostics: String,
    pub report: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: u64,
    pub physics: Option<Physics>,
    pub initial: Option<Initial>,
    pub sources: Option<Sources>,
    pub integrator: Option<Integrator>,
    pub input: Option<PathBuf>,
    pub compare: Option<CompareSpec>,
    pub monitors: Monitors,
    pub output: OutputSpec,
    /// SHA-256 of the resolved scenario document (after overrides).
    pub hash: String,
}

impl Scenario {
    pub fn physics(&self) -> Result<&Physics> {
        self.physics.as_ref().ok_or_else(|| CliError::MissingField("grid".into()))
    }

    pub fn integrator(&self) -> Result<Integrator> {
        self.integrator.ok_or_else(|| CliError::MissingField("integrator".into()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<String>,
    seed: Option<u64>,
    grid: Option<RawGrid>,
    constants: Option<BTreeMap<String, f64>>,
    potential: Option<RawPotential>,
    initial: Option<RawInitial>,
    sources: Option<RawSources>,
    integrator: Option<RawIntegrator>,
    input: Option<RawInput>,
    compare: Option<RawCompare>,
    monitors: Option<Monitors>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    points: Option<Vec<usize>>,
    lengths: Option<Vec<f64>>,
    backend: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    #[serde(rename = "V")]
    v: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(rename = "type")]
    kind: Option<String>,
    psi: Option<Vec<String>>,
    normalize: Option<bool>,
    phi: Option<String>,
    phi_dot: Option<String>,
    level: Option<usize>,
    amplitude: Option<f64>,
    modes: Option<usize>,
    e: Option<Vec<String>>,
    b: Option<Vec<String>>,
    a: Option<Vec<String>>,
    a_dot: Option<Vec<String>>,
    mode: Option<Vec<i64>>,
    polarization: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSources {
    rho: Option<String>,
    j: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    method: Option<String>,
    dt: Option<toml::Value>,
    safety: Option<f64>,
    steps: Option<usize>,
    duration: Option<f64>,
    stride: Option<usize>,
    diagnostics_stride: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    trajectory: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    a: Option<String>,
    b: Option<String>,
    transform: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    snapshots: Option<String>,
    diagnostics: Option<String>,
    report: Option<String>,
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_with(path, &[], None)
}

/// Loads a scenario, applying `key=value` overrides (dotted keys address
/// sections, values are TOML literals or bare strings) and, when given,
/// requiring or supplying the kind.
pub fn load_scenario_with(path: &Path, overrides: &[String], kind: Option<Kind>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base, overrides, kind).map_err(|e| match e {
        CliError::Parse { message, .. } => CliError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parses scenario text; relative paths inside resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path, overrides: &[String], kind: Option<Kind>) -> Result<Scenario> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse {
        path: PathBuf::from("<scenario>"),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(k) = kind {
        match table.get("kind") {
            None => {
                table.insert("kind".into(), toml::Value::String(k.name().into()));
            }
            Some(toml::Value::String(s)) if s.parse::<Kind>().ok() == Some(k) => {}
            Some(other) => {
                return Err(CliError::invalid_field(
                    "kind",
                    format!("scenario declares {other} but the `{k}` subcommand was used"),
                ))
            }
        }
    }
    let canonical = toml::to_string(&table).map_err(|e| CliError::Invalid(e.to_string()))?;
    let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
    let raw: RawScenario = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Parse {
        path: PathBuf::from("<scenario>"),
        message: e.to_string(),
    })?;
    resolve(raw, base, hash)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Invalid(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Invalid(format!("override key `{key}` is malformed")));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Invalid(format!("override `{key}`: `{part}` is not a section")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn required<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| CliError::MissingField(field.to_string()))
}

fn forbid<T>(value: &Option<T>, section: &str, kind: Kind) -> Result<()> {
    if value.is_some() {
        return Err(CliError::Invalid(format!("section `[{section}]` does not apply to kind {kind}")));
    }
    Ok(())
}

fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

fn resolve(raw: RawScenario, base: &Path, hash: String) -> Result<Scenario> {
    let kind: Kind = required(raw.kind, "kind")?.parse()?;
    let monitors = raw.monitors.unwrap_or_default();
    for name in monitors.set_names() {
        if !kind.monitors().contains(&name) {
            return Err(CliError::Invalid(format!("monitor `{name}` does not apply to kind {kind}")));
        }
        let v = monitors.get(name).unwrap_or(0.0);
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::invalid_field(&format!("monitors.{name}"), "must be a finite non-negative number"));
        }
    }
    let output = raw.output.map_or_else(
        || OutputSpec {
            snapshots: "trajectory.wpt".into(),
            diagnostics: "diagnostics.csv".into(),
            report: "report.toml".into(),
        },
        |o| OutputSpec {
            snapshots: o.snapshots.unwrap_or_else(|| "trajectory.wpt".into()),
            diagnostics: o.diagnostics.unwrap_or_else(|| "diagnostics.csv".into()),
            report: o.report.unwrap_or_else(|| "report.toml".into()),
        },
    );
    for name in [&output.snapshots, &output.diagnostics, &output.report] {
        if name.is_empty() || Path::new(name).is_absolute() || name.contains("..") {
            return Err(CliError::invalid_field("output", format!("`{name}` must be a plain relative file name")));
        }
    }
    let seed = raw.seed.unwrap_or(0);
    let mut scenario = Scenario {
        kind,
        seed,
        physics: None,
        initial: None,
        sources: None,
        integrator: None,
        input: None,
        compare: None,
        monitors,
        output,
        hash,
    };

    if !kind.is_forward() {
        forbid(&raw.grid, "grid", kind)?;
        forbid(&raw.constants, "constants", kind)?;
        forbid(&raw.potential, "potential", kind)?;
        forbid(&raw.initial, "initial", kind)?;
        forbid(&raw.sources, "sources", kind)?;
        forbid(&raw.integrator, "integrator", kind)?;
        if kind == Kind::Compare {
            forbid(&raw.input, "input", kind)?;
            let c = required(raw.compare, "compare")?;
            scenario.compare = Some(CompareSpec {
                a: resolve_path(base, &required(c.a, "compare.a")?),
                b: resolve_path(base, &required(c.b, "compare.b")?),
                transform: c.transform.as_deref().unwrap_or("none").parse()?,
            });
        } else {
            forbid(&raw.compare, "compare", kind)?;
            let input = required(raw.input, "input")?;
            scenario.input = Some(resolve_path(base, &required(input.trajectory, "input.trajectory")?));
        }
        return Ok(scenario);
    }

    forbid(&raw.input, "input", kind)?;
    forbid(&raw.compare, "compare", kind)?;
    if kind.is_maxwell() {
        forbid(&raw.potential, "potential", kind)?;
    } else {
        forbid(&raw.sources, "sources", kind)?;
    }

    let grid = required(raw.grid, "grid")?;
    let points = required(grid.points, "grid.points")?;
    let lengths = required(grid.lengths, "grid.lengths")?;
    if points.len() != lengths.len() {
        return Err(CliError::invalid_field(
            "grid.lengths",
            format!("{} lengths for {} axes", lengths.len(), points.len()),
        ));
    }
    let mut constants = raw.constants.unwrap_or_default();
    let mut take = |name: &str, default: f64| {
        let v = constants.remove(name).unwrap_or(default);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::invalid_field(&format!("constants.{name}"), "must be positive and finite"))
        }
    };
    let (hbar, m, c) = (take("hbar", 1.0)?, take("m", 1.0)?, take("c", 1.0)?);
    for (name, v) in &constants {
        if !v.is_finite() {
            return Err(CliError::invalid_field(&format!("constants.{name}"), "must be finite"));
        }
    }
    let potential = raw.potential.and_then(|p| p.v).unwrap_or_else(|| "0".into());
    let physics = Physics {
        points,
        lengths,
        backend: grid.backend.unwrap_or_else(|| "spectral".into()),
        hbar,
        m,
        c,
        potential,
        constants,
    };
    let g = physics.grid()?;
    let ops = physics.ops()?;
    let bindings = physics.bindings();

    let mut quantum = None;
    if kind.is_quantum() {
        let expr = Expression::parse(&physics.potential).context("potential.V")?;
        if expr.depends_on("t") {
            return Err(CliError::Invalid(format!("time-dependent potential unsupported for {kind}")));
        }
        quantum = Some(physics.quantum_system()?);
    } else if g.dims() != 3 {
        return Err(CliError::invalid_field("grid.points", format!("{kind} runs need a 3D grid")));
    }

    let initial = resolve_initial(kind, required(raw.initial, "initial")?, &bindings)?;

    let int = required(raw.integrator, "integrator")?;
    let method = match (kind, int.method.as_deref()) {
        (Kind::Schrodinger, None | Some("crank-nicolson")) => Method::CrankNicolson,
        (Kind::Schrodinger, Some("exact")) => Method::Exact,
        (Kind::Phi | Kind::MaxwellPotential, None | Some("verlet")) => Method::Verlet,
        (Kind::MaxwellFields, None | Some("rk4")) => Method::Rk4,
        (_, Some(other)) => {
            return Err(CliError::invalid_field(
                "integrator.method",
                format!("`{other}` is not available for kind {kind}"),
            ))
        }
        (_, None) => unreachable!("forward kinds are covered above"),
    };
    let auto_dt = |safety: f64| -> Result<f64> {
        if !(safety > 0.0 && safety.is_finite()) {
            return Err(CliError::invalid_field("integrator.safety", "must be positive"));
        }
        Ok(match kind {
            Kind::Schrodinger | Kind::Phi => stable_dt(quantum.as_ref().expect("quantum system"), safety),
            Kind::MaxwellFields => physics.maxwell_system()?.rk4_dt(&g, safety),
            _ => physics.maxwell_system()?.verlet_dt(&g, safety),
        })
    };
    let default_safety = if kind.is_quantum() { PHI_SAFETY } else { MAXWELL_SAFETY };
    let dt = match (&int.dt, int.safety) {
        (None, s) => auto_dt(s.unwrap_or(default_safety))?,
        (Some(toml::Value::String(s)), safety) if s == "auto" => auto_dt(safety.unwrap_or(default_safety))?,
        (Some(v), None) => {
            let dt = v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| CliError::invalid_field("integrator.dt", "expected a number or \"auto\""))?;
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::invalid_field("integrator.dt", "must be positive"));
            }
            dt
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Invalid("integrator.safety only applies with dt = \"auto\"".into()))
        }
    };
    let (dt, steps) = match (int.steps, int.duration) {
        (Some(_), Some(_)) => {
            return Err(CliError::Invalid("give either integrator.steps or integrator.duration, not both".into()))
        }
        (None, None) => return Err(CliError::MissingField("integrator.steps".into())),
        (Some(steps), None) => (dt, steps),
        (None, Some(duration)) => {
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(CliError::invalid_field("integrator.duration", "must be positive"));
            }
            // never exceed the requested step; land exactly on the end time
            let steps = (duration / dt - 1e-9).ceil().max(1.0) as usize;
            (duration / steps as f64, steps)
        }
    };
    if steps == 0 {
        return Err(CliError::invalid_field("integrator.steps", "must be at least 1"));
    }
    let stride = int.stride.unwrap_or(1);
    let diagnostics_stride = int.diagnostics_stride.unwrap_or(1);
    if stride == 0 || diagnostics_stride == 0 {
        return Err(CliError::invalid_field("integrator.stride", "strides must be at least 1"));
    }
    let integrator = Integrator {
        method,
        dt,
        steps,
        stride,
        diagnostics_stride,
    };

    if kind.is_maxwell() {
        let raw_src = raw.sources.unwrap_or(RawSources { rho: None, j: None });
        let rho = raw_src.rho.unwrap_or_else(|| "0".into());
        let j = match raw_src.j {
            None => ["0".to_string(), "0".to_string(), "0".to_string()],
            Some(v) => triple(v, "sources.j")?,
        };
        let parse = |s: &str, field: &str| Expression::parse(s).context(field);
        let (er, ex, ey, ez) = (
            parse(&rho, "sources.rho")?,
            parse(&j[0], "sources.j")?,
            parse(&j[1], "sources.j")?,
            parse(&j[2], "sources.j")?,
        );
        let spec = SourceSpec::new(&er, [&ex, &ey, &ez], &bindings).context("sources")?;
        // continuity gate: checked on the run's own clock before anything evolves
        let checks = steps.min(32);
        let times: Vec<f64> = (0..=checks).map(|i| (i * steps / checks) as f64 * dt).collect();
        spec.validate(&g, ops, &times, dt).context("sources")?;
        scenario.sources = Some(Sources { rho, j, spec });
    }

    scenario.physics = Some(physics);
    scenario.initial = Some(initial);
    scenario.integrator = Some(integrator);
    Ok(scenario)
}

fn triple<T>(v: Vec<T>, field: &str) -> Result<[T; 3]> {
    let n = v.len();
    v.try_into()
        .map_err(|_| CliError::invalid_field(field, format!("expected 3 entries, found {n}")))
}

fn resolve_initial(kind: Kind, raw: RawInitial, bindings: &HashMap<String, f64>) -> Result<Initial> {
    let parse = |s: &str, field: &str| -> Result<Expression> {
        let e = Expression::parse(s).context(field)?;
        // reject unbound names now rather than mid-run
        e.compile(bindings, &["x", "y", "z"]).context(field)?;
        Ok(e)
    };
    let parse3 = |v: Vec<String>, field: &str| -> Result<[Expression; 3]> {
        let [a, b, c] = triple(v, field)?;
        Ok([parse(&a, field)?, parse(&b, field)?, parse(&c, field)?])
    };
    let zero3 = || vec!["0".to_string(), "0".to_string(), "0".to_string()];
    let amplitude = raw.amplitude.unwrap_or(1.0);
    if !amplitude.is_finite() {
        return Err(CliError::invalid_field("initial.amplitude", "must be finite"));
    }
    let ty = required(raw.kind, "initial.type")?;
    let initial = match ty.as_str() {
        "expression" => match kind {
            Kind::Schrodinger | Kind::Phi if raw.psi.is_some() => {
                if raw.phi.is_some() || raw.phi_dot.is_some() {
                    return Err(CliError::Invalid("give either initial.psi or initial.phi, not both".into()));
                }
                let [re, im] = required(raw.psi, "initial.psi")?
                    .try_into()
                    .map_err(|_| CliError::invalid_field("initial.psi", "expected [real part, imaginary part]"))?;
                Initial::Psi {
                    re: parse(&re, "initial.psi")?,
                    im: parse(&im, "initial.psi")?,
                    normalize: raw.normalize.unwrap_or(false),
                }
            }
            Kind::Schrodinger => return Err(CliError::MissingField("initial.psi".into())),
            Kind::Phi => Initial::Phi {
                phi: parse(&required(raw.phi, "initial.phi")?, "initial.phi")?,
                phi_dot: parse(raw.phi_dot.as_deref().unwrap_or("0"), "initial.phi_dot")?,
            },
            Kind::MaxwellFields => {
                if raw.e.is_none() && raw.b.is_none() {
                    return Err(CliError::MissingField("initial.b".into()));
                }
                Initial::Fields {
                    e: parse3(raw.e.unwrap_or_else(zero3), "initial.e")?,
                    b: parse3(raw.b.unwrap_or_else(zero3), "initial.b")?,
                }
            }
            Kind::MaxwellPotential => {
                if raw.a.is_none() && raw.a_dot.is_none() {
                    return Err(CliError::MissingField("initial.a".into()));
                }
                Initial::Potential {
                    a: parse3(raw.a.unwrap_or_else(zero3), "initial.a")?,
                    a_dot: parse3(raw.a_dot.unwrap_or_else(zero3), "initial.a_dot")?,
                }
            }
            _ => unreachable!("only forward kinds carry initial data"),
        },
        "stationary" if kind.is_quantum() => Initial::Stationary {
            level: raw.level.unwrap_or(0),
            amplitude,
        },
        "random" => Initial::Random {
            modes: raw.modes.unwrap_or(6),
            amplitude,
        },
        "plane-wave" if kind.is_maxwell() => {
            let mode = triple(required(raw.mode, "initial.mode")?, "initial.mode")?;
            let polarization = triple(required(raw.polarization, "initial.polarization")?, "initial.polarization")?;
            if mode == [0, 0, 0] {
                return Err(CliError::invalid_field("initial.mode", "the zero mode is not a wave"));
            }
            Initial::PlaneWave {
                mode,
                polarization,
                amplitude,
            }
        }
        other => {
            return Err(CliError::invalid_field(
                "initial.type",
                format!("`{other}` is not available for kind {kind}"),
            ))
        }
    };
    Ok(initial)
}
