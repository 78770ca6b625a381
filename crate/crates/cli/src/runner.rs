//! Run orchestration: evolves or post-processes one scenario, writing the
//! trajectory, the diagnostics series and a summary report into a run
//! directory.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wavepot_core::maxwell::{plane_wave, EmState, MaxwellSystem, PotentialAState, PotentialIntegrator};
use wavepot_core::phi::{
    energy_density, equation_residual, probability_energy_residual, stationary_phi, to_wavefunction, PhiIntegrator,
    PhiState,
};
use wavepot_core::reconstruction::{reconstruct_a, reconstruct_phi, solve_elliptic, Trajectory};
use wavepot_core::schrodinger::QuantumSystem;
use wavepot_core::{ComplexField, Grid, ScalarField, VectorField};

use crate::diagnostics::DiagnosticsWriter;
use crate::error::{CliError, Context, Result, EXIT_CEILING, EXIT_OK};
use crate::scenario::{Initial, Kind, Method, Physics, Scenario, Transform};
use crate::snapshot::{Header, Snapshot, SnapshotWriter, SourcesHeader};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorResult {
    pub name: String,
    pub value: f64,
    pub ceiling: Option<f64>,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub kind: String,
    pub scenario_sha256: String,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    pub monitors: Vec<MonitorResult>,
    /// Human-readable per-frame table (compare runs only).
    #[serde(skip)]
    pub table: Vec<String>,
}

impl RunReport {
    pub fn exceeded(&self) -> bool {
        self.monitors.iter().any(|m| m.exceeded)
    }

    pub fn exit_code(&self) -> i32 {
        if self.exceeded() {
            EXIT_CEILING
        } else {
            EXIT_OK
        }
    }
}

/// Tracks the running maximum of each monitored quantity.
struct Maxima(BTreeMap<String, f64>);

impl Maxima {
    fn new() -> Self {
        Self(BTreeMap::new())
    }

    fn record(&mut self, name: &str, value: f64) {
        let e = self.0.entry(name.to_string()).or_insert(0.0);
        *e = e.max(value);
    }
}

fn provenance(s: &Scenario, physics: &Physics, dt: f64) -> Vec<(&'static str, String)> {
    vec![
        ("kind", s.kind.name().to_string()),
        ("scenario_sha256", s.hash.clone()),
        ("dt", format!("{dt:e}")),
        ("backend", physics.backend.clone()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("hbar", format!("{:e}", physics.hbar)),
        ("m", format!("{:e}", physics.m)),
        ("c", format!("{:e}", physics.c)),
        ("potential", physics.potential.clone()),
    ]
}

/// Runs a scenario, writing outputs into `out_dir` (created if needed).
pub fn run(s: &Scenario, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let (summary, table) = match s.kind {
        Kind::Schrodinger => (run_schrodinger(s, out_dir)?, Vec::new()),
        Kind::Phi => (run_phi(s, out_dir)?, Vec::new()),
        Kind::MaxwellFields => (run_fields(s, out_dir)?, Vec::new()),
        Kind::MaxwellPotential => (run_potential(s, out_dir)?, Vec::new()),
        Kind::ReconstructPhi => (run_reconstruct_phi(s, out_dir)?, Vec::new()),
        Kind::ReconstructA => (run_reconstruct_a(s, out_dir)?, Vec::new()),
        Kind::Compare => run_compare(s, out_dir)?,
    };
    let monitors = s
        .kind
        .monitors()
        .iter()
        .map(|name| {
            let value = summary.get(*name).copied().unwrap_or(0.0);
            let ceiling = s.monitors.get(name);
            MonitorResult {
                name: name.to_string(),
                value,
                ceiling,
                exceeded: ceiling.is_some_and(|c| value > c),
            }
        })
        .collect();
    let mut files = vec![s.output.diagnostics.clone(), s.output.report.clone()];
    if s.kind != Kind::Compare {
        files.insert(0, s.output.snapshots.clone());
    }
    let report = RunReport {
        kind: s.kind.name().to_string(),
        scenario_sha256: s.hash.clone(),
        files,
        summary,
        monitors,
        table,
    };
    let text = toml::to_string(&report).map_err(|e| CliError::Invalid(e.to_string()))?;
    let path = out_dir.join(&s.output.report);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

fn is_recorded(step: usize, steps: usize, stride: usize) -> bool {
    step.is_multiple_of(stride) || step == steps
}

/// Smooth random field: a few low Fourier modes with random amplitudes
/// and phases.
fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, modes: usize, amplitude: f64) -> ScalarField {
    let l = grid.lengths();
    let dims = grid.dims();
    let waves: Vec<([f64; 3], f64, f64)> = (0..modes)
        .map(|_| {
            let mut k = [0.0; 3];
            for (d, kd) in k.iter_mut().enumerate().take(dims) {
                *kd = 2.0 * PI * rng.gen_range(-3i32..=3) as f64 / l[d];
            }
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        amplitude
            * waves
                .iter()
                .map(|(k, a, p)| a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + p).cos())
                .sum::<f64>()
    })
}

fn random_vector(grid: &Grid, rng: &mut ChaCha8Rng, modes: usize, amplitude: f64) -> Result<VectorField> {
    let x = random_field(grid, rng, modes, amplitude);
    let y = random_field(grid, rng, modes, amplitude);
    let z = random_field(grid, rng, modes, amplitude);
    VectorField::new(x, y, z).context("initial data")
}

fn sample3(exprs: &[wavepot_core::expr::Expression; 3], grid: &Grid, physics: &Physics) -> Result<VectorField> {
    let b = physics.bindings();
    let f = |i: usize| exprs[i].sample(grid, &b, 0.0).context("initial data");
    VectorField::new(f(0)?, f(1)?, f(2)?).context("initial data")
}

fn initial_psi(s: &Scenario, sys: &QuantumSystem) -> Result<ComplexField> {
    let physics = s.physics()?;
    let grid = sys.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    match s.initial.as_ref().expect("validated") {
        Initial::Psi { re, im, normalize } => {
            let b = physics.bindings();
            let re = re.sample(grid, &b, 0.0).context("initial.psi")?;
            let im = im.sample(grid, &b, 0.0).context("initial.psi")?;
            let psi = ComplexField::from_parts(&re, &im).context("initial.psi")?;
            if *normalize {
                let n = psi.norm_l2();
                if n == 0.0 {
                    return Err(CliError::invalid_field("initial.psi", "cannot normalize a zero wave function"));
                }
                Ok(psi.scale(Complex64::new(1.0 / n, 0.0)))
            } else {
                Ok(psi)
            }
        }
        Initial::Stationary { level, amplitude } => {
            let (_, psi_n) = sys.eigenpairs_small(level + 1).context("initial.level")?.remove(*level);
            Ok(ComplexField::from_real(&psi_n.scale(*amplitude)))
        }
        Initial::Random { modes, amplitude } => {
            let re = random_field(grid, &mut rng, *modes, *amplitude);
            let im = random_field(grid, &mut rng, *modes, *amplitude);
            ComplexField::from_parts(&re, &im).context("initial data")
        }
        _ => Err(CliError::Invalid("initial data does not describe a wave function".into())),
    }
}

fn initial_phi(s: &Scenario, sys: &QuantumSystem) -> Result<PhiState> {
    let physics = s.physics()?;
    let grid = sys.grid();
    match s.initial.as_ref().expect("validated") {
        Initial::Phi { phi, phi_dot } => {
            let b = physics.bindings();
            PhiState::new(
                phi.sample(grid, &b, 0.0).context("initial.phi")?,
                phi_dot.sample(grid, &b, 0.0).context("initial.phi_dot")?,
            )
            .context("initial data")
        }
        Initial::Psi { .. } => {
            // phi(0) solves L phi = -Re psi, phi'(0) = Im psi / hbar
            let psi = initial_psi(s, sys)?;
            let phi = solve_elliptic(sys, &psi.re().scale(-1.0)).context("initial potential solve")?;
            PhiState::new(phi, psi.im().scale(1.0 / physics.hbar)).context("initial data")
        }
        Initial::Stationary { level, amplitude } => {
            let (e, psi_n) = sys.eigenpairs_small(level + 1).context("initial.level")?.remove(*level);
            stationary_phi(sys, &psi_n.scale(*amplitude), e, 0.0).context("initial.level")
        }
        Initial::Random { modes, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let phi = random_field(grid, &mut rng, *modes, *amplitude);
            let phi_dot = random_field(grid, &mut rng, *modes, *amplitude);
            PhiState::new(phi, phi_dot).context("initial data")
        }
        _ => Err(CliError::Invalid("initial data does not describe a potential".into())),
    }
}

/// Wave vector, unit polarization and transverse direction `n x khat`.
fn plane_wave_geometry(grid: &Grid, mode: [i64; 3], polarization: [f64; 3]) -> Result<([f64; 3], [f64; 3], [f64; 3])> {
    let l = grid.lengths();
    let dims = grid.dims();
    let mut k = [0.0; 3];
    for d in 0..3 {
        if d >= dims && mode[d] != 0 {
            return Err(CliError::invalid_field("initial.mode", "mode along an absent axis"));
        }
        if d < dims {
            k[d] = 2.0 * PI * mode[d] as f64 / l[d];
        }
    }
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let pn = (polarization.iter().map(|p| p * p).sum::<f64>()).sqrt();
    if pn == 0.0 || !pn.is_finite() {
        return Err(CliError::invalid_field("initial.polarization", "must be a nonzero vector"));
    }
    let n = [polarization[0] / pn, polarization[1] / pn, polarization[2] / pn];
    let khat = [k[0] / kn, k[1] / kn, k[2] / kn];
    if (n[0] * khat[0] + n[1] * khat[1] + n[2] * khat[2]).abs() > 1e-12 {
        return Err(CliError::invalid_field("initial.polarization", "must be orthogonal to the wave vector"));
    }
    let u = [
        n[1] * khat[2] - n[2] * khat[1],
        n[2] * khat[0] - n[0] * khat[2],
        n[0] * khat[1] - n[1] * khat[0],
    ];
    Ok((k, n, u))
}

fn initial_fields(s: &Scenario, grid: &Grid, sys: &MaxwellSystem) -> Result<EmState> {
    let physics = s.physics()?;
    match s.initial.as_ref().expect("validated") {
        Initial::Fields { e, b } => EmState::new(sample3(e, grid, physics)?, sample3(b, grid, physics)?).context("initial data"),
        Initial::PlaneWave {
            mode,
            polarization,
            amplitude,
        } => {
            let (k, n, _) = plane_wave_geometry(grid, *mode, *polarization)?;
            plane_wave(grid, sys.c(), k, n, *amplitude, 0.0).context("initial plane wave")
        }
        Initial::Random { modes, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let ops = sys.ops();
            let e = ops.curl(&random_vector(grid, &mut rng, *modes, *amplitude)?).context("initial data")?;
            let b = ops.curl(&random_vector(grid, &mut rng, *modes, *amplitude)?).context("initial data")?;
            EmState::new(e, b).context("initial data")
        }
        _ => Err(CliError::Invalid("initial data does not describe fields".into())),
    }
}

fn initial_potential(s: &Scenario, grid: &Grid, sys: &MaxwellSystem) -> Result<PotentialAState> {
    let physics = s.physics()?;
    match s.initial.as_ref().expect("validated") {
        Initial::Potential { a, a_dot } => {
            PotentialAState::new(sample3(a, grid, physics)?, sample3(a_dot, grid, physics)?).context("initial data")
        }
        Initial::PlaneWave {
            mode,
            polarization,
            amplitude,
        } => {
            // A = (b0/|k|) u sin(k.x), A' = -c b0 u cos(k.x) with u = n x khat
            let (k, _, u) = plane_wave_geometry(grid, *mode, *polarization)?;
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let b0 = *amplitude;
            let c = sys.c();
            let phase = |x: [f64; 3]| k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            let a = VectorField::from_fn(grid, |x| {
                let s = b0 / kn * phase(x).sin();
                [s * u[0], s * u[1], s * u[2]]
            })
            .context("initial data")?;
            let a_dot = VectorField::from_fn(grid, |x| {
                let s = -c * b0 * phase(x).cos();
                [s * u[0], s * u[1], s * u[2]]
            })
            .context("initial data")?;
            PotentialAState::new(a, a_dot).context("initial data")
        }
        Initial::Random { modes, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let a = random_vector(grid, &mut rng, *modes, *amplitude)?;
            let a_dot = sys
                .ops()
                .curl(&random_vector(grid, &mut rng, *modes, *amplitude)?)
                .context("initial data")?;
            PotentialAState::new(a, a_dot).context("initial data")
        }
        _ => Err(CliError::Invalid("initial data does not describe a vector potential".into())),
    }
}

fn relative_drift(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

fn run_schrodinger(s: &Scenario, out: &Path) -> Result<BTreeMap<String, f64>> {
    let physics = s.physics()?;
    let int = s.integrator()?;
    let sys = physics.quantum_system()?;
    let psi0 = initial_psi(s, &sys)?;
    let header = Header::new(s.kind.name(), &["psi_re", "psi_im"], int.method.name(), int.dt, int.stride, &s.hash, physics.clone(), None);
    let mut snaps = SnapshotWriter::create(&out.join(&s.output.snapshots), &header)?;
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &provenance(s, physics, int.dt),
        &["step", "time", "norm", "energy", "norm_drift", "energy_drift"],
    )?;
    let spectrum = match int.method {
        Method::Exact => Some(sys.dense_spectrum().context("dense spectrum")?),
        _ => None,
    };
    let energy = |psi: &ComplexField| sys.hamiltonian_canonical(&psi.re(), &psi.im()).context("energy");
    let n0 = psi0.norm_l2().powi(2);
    let e0 = energy(&psi0)?;
    let mut max = Maxima::new();
    let mut psi = psi0.clone();
    for step in 0..=int.steps {
        let snap_now = step % int.stride == 0;
        let diag_now = is_recorded(step, int.steps, int.diagnostics_stride);
        if step > 0 {
            match &spectrum {
                Some(sp) => {
                    if !(snap_now || diag_now) {
                        continue;
                    }
                    psi = sp.propagate(&psi0, step as f64 * int.dt).context("exact propagator")?;
                }
                None => psi = sys.crank_nicolson_step(&psi, int.dt).context("crank-nicolson step")?,
            }
        }
        let t = step as f64 * int.dt;
        if diag_now {
            let n = psi.norm_l2().powi(2);
            let e = energy(&psi)?;
            let (nd, ed) = (relative_drift(n, n0), relative_drift(e, e0));
            max.record("norm_drift", nd);
            max.record("energy_drift", ed);
            diag.row(step, t, &[n, e, nd, ed])?;
        }
        if snap_now {
            snaps.write_frame(t, &[psi.re().data(), psi.im().data()])?;
        }
    }
    snaps.finish()?;
    diag.finish()?;
    Ok(max.0)
}

fn run_phi(s: &Scenario, out: &Path) -> Result<BTreeMap<String, f64>> {
    let physics = s.physics()?;
    let int = s.integrator()?;
    let sys = physics.quantum_system()?;
    let state0 = initial_phi(s, &sys)?;
    let header = Header::new(s.kind.name(), &["phi", "phi_dot"], int.method.name(), int.dt, int.stride, &s.hash, physics.clone(), None);
    let mut snaps = SnapshotWriter::create(&out.join(&s.output.snapshots), &header)?;
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &provenance(s, physics, int.dt),
        &["step", "time", "norm", "energy", "norm_drift", "energy_drift", "identity"],
    )?;
    let metrics = |st: &PhiState| -> Result<(f64, f64, f64)> {
        let n = to_wavefunction(&sys, st).context("to_wavefunction")?.norm_l2().powi(2);
        let e = energy_density(&sys, st).context("energy density")?.total.integral();
        let id = probability_energy_residual(&sys, st).context("identity")?;
        Ok((n, e, id))
    };
    let (n0, e0, _) = metrics(&state0)?;
    let mut integ = PhiIntegrator::new(&sys, state0, int.dt).context("verlet")?;
    let mut max = Maxima::new();
    for step in 0..=int.steps {
        if step > 0 {
            integ.step().context("verlet step")?;
        }
        let t = step as f64 * int.dt;
        let st = integ.state();
        if is_recorded(step, int.steps, int.diagnostics_stride) {
            let (n, e, id) = metrics(st)?;
            let (nd, ed) = (relative_drift(n, n0), relative_drift(e, e0));
            max.record("norm_drift", nd);
            max.record("energy_drift", ed);
            max.record("identity", id);
            diag.row(step, t, &[n, e, nd, ed, id])?;
        }
        if step % int.stride == 0 {
            snaps.write_frame(t, &[st.phi.data(), st.phi_dot.data()])?;
        }
    }
    snaps.finish()?;
    diag.finish()?;
    Ok(max.0)
}

fn sources_header(s: &Scenario) -> Option<SourcesHeader> {
    s.sources.as_ref().map(|src| SourcesHeader {
        rho: src.rho.clone(),
        j: src.j.clone(),
    })
}

fn vector_data(v: &VectorField) -> [&[f64]; 3] {
    let [x, y, z] = v.components();
    [x.data(), y.data(), z.data()]
}

fn run_fields(s: &Scenario, out: &Path) -> Result<BTreeMap<String, f64>> {
    let physics = s.physics()?;
    let int = s.integrator()?;
    let grid = physics.grid()?;
    let sys = physics.maxwell_system()?;
    let src = &s.sources.as_ref().expect("validated").spec;
    let k_max = sys.ops().max_wavenumber(&grid);
    let state0 = initial_fields(s, &grid, &sys)?;
    let header = Header::new(
        s.kind.name(),
        &["ex", "ey", "ez", "bx", "by", "bz"],
        int.method.name(),
        int.dt,
        int.stride,
        &s.hash,
        physics.clone(),
        sources_header(s),
    );
    let mut snaps = SnapshotWriter::create(&out.join(&s.output.snapshots), &header)?;
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &provenance(s, physics, int.dt),
        &[
            "step",
            "time",
            "energy",
            "hamiltonian",
            "energy_drift",
            "div_e_residual",
            "div_b",
            "constraint_scale",
            "constraint",
            "w_residual",
        ],
    )?;
    let j0 = src.current(&grid, 0.0).context("sources.j")?;
    let (_, h0) = sys.em_hamiltonians(&state0, Some(&j0)).context("hamiltonian")?;
    let mut max = Maxima::new();
    let mut state = state0;
    for step in 0..=int.steps {
        let t = step as f64 * int.dt;
        if step > 0 {
            state = sys.rk4_step(&state, src, t - int.dt, int.dt).context("rk4 step")?;
        }
        if is_recorded(step, int.steps, int.diagnostics_stride) {
            let rho = src.rho(&grid, t).context("sources.rho")?;
            let j = src.current(&grid, t).context("sources.j")?;
            let (h, hp) = sys.em_hamiltonians(&state, Some(&j)).context("hamiltonian")?;
            let (div_e, div_b) = sys.constraint_residual(&state, &rho).context("constraints")?;
            let scale = k_max * state.e.norm_max().max(state.b.norm_max()) + rho.norm_max();
            let constraint = if scale > 0.0 { div_e.max(div_b) / scale } else { div_e.max(div_b) };
            let (w, w_scale) = sys.w_residual(&state, src, t).context("w residual")?;
            let w_rel = if w_scale > 0.0 { w / w_scale } else { w };
            let ed = relative_drift(hp, h0);
            max.record("energy_drift", ed);
            max.record("constraint", constraint);
            max.record("div_b", div_b);
            max.record("w_residual", w_rel);
            diag.row(step, t, &[hp, h, ed, div_e, div_b, scale, constraint, w_rel])?;
        }
        if step % int.stride == 0 {
            let [ex, ey, ez] = vector_data(&state.e);
            let [bx, by, bz] = vector_data(&state.b);
            snaps.write_frame(t, &[ex, ey, ez, bx, by, bz])?;
        }
    }
    snaps.finish()?;
    diag.finish()?;
    Ok(max.0)
}

fn run_potential(s: &Scenario, out: &Path) -> Result<BTreeMap<String, f64>> {
    let physics = s.physics()?;
    let int = s.integrator()?;
    let grid = physics.grid()?;
    let sys = physics.maxwell_system()?;
    let src = &s.sources.as_ref().expect("validated").spec;
    let k_max = sys.ops().max_wavenumber(&grid);
    let state0 = initial_potential(s, &grid, &sys)?;
    let header = Header::new(
        s.kind.name(),
        &["ax", "ay", "az", "ax_dot", "ay_dot", "az_dot"],
        int.method.name(),
        int.dt,
        int.stride,
        &s.hash,
        physics.clone(),
        sources_header(s),
    );
    let mut snaps = SnapshotWriter::create(&out.join(&s.output.snapshots), &header)?;
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &provenance(s, physics, int.dt),
        &["step", "time", "energy", "energy_drift", "div_b", "a_constraint", "constraint_scale", "constraint"],
    )?;
    let fields0 = sys.a_to_fields(&state0).context("a_to_fields")?;
    let (_, h0) = sys.em_hamiltonians(&fields0, None).context("hamiltonian")?;
    let mut integ = PotentialIntegrator::new(sys, state0, src, 0.0, int.dt).context("verlet")?;
    let mut max = Maxima::new();
    for step in 0..=int.steps {
        if step > 0 {
            integ.step().context("verlet step")?;
        }
        let t = step as f64 * int.dt;
        let st = integ.state();
        if is_recorded(step, int.steps, int.diagnostics_stride) {
            let fields = sys.a_to_fields(st).context("a_to_fields")?;
            let (_, hp) = sys.em_hamiltonians(&fields, None).context("hamiltonian")?;
            let div_b = sys.ops().divergence(&fields.b).context("div B")?.norm_max();
            let rho = src.rho(&grid, t).context("sources.rho")?;
            let residual = sys.a_constraint_residual(st, &rho).context("constraint")?;
            let scale = sys.c() * rho.norm_max() + k_max * st.a_dot.norm_max();
            let constraint = if scale > 0.0 { residual / scale } else { residual };
            let ed = relative_drift(hp, h0);
            max.record("energy_drift", ed);
            max.record("constraint", constraint);
            max.record("div_b", div_b);
            diag.row(step, t, &[hp, ed, div_b, residual, scale, constraint])?;
        }
        if step % int.stride == 0 {
            let [ax, ay, az] = vector_data(&st.a);
            let [dx, dy, dz] = vector_data(&st.a_dot);
            snaps.write_frame(t, &[ax, ay, az, dx, dy, dz])?;
        }
    }
    snaps.finish()?;
    diag.finish()?;
    Ok(max.0)
}

fn scalar(grid: &Grid, data: &[f64]) -> Result<ScalarField> {
    ScalarField::new(grid.clone(), data.to_vec()).context("snapshot frame")
}

fn vector(grid: &Grid, data: &[Vec<f64>], idx: &[usize]) -> Result<VectorField> {
    VectorField::new(scalar(grid, &data[idx[0]])?, scalar(grid, &data[idx[1]])?, scalar(grid, &data[idx[2]])?)
        .context("snapshot frame")
}

fn input_trajectory(s: &Scenario) -> Result<(PathBuf, Snapshot)> {
    let path = s.input.clone().ok_or_else(|| CliError::MissingField("input.trajectory".into()))?;
    let snap = Snapshot::read(&path)?;
    if snap.frames.len() < 2 {
        return Err(CliError::Snapshot {
            path,
            message: "a trajectory needs at least two frames".into(),
        });
    }
    Ok((path, snap))
}

fn run_reconstruct_phi(s: &Scenario, out: &Path) -> Result<BTreeMap<String, f64>> {
    let (path, snap) = input_trajectory(s)?;
    let idx = snap.require_fields(&path, &["psi_re", "psi_im"])?;
    let physics = snap.header.physics.clone();
    let sys = physics.quantum_system()?;
    let grid = sys.grid().clone();
    let psis = snap
        .frames
        .iter()
        .map(|f| {
            ComplexField::from_parts(&scalar(&grid, &f.fields[idx[0]])?, &scalar(&grid, &f.fields[idx[1]])?)
                .context("snapshot frame")
        })
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory::new(snap.times(), psis).context("input trajectory")?;
    let rec = reconstruct_phi(&sys, &traj).context("reconstruct_phi")?;
    let dt = traj.dt();
    let states = rec.states.snapshots();
    let header = Header::new(s.kind.name(), &["phi", "phi_dot"], "trapezoid", dt, 1, &s.hash, physics.clone(), None);
    let mut snaps = SnapshotWriter::create(&out.join(&s.output.snapshots), &header)?;
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &provenance(s, &physics, dt),
        &["frame", "time", "closure_l2", "equation_residual"],
    )?;
    let hbar = physics.hbar;
    let n = states.len();
    let mut max = Maxima::new();
    let mut last_closure = 0.0;
    for (i, (st, psi)) in states.iter().zip(traj.snapshots()).enumerate() {
        let t = traj.times()[i];
        let closure = to_wavefunction(&sys, st).context("to_wavefunction")?.sub(psi).context("closure")?.norm_l2();
        // second time derivative by central differences, one-sided at the ends
        let phi = |j: usize| &states[j].phi;
        let ddot = if n >= 4 && (i == 0 || i == n - 1) {
            let (a, b, c, d) = if i == 0 { (0, 1, 2, 3) } else { (n - 1, n - 2, n - 3, n - 4) };
            phi(a)
                .lin_comb(2.0, phi(b), -5.0)
                .and_then(|x| x.lin_comb(1.0, phi(c), 4.0))
                .and_then(|x| x.lin_comb(1.0, phi(d), -1.0))
        } else {
            let m = i.clamp(1, n - 2);
            phi(m - 1).lin_comb(1.0, phi(m + 1), 1.0).and_then(|x| x.lin_comb(1.0, phi(m), -2.0))
        }
        .context("second difference")?
        .scale(1.0 / (dt * dt));
        let residual = equation_residual(&sys, &st.phi, &ddot).context("equation residual")?;
        let scale = sys
            .wave_operator(&sys.wave_operator(&st.phi).context("wave operator")?)
            .context("wave operator")?
            .norm_max()
            .max(hbar * hbar * ddot.norm_max());
        let eq = if scale > 0.0 { residual.norm_max() / scale } else { residual.norm_max() };
        max.record("closure", closure);
        max.record("equation", eq);
        last_closure = closure;
        diag.row(i, t, &[closure, eq])?;
        snaps.write_frame(t, &[st.phi.data(), st.phi_dot.data()])?;
    }
    snaps.finish()?;
    diag.finish()?;
    let mut summary = max.0;
    summary.insert("final_closure_l2".into(), last_closure);
    summary.insert("quadrature_error".into(), rec.quadrature_error);
    summary.insert("elliptic_error".into(), rec.elliptic_error);
    summary.insert("elliptic_residual".into(), rec.elliptic_residual);
    summary.insert("closure_budget".into(), 5.0 * (rec.quadrature_error + rec.elliptic_error));
    Ok(summary)
}

fn run_reconstruct_a(s: &Scenario, out: &Path) -> Result<BTreeMap<String, f64>> {
    let (path, snap) = input_trajectory(s)?;
    let idx = snap.require_fields(&path, &["ex", "ey", "ez", "bx", "by", "bz"])?;
    let physics = snap.header.physics.clone();
    let sys = physics.maxwell_system()?;
    let grid = physics.grid()?;
    let fields = snap
        .frames
        .iter()
        .map(|f| EmState::new(vector(&grid, &f.fields, &idx[..3])?, vector(&grid, &f.fields, &idx[3..])?).context("snapshot frame"))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory::new(snap.times(), fields).context("input trajectory")?;
    let rec = reconstruct_a(&sys, &traj).context("reconstruct_A")?;
    let dt = traj.dt();
    let header = Header::new(
        s.kind.name(),
        &["ax", "ay", "az", "ax_dot", "ay_dot", "az_dot"],
        "trapezoid",
        dt,
        1,
        &s.hash,
        physics.clone(),
        snap.header.sources.clone(),
    );
    let mut snaps = SnapshotWriter::create(&out.join(&s.output.snapshots), &header)?;
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &provenance(s, &physics, dt),
        &["frame", "time", "field_error", "div_a"],
    )?;
    let mut max = Maxima::new();
    let mut last = 0.0;
    for (i, (st, f)) in rec.states.snapshots().iter().zip(traj.snapshots()).enumerate() {
        let t = traj.times()[i];
        let mapped = sys.a_to_fields(st).context("a_to_fields")?;
        let norm = f.norm_l2();
        let err = mapped.sub(f).context("field error")?.norm_l2();
        let rel = if norm > 0.0 { err / norm } else { err };
        let div_a = sys.ops().divergence(&st.a).context("div A")?.norm_max();
        max.record("closure", rel);
        last = rel;
        diag.row(i, t, &[rel, div_a])?;
        let [ax, ay, az] = vector_data(&st.a);
        let [dx, dy, dz] = vector_data(&st.a_dot);
        snaps.write_frame(t, &[ax, ay, az, dx, dy, dz])?;
    }
    snaps.finish()?;
    diag.finish()?;
    let mut summary = max.0;
    summary.insert("final_field_error".into(), last);
    summary.insert("quadrature_error".into(), rec.quadrature_error);
    Ok(summary)
}

const PHI_FIELDS: [&str; 2] = ["phi", "phi_dot"];
const PSI_FIELDS: [&str; 2] = ["psi_re", "psi_im"];
const A_FIELDS: [&str; 6] = ["ax", "ay", "az", "ax_dot", "ay_dot", "az_dot"];
const EM_FIELDS: [&str; 6] = ["ex", "ey", "ez", "bx", "by", "bz"];

/// Applies `transform` to every frame, returning the new field names and data.
/// Field data of every frame: one sample vector per field.
type FrameData = Vec<Vec<Vec<f64>>>;

fn transform_frames(path: &Path, snap: &Snapshot, transform: Transform) -> Result<(Vec<String>, FrameData)> {
    let physics = &snap.header.physics;
    let grid = physics.grid()?;
    match transform {
        Transform::None => Ok((snap.header.fields.clone(), snap.frames.iter().map(|f| f.fields.clone()).collect())),
        Transform::PhiToPsi => {
            let idx = snap.require_fields(path, &PHI_FIELDS)?;
            let sys = physics.quantum_system()?;
            let frames = snap
                .frames
                .iter()
                .map(|f| {
                    let st = PhiState::new(scalar(&grid, &f.fields[idx[0]])?, scalar(&grid, &f.fields[idx[1]])?)
                        .context("snapshot frame")?;
                    let psi = to_wavefunction(&sys, &st).context("to_wavefunction")?;
                    Ok(vec![psi.re().into_data(), psi.im().into_data()])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((PSI_FIELDS.iter().map(|s| s.to_string()).collect(), frames))
        }
        Transform::AToFields => {
            let idx = snap.require_fields(path, &A_FIELDS)?;
            let sys = physics.maxwell_system()?;
            let frames = snap
                .frames
                .iter()
                .map(|f| {
                    let st = PotentialAState::new(vector(&grid, &f.fields, &idx[..3])?, vector(&grid, &f.fields, &idx[3..])?)
                        .context("snapshot frame")?;
                    let em = sys.a_to_fields(&st).context("a_to_fields")?;
                    let [ex, ey, ez] = em.e.into_components();
                    let [bx, by, bz] = em.b.into_components();
                    Ok([ex, ey, ez, bx, by, bz].into_iter().map(ScalarField::into_data).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((EM_FIELDS.iter().map(|s| s.to_string()).collect(), frames))
        }
    }
}

fn transform_sources(t: Transform) -> &'static [&'static str] {
    match t {
        Transform::None => &[],
        Transform::PhiToPsi => &PHI_FIELDS,
        Transform::AToFields => &A_FIELDS,
    }
}

fn run_compare(s: &Scenario, out: &Path) -> Result<(BTreeMap<String, f64>, Vec<String>)> {
    let spec = s.compare.as_ref().ok_or_else(|| CliError::MissingField("compare".into()))?;
    let a = Snapshot::read(&spec.a)?;
    let b = Snapshot::read(&spec.b)?;
    let (pa, pb) = (&a.header.physics, &b.header.physics);
    if pa.points != pb.points || pa.lengths != pb.lengths {
        return Err(CliError::Invalid("compared runs live on different grids".into()));
    }
    // the transform applies to every side that carries its source fields
    let has = |snap: &Snapshot| transform_sources(spec.transform).iter().all(|f| snap.header.field_index(f).is_some());
    let pick = |snap: &Snapshot| if has(snap) { spec.transform } else { Transform::None };
    let (ta, tb) = (pick(&a), pick(&b));
    if spec.transform != Transform::None && ta == Transform::None && tb == Transform::None {
        return Err(CliError::Invalid(format!(
            "transform {} needs fields {} in one of the runs",
            spec.transform.name(),
            transform_sources(spec.transform).join(", ")
        )));
    }
    let (names_a, frames_a) = transform_frames(&spec.a, &a, ta)?;
    let (names_b, frames_b) = transform_frames(&spec.b, &b, tb)?;
    if names_a != names_b {
        return Err(CliError::Invalid(format!(
            "field sets differ after transform: [{}] vs [{}]",
            names_a.join(", "),
            names_b.join(", ")
        )));
    }
    if frames_a.len() != frames_b.len() {
        return Err(CliError::Invalid(format!("frame counts differ: {} vs {}", frames_a.len(), frames_b.len())));
    }
    let spacing = a.frame_dt().max(b.frame_dt());
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        if (fa.time - fb.time).abs() > 1e-9 * spacing {
            return Err(CliError::Invalid(format!("frame times differ: {} vs {}", fa.time, fb.time)));
        }
    }
    let grid = pa.grid()?;
    let dv = grid.cell_volume();
    let mut diag = DiagnosticsWriter::create(
        &out.join(&s.output.diagnostics),
        &[
            ("kind", s.kind.name().to_string()),
            ("scenario_sha256", s.hash.clone()),
            ("a", spec.a.display().to_string()),
            ("b", spec.b.display().to_string()),
            ("transform", spec.transform.name().to_string()),
            ("version", env!("CARGO_PKG_VERSION").to_string()),
        ],
        &["frame", "time", "l2", "max", "l2_relative"],
    )?;
    let mut table = vec![format!("{:>6}  {:>14}  {:>14}  {:>14}", "frame", "time", "L2", "max")];
    let mut max = Maxima::new();
    let mut last = 0.0;
    for (i, ((fa, fb), frame)) in frames_a.iter().zip(&frames_b).zip(&a.frames).enumerate() {
        let (mut sq, mut mx, mut ref_sq) = (0.0f64, 0.0f64, 0.0f64);
        for (xa, xb) in fa.iter().zip(fb) {
            for (va, vb) in xa.iter().zip(xb) {
                let d = va - vb;
                sq += d * d;
                mx = mx.max(d.abs());
                ref_sq += va * va;
            }
        }
        let l2 = (sq * dv).sqrt();
        let reference = (ref_sq * dv).sqrt();
        let rel = if reference > 0.0 { l2 / reference } else { l2 };
        max.record("difference", l2);
        max.record("max_abs", mx);
        max.record("l2_relative", rel);
        last = l2;
        diag.row(i, frame.time, &[l2, mx, rel])?;
        table.push(format!("{i:>6}  {:>14.6e}  {l2:>14.6e}  {mx:>14.6e}", frame.time));
    }
    diag.finish()?;
    let mut summary = max.0;
    summary.insert("final_l2".into(), last);
    summary.insert("frames".into(), frames_a.len() as f64);
    Ok((summary, table))
}

/// Writes every frame of a snapshot as CSV rows
/// `frame,time,x,y,z,<fields...>`; `frame` restricts to one frame.
pub fn dump(input: &Path, output: &Path, frame: Option<usize>) -> Result<()> {
    use std::io::Write;

    let snap = Snapshot::read(input)?;
    let grid = snap.header.physics.grid()?;
    if let Some(f) = frame {
        if f >= snap.frames.len() {
            return Err(CliError::Invalid(format!("frame {f} out of range ({} frames)", snap.frames.len())));
        }
    }
    let file = std::fs::File::create(output).map_err(|e| CliError::io(output, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| CliError::io(output, e);
    writeln!(w, "frame,time,x,y,z,{}", snap.header.fields.join(",")).map_err(io)?;
    for (i, fr) in snap.frames.iter().enumerate() {
        if frame.is_some_and(|f| f != i) {
            continue;
        }
        for p in 0..grid.len() {
            let [x, y, z] = grid.coordinates(p);
            write!(w, "{i},{:e},{x:e},{y:e},{z:e}", fr.time).map_err(io)?;
            for f in &fr.fields {
                write!(w, ",{:e}", f[p]).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

