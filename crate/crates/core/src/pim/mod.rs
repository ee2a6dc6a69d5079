//! Precise integration of `M ü + K u = f(t)` in state space.
//!
//! With `z = [u; u̇]` the system reads `ż = H z + F(t)`. The propagator
//! `T = exp(Hτ)` is built by `2^N`-fold squaring of a Taylor increment that
//! is kept apart from the identity, and harmonic load segments are stepped
//! exactly through their closed-form particular solutions.

mod newmark;

pub use newmark::Newmark;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, LU};

use crate::signal::{Snapshot, WaveRecord};
use crate::{Error, Result};

/// Condition estimate above which `(ω² I + H²)` is treated as resonant.
pub const RESONANCE_CONDITION: f64 = 1e12;

/// First-order form of the undamped semi-discrete system.
#[derive(Debug, Clone)]
pub struct StateSystem {
    /// Displacement DOF count `n`; the state has `2n` entries.
    pub n: usize,
    /// `H = [0 I; −M⁻¹K 0]`.
    pub h: DMatrix<f64>,
    /// `M⁻¹ K`.
    pub dynamic: DMatrix<f64>,
    /// State-space image `[0; M⁻¹ e_f]` of a unit force at the force DOF.
    pub load: Option<DVector<f64>>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

/// Lifts `(M, K)` to state space. `M⁻¹` is applied by Cholesky solves.
pub fn build_state(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    force_dof: Option<usize>,
) -> Result<StateSystem> {
    let n = mass.nrows();
    if mass.ncols() != n || stiffness.shape() != (n, n) {
        return Err(Error::Parameter("mass and stiffness must be square and equal-sized".into()));
    }
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix factorization failed (not SPD)".into()))?;
    let dynamic = chol.solve(stiffness);

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, n), (n, n)).fill_with_identity();
    h.view_mut((n, 0), (n, n)).copy_from(&(-&dynamic));

    let load = match force_dof {
        Some(f) if f < n => {
            let mut e = DVector::zeros(n);
            e[f] = 1.0;
            let mut v = DVector::zeros(2 * n);
            v.rows_mut(n, n).copy_from(&chol.solve(&e));
            Some(v)
        }
        Some(f) => {
            return Err(Error::Parameter(format!("force DOF {f} out of range for {n} DOFs")))
        }
        None => None,
    };

    Ok(StateSystem {
        n,
        h,
        dynamic,
        load,
        mass: mass.clone(),
        stiffness: stiffness.clone(),
    })
}

impl StateSystem {
    /// `H²`, which for this block structure is `diag(−M⁻¹K, −M⁻¹K)`.
    pub fn h_squared(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut h2 = DMatrix::zeros(2 * n, 2 * n);
        h2.view_mut((0, 0), (n, n)).copy_from(&(-&self.dynamic));
        h2.view_mut((n, n), (n, n)).copy_from(&(-&self.dynamic));
        h2
    }

    /// Mechanical energy `½ u̇ᵀ M u̇ + ½ uᵀ K u` of state `z`.
    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        let u = z.rows(0, self.n);
        let v = z.rows(self.n, self.n);
        0.5 * (v.dot(&(&self.mass * v)) + u.dot(&(&self.stiffness * u)))
    }

    /// Unit-force load vector; errors if the system was built without one.
    pub fn unit_load(&self) -> Result<&DVector<f64>> {
        self.load
            .as_ref()
            .ok_or_else(|| Error::Parameter("state system has no force DOF".into()))
    }
}

/// `T = exp(Hτ)` together with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub tau: f64,
    pub squarings: u32,
    pub t: DMatrix<f64>,
}

impl Propagator {
    /// `2^N`, the number of sub-steps folded into one macro step.
    pub fn two_pow_n(&self) -> f64 {
        2f64.powi(self.squarings as i32)
    }
}

/// Precise matrix exponential `exp(Hτ)`.
///
/// The increment `T_a = exp(HΔt) − I` with `Δt = τ / 2^N` is seeded by a
/// fourth-order Taylor polynomial and doubled `N` times through
/// `T_a ← 2 T_a + T_a²`. The identity is added only at the very end.
pub fn precise_expm(h: &DMatrix<f64>, tau: f64, squarings: u32) -> Result<Propagator> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("time step must be positive, got {tau}")));
    }
    if !(1..=40).contains(&squarings) {
        return Err(Error::Parameter(format!(
            "squaring count must be in [1, 40], got {squarings}"
        )));
    }
    let n = h.nrows();
    let dt = tau / 2f64.powi(squarings as i32);
    let a = h * dt;
    let a2 = &a * &a;
    let mut inner = &a2 * (1.0 / 12.0) + &a * (1.0 / 3.0);
    for i in 0..n {
        inner[(i, i)] += 1.0;
    }
    let mut ta = &a + (&a2 * inner) * 0.5;

    let mut scratch = DMatrix::zeros(n, n);
    for _ in 0..squarings {
        scratch.gemm(1.0, &ta, &ta, 0.0);
        scratch += &ta * 2.0;
        std::mem::swap(&mut ta, &mut scratch);
    }

    if ta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "precise expm produced non-finite entries (max |HΔt| = {:.3e})",
            a.amax()
        )));
    }
    for i in 0..n {
        ta[(i, i)] += 1.0;
    }
    Ok(Propagator {
        tau,
        squarings,
        t: ta,
    })
}

/// A harmonic load component `F(t) = r₁ sin ωt + r₂ cos ωt` active on
/// `[t_on, t_off]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSegment {
    pub r1: DVector<f64>,
    pub r2: DVector<f64>,
    pub omega: f64,
    pub t_on: f64,
    pub t_off: f64,
}

impl HarmonicSegment {
    pub fn new(r1: DVector<f64>, r2: DVector<f64>, omega: f64, t_on: f64, t_off: f64) -> Result<Self> {
        if !(t_on < t_off) {
            return Err(Error::Parameter(format!(
                "segment window must satisfy t_on < t_off, got [{t_on}, {t_off}]"
            )));
        }
        if r1.len() != r2.len() {
            return Err(Error::Parameter("segment amplitude vectors differ in length".into()));
        }
        Ok(Self {
            r1,
            r2,
            omega,
            t_on,
            t_off,
        })
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        &self.r1 * (self.omega * t).sin() + &self.r2 * (self.omega * t).cos()
    }
}

/// Factorized `(ω² I + H²)` for one forcing frequency.
pub struct ShiftedSolver {
    omega: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    norm1: f64,
    pivot_condition: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl ShiftedSolver {
    pub fn new(h_squared: &DMatrix<f64>, omega: f64) -> Result<Self> {
        let mut s = h_squared.clone();
        for i in 0..s.nrows() {
            s[(i, i)] += omega * omega;
        }
        let norm1 = norm1(&s);
        let lu = s.lu();
        let u = lu.u();
        let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let pivot_condition = if min == 0.0 {
            f64::INFINITY
        } else {
            u.amax() / min
        };
        let solver = Self {
            omega,
            lu,
            norm1,
            pivot_condition,
        };
        if !solver.pivot_condition.is_finite() || solver.pivot_condition > RESONANCE_CONDITION {
            return Err(solver.resonance(solver.pivot_condition));
        }
        // Refine with a solve-based lower bound on ‖S⁻¹‖₁.
        let n = h_squared.nrows();
        let probe = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let cond = solver.condition_with(&probe)?;
        if cond > RESONANCE_CONDITION {
            return Err(solver.resonance(cond));
        }
        Ok(solver)
    }

    fn resonance(&self, condition: f64) -> Error {
        Error::Resonance {
            omega: self.omega,
            condition,
        }
    }

    fn condition_with(&self, probe: &DVector<f64>) -> Result<f64> {
        let x = self.solve(probe)?;
        let inv_norm = x.lp_norm(1) / probe.lp_norm(1);
        Ok((self.norm1 * inv_norm).max(self.pivot_condition))
    }

    fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self
            .lu
            .solve(b)
            .ok_or_else(|| self.resonance(f64::INFINITY))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(self.resonance(f64::INFINITY));
        }
        Ok(x)
    }

    /// `C₁ = S⁻¹(H r₁ − ω r₂)`, `C₂ = S⁻¹(H r₂ + ω r₁)`.
    pub fn coefficients(
        &self,
        h: &DMatrix<f64>,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let w = self.omega;
        let b1 = h * r1 - r2 * w;
        let b2 = h * r2 + r1 * w;
        let c1 = self.solve(&b1)?;
        let c2 = self.solve(&b2)?;
        let mut inv_norm: f64 = 0.0;
        for (x, b) in [(&c1, &b1), (&c2, &b2)] {
            let bn = b.lp_norm(1);
            if bn > 0.0 {
                inv_norm = inv_norm.max(x.lp_norm(1) / bn);
            }
        }
        let cond = self.norm1 * inv_norm;
        if cond > RESONANCE_CONDITION {
            return Err(self.resonance(cond));
        }
        Ok((c1, c2))
    }
}

/// Duhamel coefficients for a harmonic load on a general `H`.
pub fn duhamel_coeffs(
    h: &DMatrix<f64>,
    omega: f64,
    r1: &DVector<f64>,
    r2: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let h2 = h * h;
    ShiftedSolver::new(&h2, omega)?.coefficients(h, r1, r2)
}

/// A segment with its cached coefficients.
#[derive(Debug, Clone)]
pub struct PreparedSegment {
    pub segment: HarmonicSegment,
    pub c1: DVector<f64>,
    pub c2: DVector<f64>,
}

impl PreparedSegment {
    /// `C₁ sin ωt + C₂ cos ωt`.
    fn particular(&self, t: f64) -> DVector<f64> {
        let wt = self.segment.omega * t;
        &self.c1 * wt.sin() + &self.c2 * wt.cos()
    }

    fn covers(&self, t0: f64, t1: f64, slack: f64) -> Result<bool> {
        let s = &self.segment;
        let inside = t0 >= s.t_on - slack && t1 <= s.t_off + slack;
        let outside = t1 <= s.t_on + slack || t0 >= s.t_off - slack;
        if !inside && !outside {
            return Err(Error::Parameter(format!(
                "step [{t0}, {t1}] straddles segment boundary [{}, {}]; align the time step",
                s.t_on, s.t_off
            )));
        }
        Ok(inside)
    }
}

/// Computes coefficients for a whole schedule, factorizing once per distinct ω.
pub fn prepare_schedule(sys: &StateSystem, schedule: &[HarmonicSegment]) -> Result<Vec<PreparedSegment>> {
    let mut solvers: HashMap<u64, ShiftedSolver> = HashMap::new();
    let mut h2 = None;
    let mut out = Vec::with_capacity(schedule.len());
    for seg in schedule {
        if seg.r1.len() != 2 * sys.n {
            return Err(Error::Parameter(format!(
                "segment has {} entries, state has {}",
                seg.r1.len(),
                2 * sys.n
            )));
        }
        let key = seg.omega.to_bits();
        if !solvers.contains_key(&key) {
            let h2 = h2.get_or_insert_with(|| sys.h_squared());
            solvers.insert(key, ShiftedSolver::new(h2, seg.omega)?);
        }
        let (c1, c2) = solvers[&key].coefficients(&sys.h, &seg.r1, &seg.r2)?;
        out.push(PreparedSegment {
            segment: seg.clone(),
            c1,
            c2,
        });
    }
    Ok(out)
}

/// One macro step under the segments active on `[t_k, t_k + τ]`:
/// `z_{k+1} = T[z_k + Σ P(t_k)] − Σ P(t_{k+1})`.
pub fn step_harmonic(
    prop: &Propagator,
    segments: &[PreparedSegment],
    z: &DVector<f64>,
    t_k: f64,
) -> Result<DVector<f64>> {
    let t_next = t_k + prop.tau;
    let slack = 1e-9 * prop.tau;
    let mut y = z.clone();
    let mut after = DVector::zeros(z.len());
    for seg in segments {
        if seg.covers(t_k, t_next, slack)? {
            y += seg.particular(t_k);
            after += seg.particular(t_next);
        }
    }
    Ok(&prop.t * y - after)
}

/// Steps a state system forward, `z_k` at `t_k = k τ`.
pub struct Integrator<'a> {
    prop: &'a Propagator,
    segments: Vec<PreparedSegment>,
    pub step: usize,
    pub z: DVector<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(
        sys: &StateSystem,
        prop: &'a Propagator,
        schedule: &[HarmonicSegment],
        z0: DVector<f64>,
    ) -> Result<Self> {
        if z0.len() != 2 * sys.n || prop.t.nrows() != 2 * sys.n {
            return Err(Error::Parameter("state and propagator sizes differ".into()));
        }
        Ok(Self {
            prop,
            segments: prepare_schedule(sys, schedule)?,
            step: 0,
            z: z0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.prop.tau
    }

    pub fn advance(&mut self) -> Result<&DVector<f64>> {
        let t_k = self.time();
        let next = step_harmonic(self.prop, &self.segments, &self.z, t_k)?;
        self.step += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: self.step });
        }
        self.z = next;
        Ok(&self.z)
    }
}

/// A displacement DOF recorded every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub label: String,
    pub dof: usize,
}

/// A nodal field captured in snapshots; `None` marks a constrained DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProbe {
    pub name: String,
    pub x: Vec<f64>,
    pub dofs: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Probes {
    pub sensors: Vec<Sensor>,
    pub fields: Vec<FieldProbe>,
}

/// Maps requested times onto step indices, snapping to the nearest step.
pub(crate) fn snapshot_steps(times: &[f64], dt: f64, n_steps: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for &t in times {
        let k = (t / dt).round();
        if k < 0.0 || k as usize > n_steps {
            log::warn!("snapshot time {t} s lies outside the simulated window; skipped");
            continue;
        }
        if (k * dt - t).abs() > 1e-9 * dt {
            log::warn!("snapshot time {t} s snapped to step {k} ({} s)", k * dt);
        }
        out.push((k as usize, t));
    }
    out
}

pub(crate) fn capture(fields: &[FieldProbe], u: &[f64], time: f64) -> Vec<Snapshot> {
    fields
        .iter()
        .map(|f| Snapshot {
            time,
            field: f.name.clone(),
            x: f.x.clone(),
            values: f.dofs.iter().map(|d| d.map_or(0.0, |i| u[i])).collect(),
        })
        .collect()
}

/// Runs from `z = 0` to `t_end`, recording sensors every step and field
/// snapshots at the requested times. After the last segment the state
/// moves freely under `T`.
pub fn simulate(
    sys: &StateSystem,
    prop: &Propagator,
    schedule: &[HarmonicSegment],
    t_end: f64,
    probes: &Probes,
    snapshot_times: &[f64],
) -> Result<WaveRecord> {
    if !(t_end >= 0.0) {
        return Err(Error::Parameter(format!("end time must be non-negative, got {t_end}")));
    }
    let dt = prop.tau;
    let n_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    for s in &probes.sensors {
        if s.dof >= sys.n {
            return Err(Error::Parameter(format!("sensor DOF {} out of range", s.dof)));
        }
    }
    let snaps = snapshot_steps(snapshot_times, dt, n_steps);

    let mut integ = Integrator::new(sys, prop, schedule, DVector::zeros(2 * sys.n))?;
    let mut series: Vec<Vec<f64>> = probes
        .sensors
        .iter()
        .map(|_| Vec::with_capacity(n_steps + 1))
        .collect();
    let mut snapshots = Vec::new();

    let mut record_step = |k: usize, z: &DVector<f64>, series: &mut Vec<Vec<f64>>| {
        for (s, out) in probes.sensors.iter().zip(series.iter_mut()) {
            out.push(z[s.dof]);
        }
        for &(_, t) in snaps.iter().filter(|(sk, _)| *sk == k) {
            snapshots.extend(capture(&probes.fields, &z.as_slice()[..sys.n], t));
        }
    };

    record_step(0, &integ.z, &mut series);
    for k in 1..=n_steps {
        record_step(k, integ.advance()?, &mut series);
    }

    Ok(WaveRecord {
        dt,
        labels: probes.sensors.iter().map(|s| s.label.clone()).collect(),
        series,
        excitation: Vec::new(),
        snapshots,
    })
}
