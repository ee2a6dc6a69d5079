//! Newmark-β reference integrator.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{capture, snapshot_steps, Probes};
use crate::signal::WaveRecord;
use crate::{Error, Result};

/// Newmark-β with a prefactored effective stiffness `K + M / (β Δt²)`.
pub struct Newmark {
    pub dt: f64,
    pub beta: f64,
    pub gamma: f64,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    mass_chol: Cholesky<f64, Dyn>,
    effective: Cholesky<f64, Dyn>,
}

impl Newmark {
    pub fn new(
        mass: &DMatrix<f64>,
        stiffness: &DMatrix<f64>,
        dt: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        if !(beta > 0.0) {
            return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
        }
        let mass_chol = mass
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("mass matrix factorization failed".into()))?;
        let effective = (stiffness + mass * (1.0 / (beta * dt * dt)))
            .cholesky()
            .ok_or_else(|| Error::Numerical("effective stiffness factorization failed".into()))?;
        Ok(Self {
            dt,
            beta,
            gamma,
            mass: mass.clone(),
            stiffness: stiffness.clone(),
            mass_chol,
            effective,
        })
    }

    /// Average-acceleration scheme (β = 1/4, γ = 1/2).
    pub fn average_acceleration(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>, dt: f64) -> Result<Self> {
        Self::new(mass, stiffness, dt, 0.25, 0.5)
    }

    /// Initial acceleration consistent with `(u₀, f₀)`.
    pub fn initial_acceleration(&self, u: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
        self.mass_chol.solve(&(f - &self.stiffness * u))
    }

    /// Advances `(u, v, a)` by one step given the load at the new time.
    pub fn step(
        &self,
        u: &mut DVector<f64>,
        v: &mut DVector<f64>,
        a: &mut DVector<f64>,
        f_next: &DVector<f64>,
    ) {
        let (dt, b, g) = (self.dt, self.beta, self.gamma);
        let c0 = 1.0 / (b * dt * dt);
        let c1 = 1.0 / (b * dt);
        let c2 = 1.0 / (2.0 * b) - 1.0;
        let history = &*u * c0 + &*v * c1 + &*a * c2;
        let u_next = self.effective.solve(&(f_next + &self.mass * history));
        let a_next = (&u_next - &*u) * c0 - &*v * c1 - &*a * c2;
        *v += (&*a * (1.0 - g) + &a_next * g) * dt;
        *u = u_next;
        *a = a_next;
    }

    /// Runs from rest with load `direction · amplitude(t)`.
    pub fn simulate(
        &self,
        direction: &DVector<f64>,
        amplitude: impl Fn(f64) -> f64,
        t_end: f64,
        probes: &Probes,
        snapshot_times: &[f64],
    ) -> Result<WaveRecord> {
        let n = self.mass.nrows();
        if direction.len() != n {
            return Err(Error::Parameter("load direction has the wrong length".into()));
        }
        let n_steps = (t_end / self.dt - 1e-9).ceil().max(0.0) as usize;
        let snaps = snapshot_steps(snapshot_times, self.dt, n_steps);

        let mut u = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        let mut a = self.initial_acceleration(&u, &(direction * amplitude(0.0)));

        let mut series: Vec<Vec<f64>> = probes
            .sensors
            .iter()
            .map(|_| Vec::with_capacity(n_steps + 1))
            .collect();
        let mut snapshots = Vec::new();
        for k in 0..=n_steps {
            if k > 0 {
                let f = direction * amplitude(k as f64 * self.dt);
                self.step(&mut u, &mut v, &mut a, &f);
                if u.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Divergence { step: k });
                }
            }
            for (s, out) in probes.sensors.iter().zip(series.iter_mut()) {
                out.push(u[s.dof]);
            }
            for &(_, t) in snaps.iter().filter(|(sk, _)| *sk == k) {
                snapshots.extend(capture(&probes.fields, u.as_slice(), t));
            }
        }

        Ok(WaveRecord {
            dt: self.dt,
            labels: probes.sensors.iter().map(|s| s.label.clone()).collect(),
            series,
            excitation: Vec::new(),
            snapshots,
        })
    }
}
