//! Fixed-step explicit integrators over a flat state vector.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `s' = f(s)`.
pub trait OdeSystem {
    fn len(&self) -> usize;

    fn derivatives(&self, state: &[f64], out: &mut [f64]);

    /// Human-readable name of a state component, used in diagnostics.
    fn describe(&self, index: usize) -> String {
        format!("component {index}")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::Config(format!("unknown integrator {other:?}"))),
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("time step must be positive and finite, got {dt}")))
    }
}

fn check_finite<S: OdeSystem + ?Sized>(sys: &S, what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite(format!("{what} of {} is {}", sys.describe(i), v[i]))),
    }
}

/// Reusable scratch buffers so steps do not allocate.
#[derive(Clone, Debug, Default)]
pub struct Stepper {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new() -> Self {
        Self::default()
    }

    fn resize(&mut self, n: usize) {
        for k in &mut self.k {
            k.resize(n, 0.0);
        }
        self.tmp.resize(n, 0.0);
    }

    pub fn step<S: OdeSystem + ?Sized>(&mut self, method: Integrator, sys: &S, state: &mut [f64], dt: f64) -> Result<()> {
        match method {
            Integrator::Euler => self.euler(sys, state, dt),
            Integrator::Rk4 => self.rk4(sys, state, dt),
        }
    }

    /// `s <- s + dt f(s)`.
    pub fn euler<S: OdeSystem + ?Sized>(&mut self, sys: &S, state: &mut [f64], dt: f64) -> Result<()> {
        check_dt(dt)?;
        self.resize(state.len());
        let k = &mut self.k[0];
        sys.derivatives(state, k);
        check_finite(sys, "derivative", k)?;
        for (s, d) in state.iter_mut().zip(k.iter()) {
            *s += dt * d;
        }
        check_finite(sys, "state", state)
    }

    /// Classical fourth-order Runge-Kutta.
    pub fn rk4<S: OdeSystem + ?Sized>(&mut self, sys: &S, state: &mut [f64], dt: f64) -> Result<()> {
        check_dt(dt)?;
        self.resize(state.len());
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.derivatives(state, k1);
        check_finite(sys, "derivative", k1)?;
        for ((t, s), k) in tmp.iter_mut().zip(state.iter()).zip(k1.iter()) {
            *t = s + 0.5 * dt * k;
        }
        sys.derivatives(tmp, k2);
        check_finite(sys, "derivative", k2)?;
        for ((t, s), k) in tmp.iter_mut().zip(state.iter()).zip(k2.iter()) {
            *t = s + 0.5 * dt * k;
        }
        sys.derivatives(tmp, k3);
        check_finite(sys, "derivative", k3)?;
        for ((t, s), k) in tmp.iter_mut().zip(state.iter()).zip(k3.iter()) {
            *t = s + dt * k;
        }
        sys.derivatives(tmp, k4);
        check_finite(sys, "derivative", k4)?;
        for (i, s) in state.iter_mut().enumerate() {
            *s += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_finite(sys, "state", state)
    }
}

/// One Euler step on a fresh copy of `state`.
pub fn euler_step<S: OdeSystem + ?Sized>(sys: &S, state: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut s = state.to_vec();
    Stepper::new().euler(sys, &mut s, dt)?;
    Ok(s)
}

/// One RK4 step on a fresh copy of `state`.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, state: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut s = state.to_vec();
    Stepper::new().rk4(sys, &mut s, dt)?;
    Ok(s)
}
