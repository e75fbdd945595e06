use crate::error::{Error, Result};
use crate::linalg::BandLu;

use super::assemble::{DiscreteSystem, Discretization, Load};

/// One θ-step: `(I + θ·dt·A_{n+1})u_{n+1} = (I − (1−θ)dt·A_n)u_n + dt·f_θ` on
/// interior rows, boundary rows of `A_{n+1}` set to the data at `t_{n+1}`.
/// Returns the new state and the residual of the linear solve.
pub fn step_theta(
    now: &DiscreteSystem,
    next: &DiscreteSystem,
    lu: &BandLu,
    u: &[f64],
    load_now: &Load,
    load_next: &Load,
    dt: f64,
    theta: f64,
) -> (Vec<f64>, f64) {
    let rhs = theta_rhs(now, u, load_now, load_next, dt, theta);
    let x = lu.solve(&rhs);
    let s = next.system_matrix(dt, theta);
    let res = s
        .matvec(&x)
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (x, res)
}

fn theta_rhs(now: &DiscreteSystem, u: &[f64], load_now: &Load, load_next: &Load, dt: f64, theta: f64) -> Vec<f64> {
    let au = if theta < 1.0 { now.apply_interior(u) } else { vec![0.0; u.len()] };
    now.rows()
        .iter()
        .enumerate()
        .map(|(p, r)| {
            if r.is_interior() {
                u[p] - (1.0 - theta) * dt * au[p] + dt * (theta * load_next.f[p] + (1.0 - theta) * load_now.f[p])
            } else {
                load_next.boundary[p]
            }
        })
        .collect()
}

/// Marches a discretization in time, reusing the factorization when the
/// operator is autonomous.
pub struct ThetaStepper<'a> {
    disc: &'a Discretization,
    t0: f64,
    dt: f64,
    theta: f64,
    current: DiscreteSystem,
    load: Load,
    frozen: Option<BandLu>,
    step: usize,
}

impl<'a> ThetaStepper<'a> {
    pub fn new(disc: &'a Discretization, t0: f64, dt: f64, theta: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {theta}")));
        }
        let current = disc.assemble(t0)?;
        let frozen = if disc.is_autonomous() {
            Some(BandLu::factor(&current.system_matrix(dt, theta))?)
        } else {
            None
        };
        Ok(ThetaStepper {
            disc,
            t0,
            dt,
            theta,
            load: disc.load(t0),
            current,
            frozen,
            step: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.load.time
    }

    /// The operator at the current time.
    pub fn system(&self) -> &DiscreteSystem {
        &self.current
    }

    /// Advances `u` by one step, returning the residual of the solve.
    pub fn advance(&mut self, u: &mut Vec<f64>) -> Result<f64> {
        self.step += 1;
        let t_next = self.t0 + self.step as f64 * self.dt;
        let load_next = self.disc.load(t_next);
        let (x, res) = match &self.frozen {
            Some(lu) => step_theta(&self.current, &self.current, lu, u, &self.load, &load_next, self.dt, self.theta),
            None => {
                let next = self.disc.assemble(t_next)?;
                let lu = BandLu::factor(&next.system_matrix(self.dt, self.theta))?;
                let out = step_theta(&self.current, &next, &lu, u, &self.load, &load_next, self.dt, self.theta);
                self.current = next;
                out
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { step: self.step });
        }
        *u = x;
        self.load = load_next;
        Ok(res)
    }
}
