//! Fixed-step classical Runge–Kutta integration.

use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// Magnitude beyond which a state is declared divergent.
pub const BLOW_UP_LIMIT: f64 = 1e6;

/// Autonomous or time-dependent right-hand side `dy/dt = F(t, y)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (**self).eval(t, y, dy)
    }
}

/// Reusable RK4 stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step<F: VectorField + ?Sized>(&mut self, f: &F, t: f64, dt: f64, y: &mut [f64]) {
        let half = 0.5 * dt;
        f.eval(t, y, &mut self.k1);
        axpy_into(&mut self.tmp, y, half, &self.k1);
        f.eval(t + half, &self.tmp, &mut self.k2);
        axpy_into(&mut self.tmp, y, half, &self.k2);
        f.eval(t + half, &self.tmp, &mut self.k3);
        axpy_into(&mut self.tmp, y, dt, &self.k3);
        f.eval(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

#[inline]
fn axpy_into(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

pub fn check_finite(y: &[f64], t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite() && v.abs() <= BLOW_UP_LIMIT) {
        Ok(())
    } else {
        Err(Error::BlowUp { time: t })
    }
}

/// Integrates `y` in place over `grid`, calling `observe(k, t_k, y)` at every
/// grid point including the initial one.
pub fn integrate<F, O>(f: &F, y: &mut [f64], grid: &TimeGrid, mut observe: O) -> Result<()>
where
    F: VectorField + ?Sized,
    O: FnMut(usize, f64, &[f64]),
{
    assert_eq!(y.len(), f.dim());
    let mut rk = Rk4::new(y.len());
    check_finite(y, grid.t0())?;
    observe(0, grid.t0(), y);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        rk.step(f, t, grid.dt(), y);
        let t_next = grid.time(k + 1);
        check_finite(y, t_next)?;
        observe(k + 1, t_next, y);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl VectorField for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    struct Explode;
    impl VectorField for Explode {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let grid = TimeGrid::new(0.0, 2.0, dt).unwrap();
            let mut y = [1.0];
            integrate(&Decay, &mut y, &grid, |_, _, _| {}).unwrap();
            (y[0] - (-2.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn reports_blow_up_time() {
        let grid = TimeGrid::new(0.0, 2.0, 0.001).unwrap();
        let mut y = [1.0];
        match integrate(&Explode, &mut y, &grid, |_, _, _| {}) {
            Err(Error::BlowUp { time }) => assert!(time > 0.9 && time <= 1.01, "{time}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
