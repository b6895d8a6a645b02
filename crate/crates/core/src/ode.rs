//! Fixed-step classical RK4 with a half-step Richardson error estimate.

use thiserror::Error;

/// |RHS| above which the integration is aborted as a pole.
pub const POLE_RHS_LIMIT: f64 = 1e12;
/// Distance to an excluded locus treated as a hit.
pub const EXCLUDED_TOL: f64 = 1e-9;
/// Relative Richardson estimate above which the step is considered unresolved
/// (finite-time blow-up stepped over).
pub const UNRESOLVED_REL_ERR: f64 = 1e-2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("pole encountered at t = {t}: {reason}")]
    PoleEncountered { t: f64, reason: String },
    #[error("step must be positive (got {0})")]
    StepNotPositive(f64),
    #[error("empty or reversed time span [{0}, {1}]")]
    BadSpan(f64, f64),
    #[error("state dimension {got} does not match system dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Richardson estimate of the local error of each step (0 at the start).
    pub err_est: Vec<f64>,
    pub method: &'static str,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn max_err_est(&self) -> f64 {
        self.err_est.iter().cloned().fold(0.0, f64::max)
    }

    /// Component `i` as a series.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }
}

/// Right-hand side `dx/dt = f(t, x)`; `Err` carries a reason and is reported
/// as a pole.
pub trait Rhs: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), String>;
    /// Signed distance-like functions that must stay away from zero.
    fn excluded(&self, _t: f64, _x: &[f64]) -> Option<String> {
        None
    }
    /// Reason if a step from `(t0, x0)` to `(t1, x1)` jumped across an
    /// excluded locus without landing near it.
    fn crossed(&self, _t0: f64, _x0: &[f64], _t1: f64, _x1: &[f64]) -> Option<String> {
        None
    }
}

/// Closure adapter.
pub struct FnRhs<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> Rhs for FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<(), String> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), String> {
        (self.f)(t, x, out)
    }
}

/// Number of uniform steps and actual step covering `[t0, t1]`.
pub fn uniform_grid(t0: f64, t1: f64, step: f64) -> Result<(usize, f64), OdeError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(OdeError::StepNotPositive(step));
    }
    if !(t1 > t0) {
        return Err(OdeError::BadSpan(t0, t1));
    }
    let n = ((t1 - t0) / step).round().max(1.0) as usize;
    Ok((n, (t1 - t0) / n as f64))
}

struct Stepper<'a> {
    rhs: &'a dyn Rhs,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(rhs: &'a dyn Rhs) -> Self {
        let n = rhs.dim();
        Stepper {
            rhs,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    fn call(&mut self, stage: usize, t: f64) -> Result<(), OdeError> {
        let out = &mut self.k[stage];
        self.rhs
            .eval(t, &self.tmp, out)
            .map_err(|reason| OdeError::PoleEncountered { t, reason })?;
        let big = out.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(big <= POLE_RHS_LIMIT) {
            return Err(OdeError::PoleEncountered {
                t,
                reason: format!("|rhs| = {big:e} exceeds {POLE_RHS_LIMIT:e}"),
            });
        }
        Ok(())
    }

    fn step(&mut self, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>, OdeError> {
        let n = x.len();
        self.tmp.copy_from_slice(x);
        self.call(0, t)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k[0][i];
        }
        self.call(1, t + 0.5 * h)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k[1][i];
        }
        self.call(2, t + 0.5 * h)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k[2][i];
        }
        self.call(3, t + h)?;
        Ok((0..n)
            .map(|i| x[i] + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]))
            .collect())
    }
}

fn check_state(rhs: &dyn Rhs, t: f64, x: &[f64]) -> Result<(), OdeError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::PoleEncountered {
            t,
            reason: "non-finite state".into(),
        });
    }
    if let Some(reason) = rhs.excluded(t, x) {
        return Err(OdeError::PoleEncountered { t, reason });
    }
    Ok(())
}

/// Integrate from `t0` to `t1` with a uniform step close to `step`.
pub fn integrate(rhs: &dyn Rhs, x0: &[f64], t0: f64, t1: f64, step: f64) -> Result<Trajectory, OdeError> {
    if x0.len() != rhs.dim() {
        return Err(OdeError::DimensionMismatch {
            expected: rhs.dim(),
            got: x0.len(),
        });
    }
    let (n, h) = uniform_grid(t0, t1, step)?;
    check_state(rhs, t0, x0)?;
    let mut stepper = Stepper::new(rhs);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut err_est = Vec::with_capacity(n + 1);
    times.push(t0);
    states.push(x0.to_vec());
    err_est.push(0.0);
    let mut x = x0.to_vec();
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let full = stepper.step(t, &x, h)?;
        let mid = stepper.step(t, &x, 0.5 * h)?;
        let half = stepper.step(t + 0.5 * h, &mid, 0.5 * h)?;
        let mut err: f64 = 0.0;
        let mut rel: f64 = 0.0;
        for i in 0..x.len() {
            let e = (half[i] - full[i]).abs() * 16.0 / 15.0;
            err = err.max(e);
            rel = rel.max(e / (1.0 + half[i].abs().max(x[i].abs())));
        }
        let t_next = t0 + (k + 1) as f64 * h;
        check_state(rhs, t_next, &full)?;
        if let Some(reason) = rhs.crossed(t, &x, t_next, &full) {
            return Err(OdeError::PoleEncountered { t: t_next, reason });
        }
        if !(rel <= UNRESOLVED_REL_ERR) {
            return Err(OdeError::PoleEncountered {
                t: t_next,
                reason: format!("step unresolved (relative error estimate {rel:e})"),
            });
        }
        x = full;
        times.push(t_next);
        states.push(x.clone());
        err_est.push(err);
    }
    Ok(Trajectory {
        times,
        states,
        err_est,
        method: "rk4",
        step: h,
    })
}

/// Observed ratio of global errors at steps `h` and `h/2` on `dx/dt = x`,
/// `x(0) = 1` over `[0, 1]`.
pub fn linear_convergence_ratio(h: f64) -> Result<f64, OdeError> {
    let rhs = FnRhs {
        dim: 1,
        f: |_t: f64, x: &[f64], out: &mut [f64]| {
            out[0] = x[0];
            Ok(())
        },
    };
    let e = std::f64::consts::E;
    let coarse = integrate(&rhs, &[1.0], 0.0, 1.0, h)?;
    let fine = integrate(&rhs, &[1.0], 0.0, 1.0, h / 2.0)?;
    Ok((coarse.final_state()[0] - e).abs() / (fine.final_state()[0] - e).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> FnRhs<impl Fn(f64, &[f64], &mut [f64]) -> Result<(), String> + Sync> {
        FnRhs {
            dim: 1,
            f: |_t: f64, x: &[f64], out: &mut [f64]| {
                out[0] = x[0];
                Ok(())
            },
        }
    }

    #[test]
    fn exponential_to_1e10() {
        let tr = integrate(&linear(), &[1.0], 0.0, 1.0, 1e-3).unwrap();
        assert!((tr.final_state()[0] - std::f64::consts::E).abs() < 1e-10);
        assert_eq!(tr.len(), 1001);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.max_err_est() < 1e-13);
    }

    #[test]
    fn riccati_blow_up_before_one() {
        let rhs = FnRhs {
            dim: 1,
            f: |_t: f64, x: &[f64], out: &mut [f64]| {
                out[0] = x[0] * x[0];
                Ok(())
            },
        };
        match integrate(&rhs, &[1.0], 0.0, 2.0, 1e-3) {
            Err(OdeError::PoleEncountered { t, .. }) => assert!(t <= 1.0, "detected at {t}"),
            other => panic!("expected a pole, got {other:?}"),
        }
    }

    #[test]
    fn step_validation() {
        assert_eq!(
            integrate(&linear(), &[1.0], 0.0, 1.0, 0.0).unwrap_err(),
            OdeError::StepNotPositive(0.0)
        );
        assert!(matches!(
            integrate(&linear(), &[1.0], 0.0, 1.0, -1.0),
            Err(OdeError::StepNotPositive(_))
        ));
    }

    #[test]
    fn fourth_order_convergence() {
        let ratio = linear_convergence_ratio(0.1).unwrap();
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}
