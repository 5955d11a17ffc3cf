//! Explicit Runge–Kutta integration of the contact Hamilton equations
//!
//! ```text
//! q̇^i = ∂H/∂p_i,   ṗ_i = −(∂H/∂q^i + p_i ∂H/∂s),   ṡ = p_i ∂H/∂p_i − H
//! ```
//!
//! Two drivers: classical RK4 on a uniform grid, and the Dormand–Prince 5(4)
//! embedded pair with step-size control.

use std::io::{BufRead, Write};

use crate::contact::{hamiltonian_vector_field, State, SystemSpec};
use crate::error::{Error, Result};

/// Time-ordered samples of an integral curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub method: String,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &State)> {
        Some((*self.times.last()?, self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &State)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

fn rhs(sys: &SystemSpec, y: &[f64]) -> Result<Vec<f64>> {
    let state = State::from_slice(sys.dim(), y);
    Ok(hamiltonian_vector_field(sys, &state)?.to_vec())
}

fn axpy(y: &[f64], dt: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, v) in out.iter_mut().enumerate() {
        let incr: f64 = terms.iter().map(|(c, ks)| c * ks[k]).sum();
        *v += dt * incr;
    }
    out
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn rk4_flat(sys: &SystemSpec, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    let k1 = rhs(sys, y)?;
    let k2 = rhs(sys, &axpy(y, dt, &[(0.5, &k1)]))?;
    let k3 = rhs(sys, &axpy(y, dt, &[(0.5, &k2)]))?;
    let k4 = rhs(sys, &axpy(y, dt, &[(1.0, &k3)]))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt * ((k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0))
        .collect())
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4(sys: &SystemSpec, state: &State, dt: f64) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    sys.check_dim(state.dim())?;
    if !state.is_finite() {
        return Err(Error::Divergence {
            t: f64::NAN,
            last: state.clone(),
        });
    }
    let next = rk4_flat(sys, &state.to_vec(), dt)?;
    if !all_finite(&next) {
        return Err(Error::Divergence {
            t: f64::NAN,
            last: state.clone(),
        });
    }
    Ok(State::from_slice(sys.dim(), &next))
}

fn check_interval(t0: f64, tf: f64) -> Result<()> {
    if !(t0.is_finite() && tf.is_finite() && tf > t0) {
        return Err(Error::InvalidArgument(format!(
            "final time {tf} must exceed initial time {t0}"
        )));
    }
    Ok(())
}

/// Uniform grid `t0 + k·dt`, with the last step shortened to land on `tf`.
/// A remainder within rounding of a whole step is absorbed instead.
fn grid(t0: f64, tf: f64, dt: f64) -> Vec<f64> {
    let span = tf - t0;
    let ratio = span / dt;
    let whole = ratio.round();
    let steps = if (ratio - whole).abs() <= 1e-9 * ratio.max(1.0) {
        whole as usize
    } else {
        ratio.ceil() as usize
    };
    let mut times: Vec<f64> = (0..steps).map(|k| t0 + k as f64 * dt).collect();
    times.push(tf);
    times
}

/// Fixed-step RK4 from `t0` to `tf`, recording every step.
pub fn integrate_fixed(sys: &SystemSpec, s0: &State, t0: f64, tf: f64, dt: f64) -> Result<Trajectory> {
    check_interval(t0, tf)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    sys.check_dim(s0.dim())?;
    let times = grid(t0, tf, dt);
    let mut states = Vec::with_capacity(times.len());
    states.push(s0.clone());
    let mut y = s0.to_vec();
    for w in times.windows(2) {
        let next = rk4_flat(sys, &y, w[1] - w[0]);
        match next {
            Ok(v) if all_finite(&v) => y = v,
            Ok(_) => {
                return Err(Error::Divergence {
                    t: w[0],
                    last: State::from_slice(sys.dim(), &y),
                })
            }
            Err(e) => return Err(e),
        }
        states.push(State::from_slice(sys.dim(), &y));
    }
    let steps = times.len() - 1;
    Ok(Trajectory {
        times,
        states,
        method: "rk4".into(),
        accepted_steps: steps,
        rejected_steps: 0,
    })
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes are
// not needed.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince trial: fifth-order solution and error estimate.
fn dopri_trial(sys: &SystemSpec, y: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
    for row in &DP_A {
        let terms: Vec<(f64, &[f64])> = ks
            .iter()
            .zip(row.iter())
            .map(|(k, a)| (*a, k.as_slice()))
            .collect();
        let point = axpy(y, dt, &terms);
        ks.push(rhs(sys, &point)?);
    }
    let fifth: Vec<(f64, &[f64])> = (0..7).map(|j| (DP_B5[j], ks[j].as_slice())).collect();
    let diff: Vec<(f64, &[f64])> = (0..7)
        .map(|j| (DP_B5[j] - DP_B4[j], ks[j].as_slice()))
        .collect();
    let next = axpy(y, dt, &fifth);
    let zero = vec![0.0; y.len()];
    let err = axpy(&zero, dt, &diff);
    Ok((next, err))
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Adaptive Dormand–Prince 5(4). A step is accepted when
/// `‖err‖∞ ≤ tol·(1 + ‖y‖∞)`; samples are the accepted steps.
pub fn integrate_adaptive(sys: &SystemSpec, s0: &State, t0: f64, tf: f64, tol: f64) -> Result<Trajectory> {
    check_interval(t0, tf)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    sys.check_dim(s0.dim())?;
    let n = sys.dim();
    let min_dt = 1e-12 * (tf - t0);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![s0.clone()],
        method: "dopri5".into(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut t = t0;
    let mut y = s0.to_vec();
    let mut dt = tf - t0;
    let mut last_failure_non_finite = false;
    while t < tf {
        if dt < min_dt {
            let last = State::from_slice(n, &y);
            return Err(if last_failure_non_finite {
                Error::Divergence { t, last }
            } else {
                Error::StepUnderflow { t, dt, last }
            });
        }
        let landing = t + dt >= tf;
        let h = if landing { tf - t } else { dt };
        let (next, err) = dopri_trial(sys, &y, h)?;
        let scale = tol * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let err_norm = err.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !all_finite(&next) || !err_norm.is_finite() {
            last_failure_non_finite = true;
            traj.rejected_steps += 1;
            dt = h * MIN_FACTOR;
            continue;
        }
        last_failure_non_finite = false;
        let ratio = err_norm / scale;
        let factor = if ratio == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * ratio.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        if ratio <= 1.0 {
            t = if landing { tf } else { t + h };
            y = next;
            traj.times.push(t);
            traj.states.push(State::from_slice(n, &y));
            traj.accepted_steps += 1;
        } else {
            traj.rejected_steps += 1;
        }
        dt = h * factor;
    }
    Ok(traj)
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Write `t,<coords>,<momenta>,s,H`, one row per sample.
pub fn write_csv<W: Write>(sys: &SystemSpec, traj: &Trajectory, mut out: W) -> Result<()> {
    let chart = sys.chart();
    let mut header = vec!["t".to_string()];
    header.extend(chart.chart_names().map(str::to_string));
    header.push("H".into());
    writeln!(out, "{}", header.join(","))?;
    for (t, state) in traj.iter() {
        let h = sys.energy(state)?;
        let mut row = vec![fmt_f64(t)];
        row.extend(state.to_vec().into_iter().map(fmt_f64));
        row.push(fmt_f64(h));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a trajectory written by [`write_csv`] for the same chart.
pub fn read_csv<R: BufRead>(sys: &SystemSpec, input: R) -> Result<Trajectory> {
    let chart = sys.chart();
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory file".into()))??;
    let mut expected = vec!["t".to_string()];
    expected.extend(chart.chart_names().map(str::to_string));
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < expected.len() || cols[..expected.len()] != expected[..] {
        return Err(Error::InvalidArgument(format!(
            "trajectory header `{}` does not start with `{}`",
            header.trim(),
            expected.join(",")
        )));
    }
    let width = chart.manifold_dim();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        method: "file".into(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("trajectory line {}: {e}", lineno + 2)))?;
        if values.len() < width + 1 {
            return Err(Error::InvalidArgument(format!(
                "trajectory line {} has {} columns",
                lineno + 2,
                values.len()
            )));
        }
        if let Some(&prev) = traj.times.last() {
            if values[0] <= prev {
                return Err(Error::InvalidArgument(format!(
                    "trajectory line {}: times must increase",
                    lineno + 2
                )));
            }
        }
        traj.times.push(values[0]);
        traj.states.push(State::from_slice(chart.dim(), &values[1..=width]));
    }
    traj.accepted_steps = traj.times.len().saturating_sub(1);
    Ok(traj)
}
