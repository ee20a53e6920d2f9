//! Exponential-Euler integration of the delay equation on the history grid.
//!
//! The time step is locked to the θ spacing, `h = r/m`, so every delayed value
//! the kernel and the delay term need is a stored snapshot. One step is
//!
//! ```text
//! a_k ← e^{−λ̂_k h}·a_k + (1 − e^{−λ̂_k h})/λ̂_k · F_k,   F = B₁[ξ](u_t),
//! ```
//!
//! over *all* `n_x` discrete sine modes, so the linear propagator is the exact
//! semigroup of the second-difference Laplacian (entrywise nonnegative).

use std::io::Write;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::history::{sign_integrals, trapezoid, HistorySegment};
use crate::kernel::{KernelSpec, KernelVariant};
use crate::nonlinear::{accumulate, NonlinearitySpec};
use crate::spectral::{GridField, OperatorSpec, SineTransform};

pub const DEFAULT_STRIDE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub operator: OperatorSpec,
    pub kernel: KernelSpec,
    pub nonlinearity: NonlinearitySpec,
    pub variant: KernelVariant,
    pub steps: usize,
    /// Trajectory sampling stride in steps.
    pub stride: usize,
    /// Number of leading mode coefficients kept in trajectory records.
    pub record_modes: usize,
}

impl ProblemSpec {
    pub fn new(
        operator: OperatorSpec,
        kernel: KernelSpec,
        nonlinearity: NonlinearitySpec,
        variant: KernelVariant,
        steps: usize,
    ) -> Result<Self> {
        let record_modes = operator.modes().min(operator.grid_points());
        let p = Self {
            operator,
            kernel,
            nonlinearity,
            variant,
            steps,
            stride: DEFAULT_STRIDE,
            record_modes,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be positive".into()));
        }
        if self.record_modes == 0 || self.record_modes > self.operator.grid_points() {
            return Err(Error::InvalidParameter(format!(
                "record_modes must lie in 1..={}",
                self.operator.grid_points()
            )));
        }
        Ok(())
    }

    pub fn with_variant(mut self, variant: KernelVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_record_modes(mut self, n: usize) -> Self {
        self.record_modes = n.clamp(1, self.operator.grid_points());
        self
    }

    pub fn delay(&self) -> f64 {
        self.kernel.delay()
    }

    pub fn m(&self) -> usize {
        self.kernel.m()
    }

    /// `h = r/m`.
    pub fn time_step(&self) -> f64 {
        self.kernel.delay() / self.kernel.m() as f64
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.time_step()
    }

    /// Number of steps covering `horizon`, which must be a multiple of `h`.
    pub fn steps_for_horizon(&self, horizon: f64) -> Result<usize> {
        let h = self.time_step();
        let q = horizon / h;
        let k = q.round();
        if horizon.is_nan() || horizon < 0.0 || (q - k).abs() > 1e-9 * q.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} is not a multiple of the time step {h}"
            )));
        }
        Ok(k as usize)
    }

    pub fn zero_history(&self) -> Result<HistorySegment> {
        HistorySegment::zeros(
            self.delay(),
            self.m(),
            self.operator.grid_points(),
            self.operator.grid_step(),
        )
    }

    pub fn history_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Result<HistorySegment> {
        HistorySegment::from_fn(self.delay(), self.m(), &self.operator, f)
    }

    fn check_history(&self, v: &HistorySegment) -> Result<()> {
        if !self.kernel.matches(v) {
            return Err(contract("history θ-grid does not match the kernel"));
        }
        if v.grid_points() != self.operator.grid_points()
            || v.grid_step() != self.operator.grid_step()
        {
            return Err(contract("history spatial grid does not match the operator"));
        }
        Ok(())
    }
}

/// Mutable integration state: the history plus per-snapshot caches of `b(u)`
/// and the sign integrals, so that each step only evaluates `b` on the newest
/// snapshot.
pub struct Stepper<'a> {
    problem: &'a ProblemSpec,
    dst: SineTransform,
    work: Vec<Complex64>,
    decay: Vec<f64>,
    gain: Vec<f64>,
    normalize: f64,
    weights: Vec<f64>,
    history: HistorySegment,
    b_rows: Vec<Vec<f64>>,
    signs: Vec<(f64, f64)>,
    coeffs_u: Vec<f64>,
    coeffs_f: Vec<f64>,
    steps_taken: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a ProblemSpec, initial: &HistorySegment) -> Result<Self> {
        problem.check_history(initial)?;
        if !initial.is_finite() {
            return Err(Error::Integration {
                step: 0,
                reason: "initial history has non-finite values".into(),
            });
        }
        let op = &problem.operator;
        let n = op.grid_points();
        let h = problem.time_step();
        let dst = SineTransform::new(n);
        let work = dst.workspace();
        let lambdas: Vec<f64> = (1..=n).map(|k| op.discrete_eigenvalue(k)).collect();
        let decay = lambdas.iter().map(|l| (-l * h).exp()).collect();
        let gain = lambdas.iter().map(|l| -(-l * h).exp_m1() / l).collect();
        let nl = &problem.nonlinearity;
        let b_rows = initial
            .snapshots()
            .iter()
            .map(|s| s.iter().map(|&w| nl.eval(w)).collect())
            .collect();
        let signs = initial
            .snapshots()
            .iter()
            .map(|s| sign_integrals(s, initial.grid_step()))
            .collect();
        Ok(Self {
            problem,
            dst,
            work,
            decay,
            gain,
            normalize: 2.0 / (n + 1) as f64,
            weights: problem.kernel.theta_weights(),
            history: initial.clone(),
            b_rows,
            signs,
            coeffs_u: vec![0.0; n],
            coeffs_f: vec![0.0; n],
            steps_taken: 0,
        })
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    pub fn into_history(self) -> HistorySegment {
        self.history
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn time(&self) -> f64 {
        self.steps_taken as f64 * self.problem.time_step()
    }

    /// `B₁[ξ](u_t)` for the current history; bitwise equal to
    /// [`crate::nonlinear::delay_term`].
    pub fn forcing(&self) -> GridField {
        let pos = trapezoid(&self.weights, self.signs.iter().map(|s| s.0));
        let neg = trapezoid(&self.weights, self.signs.iter().map(|s| s.1));
        let xi = self
            .problem
            .kernel
            .eval_from_norms(pos, neg, self.problem.variant);
        accumulate(
            self.b_rows.iter().map(Vec::as_slice),
            &xi,
            &self.weights,
            self.problem.operator.grid_points(),
        )
    }

    /// Advances one step of size `h` and pushes the new snapshot.
    pub fn advance(&mut self) -> Result<()> {
        let step = self.steps_taken + 1;
        let forcing = self.forcing();
        self.dst.apply(&forcing, &mut self.coeffs_f, &mut self.work);
        self.dst
            .apply(self.history.current(), &mut self.coeffs_u, &mut self.work);
        for k in 0..self.coeffs_u.len() {
            self.coeffs_u[k] = self.normalize
                * (self.decay[k] * self.coeffs_u[k] + self.gain[k] * self.coeffs_f[k]);
        }
        let mut next = vec![0.0; self.coeffs_u.len()];
        self.dst.apply(&self.coeffs_u, &mut next, &mut self.work);
        if let Some(i) = next.iter().position(|u| !u.is_finite()) {
            return Err(Error::Integration {
                step,
                reason: format!("non-finite value at grid node {}", i + 1),
            });
        }
        let nl = &self.problem.nonlinearity;
        self.b_rows.remove(0);
        self.b_rows.push(next.iter().map(|&w| nl.eval(w)).collect());
        self.signs.remove(0);
        self.signs
            .push(sign_integrals(&next, self.history.grid_step()));
        self.history.push_in_place(GridField(next))?;
        self.steps_taken = step;
        Ok(())
    }

    /// All `n_x` coefficients `a_k = ⟨u, e_k⟩` of a grid field.
    pub fn mode_coefficients(&mut self, field: &GridField) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        self.dst.apply(field, &mut out, &mut self.work);
        let scale = self.normalize * (self.problem.operator.domain_length() / 2.0).sqrt();
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }
}

/// One exponential-Euler step from `v`.
pub fn step(problem: &ProblemSpec, v: &HistorySegment) -> Result<HistorySegment> {
    let mut s = Stepper::new(problem, v)?;
    s.advance()?;
    Ok(s.into_history())
}

/// A trajectory sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub low_modes: Vec<f64>,
    pub high_norm: f64,
    pub full_norm: f64,
    pub min_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    /// Full snapshots at requested step indices, as `(t, field)`.
    pub snapshots: Vec<(f64, GridField)>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Columns `t, a_1..a_N, high_norm, full_norm, min_value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.low_modes.len());
        write!(out, "t")?;
        for k in 1..=n {
            write!(out, ",a_{k}")?;
        }
        writeln!(out, ",high_norm,full_norm,min_value")?;
        for s in &self.samples {
            write!(out, "{}", s.t)?;
            for a in &s.low_modes {
                write!(out, ",{a}")?;
            }
            writeln!(out, ",{},{},{}", s.high_norm, s.full_norm, s.min_value)?;
        }
        Ok(())
    }
}

fn sample(stepper: &mut Stepper<'_>, n_low: usize) -> Sample {
    let u = stepper.history().current().clone();
    let a = stepper.mode_coefficients(&u);
    let high = a[n_low..].iter().map(|c| c * c).sum::<f64>().sqrt();
    Sample {
        t: stepper.time(),
        low_modes: a[..n_low].to_vec(),
        high_norm: high,
        full_norm: stepper.problem.operator.l2_norm(&u),
        min_value: u.min_value(),
    }
}

/// Runs `problem.steps` steps from `phi`, sampling every `problem.stride` steps.
pub fn evolve(problem: &ProblemSpec, phi: &HistorySegment) -> Result<TrajectoryRecord> {
    evolve_with(problem, phi, &[], |_| {})
}

/// [`evolve`] that also keeps full snapshots at the given step indices and calls
/// `observer` after every step (and once on the initial history).
pub fn evolve_with(
    problem: &ProblemSpec,
    phi: &HistorySegment,
    snapshot_steps: &[usize],
    mut observer: impl FnMut(&Stepper<'_>),
) -> Result<TrajectoryRecord> {
    problem.validate()?;
    let mut stepper = Stepper::new(problem, phi)?;
    let mut record = TrajectoryRecord::default();
    let n_low = problem.record_modes;
    observer(&stepper);
    record.samples.push(sample(&mut stepper, n_low));
    if snapshot_steps.contains(&0) {
        record
            .snapshots
            .push((0.0, stepper.history().current().clone()));
    }
    for i in 1..=problem.steps {
        stepper.advance()?;
        observer(&stepper);
        if i % problem.stride == 0 {
            record.samples.push(sample(&mut stepper, n_low));
        }
        if snapshot_steps.contains(&i) {
            record
                .snapshots
                .push((stepper.time(), stepper.history().current().clone()));
        }
    }
    Ok(record)
}

/// `max_{t ∈ [T/2, T]} ‖u(t)‖_{L²}` over the step grid.
pub fn dissipativity_probe(
    problem: &ProblemSpec,
    phi: &HistorySegment,
    horizon: f64,
) -> Result<f64> {
    let steps = problem.steps_for_horizon(horizon)?;
    let mut stepper = Stepper::new(problem, phi)?;
    let first = steps.div_ceil(2);
    let norm = |s: &Stepper<'_>| problem.operator.l2_norm(s.history().current());
    let mut best = if first == 0 { norm(&stepper) } else { 0.0 };
    for i in 1..=steps {
        stepper.advance()?;
        if i >= first {
            best = best.max(norm(&stepper));
        }
    }
    Ok(best)
}
