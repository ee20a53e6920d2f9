//! The delayed state `u_t(θ) = u(t + θ)`, `θ ∈ [−r, 0]`, on a uniform grid.
//!
//! Snapshot `j` holds `u(t − r + j·h_θ, ·)` with `h_θ = r/m`; snapshot `m` is the
//! current time. Snapshots are reference counted so that advancing a segment
//! shares the `m` snapshots it keeps.

use std::io::Write;
use std::sync::Arc;

use crate::error::{contract, Error, Result};
use crate::spectral::{GridField, OperatorSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    delay: f64,
    grid_step: f64,
    snapshots: Vec<Arc<GridField>>,
}

/// Composite trapezoid weights on `m + 1` equally spaced nodes covering `[−r, 0]`.
pub fn theta_weights(delay: f64, m: usize) -> Vec<f64> {
    let h = delay / m as f64;
    let mut w = vec![h; m + 1];
    w[0] = 0.5 * h;
    w[m] = 0.5 * h;
    w
}

/// `∫_Ω |u| dx` by the trapezoid rule with zero boundary values.
pub(crate) fn abs_integral(values: impl Iterator<Item = f64>, grid_step: f64) -> f64 {
    grid_step * values.map(f64::abs).sum::<f64>()
}

/// Integrals of `u⁺` and `|u⁻|` over `Ω` for one snapshot.
pub(crate) fn sign_integrals(field: &[f64], grid_step: f64) -> (f64, f64) {
    let pos = abs_integral(field.iter().map(|&u| positive(u)), grid_step);
    let neg = abs_integral(field.iter().map(|&u| negative(u)), grid_step);
    (pos, neg)
}

pub(crate) fn trapezoid(weights: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    weights.iter().zip(values).map(|(w, f)| w * f).sum()
}

#[inline]
fn positive(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

#[inline]
fn negative(u: f64) -> f64 {
    if u > 0.0 {
        0.0
    } else {
        u
    }
}

impl HistorySegment {
    /// Builds a segment from `m + 1` snapshots ordered from `θ = −r` to `θ = 0`.
    pub fn from_snapshots(delay: f64, grid_step: f64, snapshots: Vec<GridField>) -> Result<Self> {
        if !(delay.is_finite() && delay > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delay must be positive, got {delay}"
            )));
        }
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid step must be positive, got {grid_step}"
            )));
        }
        if snapshots.len() < 2 {
            return Err(Error::InvalidParameter(
                "a history segment needs at least two θ nodes".into(),
            ));
        }
        let n = snapshots[0].len();
        if n == 0 || snapshots.iter().any(|s| s.len() != n) {
            return Err(contract("snapshots must share one non-empty spatial grid"));
        }
        Ok(Self {
            delay,
            grid_step,
            snapshots: snapshots.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn zeros(delay: f64, m: usize, grid_points: usize, grid_step: f64) -> Result<Self> {
        Self::constant_in_time(delay, m, grid_step, &GridField::zeros(grid_points))
    }

    /// History equal to `field` at every `θ`.
    pub fn constant_in_time(
        delay: f64,
        m: usize,
        grid_step: f64,
        field: &GridField,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        Self::from_snapshots(delay, grid_step, vec![field.clone(); m + 1])
    }

    /// Samples `f(θ, x)` on the `(θ, x)` grid of `op`.
    pub fn from_fn(
        delay: f64,
        m: usize,
        op: &OperatorSpec,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        let xs = op.nodes();
        let snapshots = theta_nodes(delay, m)
            .into_iter()
            .map(|theta| GridField(xs.iter().map(|&x| f(theta, x)).collect()))
            .collect();
        Self::from_snapshots(delay, op.grid_step(), snapshots)
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Number of θ subdivisions.
    pub fn m(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn theta_step(&self) -> f64 {
        self.delay / self.m() as f64
    }

    pub fn grid_points(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn thetas(&self) -> Vec<f64> {
        theta_nodes(self.delay, self.m())
    }

    pub fn theta_weights(&self) -> Vec<f64> {
        theta_weights(self.delay, self.m())
    }

    pub fn snapshots(&self) -> &[Arc<GridField>] {
        &self.snapshots
    }

    /// The snapshot at `θ = 0`.
    pub fn current(&self) -> &GridField {
        self.snapshots.last().expect("segment is never empty")
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.snapshots.len() == other.snapshots.len()
            && self.grid_points() == other.grid_points()
            && self.delay == other.delay
            && self.grid_step == other.grid_step
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            delay: self.delay,
            grid_step: self.grid_step,
            snapshots: self
                .snapshots
                .iter()
                .map(|s| Arc::new(GridField(s.iter().map(|&u| f(u)).collect())))
                .collect(),
        }
    }

    /// Pointwise `max(v, 0)`.
    pub fn positive_part(&self) -> Self {
        self.map(positive)
    }

    /// Pointwise `min(v, 0)`.
    pub fn negative_part(&self) -> Self {
        self.map(negative)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(contract("history grids differ"));
        }
        let snapshots = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| {
                Arc::new(GridField(
                    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect(),
                ))
            })
            .collect();
        Ok(Self {
            delay: self.delay,
            grid_step: self.grid_step,
            snapshots,
        })
    }

    /// `‖v‖_{L¹(−r,0; L¹(Ω))}`: trapezoid in θ of the trapezoid-in-x integral of `|v|`.
    pub fn norm_l1l1(&self) -> f64 {
        trapezoid(
            &self.theta_weights(),
            self.snapshots
                .iter()
                .map(|s| abs_integral(s.iter().copied(), self.grid_step)),
        )
    }

    /// `(‖v⁺‖_{L¹L¹}, ‖v⁻‖_{L¹L¹})`, bitwise equal to
    /// `(self.positive_part().norm_l1l1(), self.negative_part().norm_l1l1())`.
    pub fn sign_norms_l1l1(&self) -> (f64, f64) {
        let parts: Vec<(f64, f64)> = self
            .snapshots
            .iter()
            .map(|s| sign_integrals(s, self.grid_step))
            .collect();
        let w = self.theta_weights();
        (
            trapezoid(&w, parts.iter().map(|p| p.0)),
            trapezoid(&w, parts.iter().map(|p| p.1)),
        )
    }

    /// `max_θ ‖v(θ)‖_{L²(Ω)}` over the θ nodes.
    pub fn norm_c(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| (self.grid_step * s.iter().map(|u| u * u).sum::<f64>()).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.min_value())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|s| s.max_value())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.snapshots
            .iter()
            .all(|s| s.iter().all(|u| u.is_finite()))
    }

    /// Drops the oldest snapshot and appends `snapshot` as the new current state.
    pub fn push(&self, snapshot: GridField) -> Result<Self> {
        let mut out = self.clone();
        out.push_in_place(snapshot)?;
        Ok(out)
    }

    pub fn push_in_place(&mut self, snapshot: GridField) -> Result<()> {
        if snapshot.len() != self.grid_points() {
            return Err(contract(format!(
                "snapshot has {} nodes, history grid has {}",
                snapshot.len(),
                self.grid_points()
            )));
        }
        self.snapshots.remove(0);
        self.snapshots.push(Arc::new(snapshot));
        Ok(())
    }

    /// CSV block: one row per θ node, one column per interior x node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "theta")?;
        for i in 1..=self.grid_points() {
            write!(out, ",{}", i as f64 * self.grid_step)?;
        }
        writeln!(out)?;
        for (theta, s) in self.thetas().iter().zip(&self.snapshots) {
            write!(out, "{theta}")?;
            for u in s.iter() {
                write!(out, ",{u}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `θ_j = −(m − j)·r/m`, so the last node is exactly zero.
pub fn theta_nodes(delay: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| (j as f64 - m as f64) * delay / m as f64)
        .collect()
}
