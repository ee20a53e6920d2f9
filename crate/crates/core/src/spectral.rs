//! Eigenstructure of the Dirichlet Laplacian on `(0, L)`.
//!
//! The grid has `n_x` interior nodes `x_i = i·h_x`, `h_x = L/(n_x+1)`. The
//! orthonormal eigenfunctions `e_k(x) = √(2/L)·sin(kπx/L)` sampled on this grid
//! are exactly the eigenvectors of the second-difference matrix, and they stay
//! orthonormal under the trapezoid rule with zero boundary values. That makes
//! the discrete sine transform (DST-I) an exact pairing between grid samples and
//! mode coefficients.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::history::HistorySegment;

/// Which eigenvalue sequence [`OperatorSpec::eigenvalues`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenvalueMode {
    /// `λ_k = (kπ/L)²`, used for condition arithmetic.
    #[default]
    Analytic,
    /// `λ̂_k = (2/h_x²)(1 − cos(kπh_x/L))`, the second-difference spectrum.
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    domain_length: f64,
    modes: usize,
    grid_points: usize,
    eigenvalue_mode: EigenvalueMode,
}

impl OperatorSpec {
    pub fn new(
        domain_length: f64,
        modes: usize,
        grid_points: usize,
        eigenvalue_mode: EigenvalueMode,
    ) -> Result<Self> {
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain_length must be positive and finite, got {domain_length}"
            )));
        }
        if modes == 0 || grid_points == 0 {
            return Err(Error::InvalidParameter(
                "modes and grid_points must be positive".into(),
            ));
        }
        if modes > grid_points {
            return Err(Error::InvalidParameter(format!(
                "modes ({modes}) must not exceed grid_points ({grid_points})"
            )));
        }
        Ok(Self {
            domain_length,
            modes,
            grid_points,
            eigenvalue_mode,
        })
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn eigenvalue_mode(&self) -> EigenvalueMode {
        self.eigenvalue_mode
    }

    pub fn with_eigenvalue_mode(mut self, mode: EigenvalueMode) -> Self {
        self.eigenvalue_mode = mode;
        self
    }

    /// Spatial step `h_x = L/(n_x + 1)`.
    pub fn grid_step(&self) -> f64 {
        self.domain_length / (self.grid_points + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.grid_step();
        (1..=self.grid_points).map(|i| i as f64 * h).collect()
    }

    /// `(kπ/L)²`, 1-based `k`.
    pub fn analytic_eigenvalue(&self, k: usize) -> f64 {
        let w = k as f64 * PI / self.domain_length;
        w * w
    }

    /// `(2/h²)(1 − cos(kπh/L))`, evaluated as `(4/h²)·sin²(kπh/(2L))` to avoid
    /// cancellation for low modes.
    pub fn discrete_eigenvalue(&self, k: usize) -> f64 {
        let h = self.grid_step();
        let s = (k as f64 * PI * h / (2.0 * self.domain_length)).sin();
        4.0 * s * s / (h * h)
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        match self.eigenvalue_mode {
            EigenvalueMode::Analytic => self.analytic_eigenvalue(k),
            EigenvalueMode::Discrete => self.discrete_eigenvalue(k),
        }
    }

    /// `λ_1 … λ_K` for the configured eigenvalue mode.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.modes).map(|k| self.eigenvalue(k)).collect()
    }

    /// Samples of `e_k` at the interior nodes.
    pub fn basis(&self, k: usize) -> GridField {
        let n = self.grid_points;
        let scale = (2.0 / self.domain_length).sqrt();
        GridField(
            (1..=n)
                .map(|i| scale * (PI * (k * i) as f64 / (n + 1) as f64).sin())
                .collect(),
        )
    }

    pub fn zero_field(&self) -> GridField {
        GridField::zeros(self.grid_points)
    }

    fn check_field(&self, field: &GridField) -> Result<()> {
        if field.len() != self.grid_points {
            return Err(contract(format!(
                "field has {} nodes, operator grid has {}",
                field.len(),
                self.grid_points
            )));
        }
        Ok(())
    }

    /// Trapezoid quadrature of `⟨u, e_k⟩` for `k = 1..=K`.
    pub fn forward(&self, field: &GridField) -> Result<ModeVector> {
        self.check_field(field)?;
        let n = self.grid_points;
        let h = self.grid_step();
        let scale = h * (2.0 / self.domain_length).sqrt();
        let coeffs = (1..=self.modes)
            .map(|k| {
                let s: f64 = field
                    .iter()
                    .enumerate()
                    .map(|(i, &u)| u * (PI * (k * (i + 1)) as f64 / (n + 1) as f64).sin())
                    .sum();
                scale * s
            })
            .collect();
        Ok(ModeVector(coeffs))
    }

    /// `Σ a_k e_k` on the grid.
    pub fn inverse(&self, modes: &ModeVector) -> Result<GridField> {
        if modes.len() != self.modes {
            return Err(contract(format!(
                "mode vector has {} coefficients, operator has {} modes",
                modes.len(),
                self.modes
            )));
        }
        let n = self.grid_points;
        let scale = (2.0 / self.domain_length).sqrt();
        let values = (1..=n)
            .map(|i| {
                let s: f64 = modes
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| a * (PI * ((k + 1) * i) as f64 / (n + 1) as f64).sin())
                    .sum();
                scale * s
            })
            .collect();
        Ok(GridField(values))
    }

    /// Discrete `L²(0, L)` norm (trapezoid, zero boundary values).
    pub fn l2_norm(&self, field: &GridField) -> f64 {
        (self.grid_step() * field.iter().map(|u| u * u).sum::<f64>()).sqrt()
    }
}

/// Zeroes every coefficient with index above `n` (1-based), i.e. `P_N`.
pub fn project_pn(modes: &ModeVector, n: usize) -> Result<ModeVector> {
    if n == 0 || n > modes.len() {
        return Err(contract(format!(
            "projector rank {n} outside 1..={}",
            modes.len()
        )));
    }
    let mut out = modes.clone();
    out.0[n..].iter_mut().for_each(|a| *a = 0.0);
    Ok(out)
}

/// The delay-space projector `(P̂_N φ)(θ) = Σ_{k≤N} e^{−λ_k θ}⟨φ(0), e_k⟩ e_k`.
///
/// Eigenvalues follow the operator's [`EigenvalueMode`].
pub fn hat_project(
    spec: &OperatorSpec,
    history: &HistorySegment,
    n: usize,
) -> Result<HistorySegment> {
    if n == 0 || n > spec.modes() {
        return Err(contract(format!(
            "projector rank {n} outside 1..={}",
            spec.modes()
        )));
    }
    if history.grid_points() != spec.grid_points() {
        return Err(contract("history grid does not match operator grid"));
    }
    let a = spec.forward(history.current())?;
    let basis: Vec<GridField> = (1..=n).map(|k| spec.basis(k)).collect();
    let lambdas: Vec<f64> = (1..=n).map(|k| spec.eigenvalue(k)).collect();
    let snapshots = history
        .thetas()
        .into_iter()
        .map(|theta| {
            let mut field = spec.zero_field();
            for k in 0..n {
                let c = (-lambdas[k] * theta).exp() * a[k];
                for (u, e) in field.iter_mut().zip(basis[k].iter()) {
                    *u += c * e;
                }
            }
            field
        })
        .collect();
    HistorySegment::from_snapshots(history.delay(), history.grid_step(), snapshots)
}

/// Samples of a state on the interior grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridField(pub Vec<f64>);

impl GridField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn min_value(&self) -> f64 {
        self.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for GridField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GridField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for GridField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Coefficients `a_k = ⟨u, e_k⟩`, `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeVector(pub Vec<f64>);

impl ModeVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

impl Deref for ModeVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ModeVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ModeVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Unnormalized DST-I, `X_k = Σ_{i=1}^{n} x_i sin(πki/(n+1))`, via an FFT of
/// length `2(n+1)`. Applying it twice multiplies by `(n+1)/2`.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Buffer sized for [`SineTransform::apply`].
    pub fn workspace(&self) -> Vec<Complex64> {
        vec![Complex64::default(); 2 * (self.n + 1) + self.fft.get_inplace_scratch_len()]
    }

    pub fn apply(&self, input: &[f64], output: &mut [f64], work: &mut [Complex64]) {
        let n = self.n;
        let len = 2 * (n + 1);
        debug_assert_eq!(input.len(), n);
        debug_assert_eq!(output.len(), n);
        let (buf, scratch) = work.split_at_mut(len);
        buf[0] = Complex64::default();
        buf[n + 1] = Complex64::default();
        for (i, &x) in input.iter().enumerate() {
            buf[i + 1] = Complex64::new(x, 0.0);
            buf[len - 1 - i] = Complex64::new(-x, 0.0);
        }
        self.fft.process_with_scratch(buf, scratch);
        for (k, out) in output.iter_mut().enumerate() {
            *out = -0.5 * buf[k + 1].im;
        }
    }
}
