//! Sufficient conditions for an inertial manifold and the partial-manifold
//! construction that splits the kernel by sign.
//!
//! All conditions use the analytic eigenvalues `λ_k = (kπ/L)²`. Every verdict
//! here certifies (or fails to certify) a *sufficient* condition; failure is
//! never a proof that no manifold exists.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::kernel::KernelVariant;
use crate::nonlinear::NonlinearitySpec;
use crate::solver::ProblemSpec;
use crate::spectral::{EigenvalueMode, OperatorSpec};

pub const VERDICT_NOTE: &str = "verdicts certify sufficient spectral-gap conditions only; \
'not certified' is not a proof that no inertial manifold exists";

/// `M₁ = r·√(2(L_b²M_ξ² + M_b²(L^{1,1})²|Ω|))`.
pub fn lipschitz_m1(r: f64, m_xi: f64, l11: f64, m_b: f64, l_b: f64, omega: f64) -> f64 {
    r * (2.0 * (l_b * l_b * m_xi * m_xi + m_b * m_b * l11 * l11 * omega)).sqrt()
}

/// `M₁` of `B₁[ξ^variant]` for a problem, using its kernel's `L^{1,1}` constant.
pub fn problem_m1(problem: &ProblemSpec, variant: KernelVariant) -> Result<f64> {
    let (m_b, l_b) = problem.nonlinearity.constants()?;
    Ok(lipschitz_m1(
        problem.kernel.delay(),
        problem.kernel.m_xi(),
        problem.kernel.l11_constant(variant),
        m_b,
        l_b,
        problem.operator.domain_length(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    /// `λ_{N+1} − λ_N ≥ 2μ`.
    pub a4_pass: bool,
    /// `μ > 4M₁` and `δ ≤ 1/2`.
    pub a5_pass: bool,
    /// `δ = (2/μ)·M₁·e^{(λ_N + μ)r}`.
    pub delta: f64,
}

pub fn gap_check(lambda_n: f64, lambda_n1: f64, mu: f64, m1: f64, r: f64) -> Result<GapCheck> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(contract(format!("mu must be positive, got {mu}")));
    }
    let delta = 2.0 / mu * m1 * ((lambda_n + mu) * r).exp();
    Ok(GapCheck {
        a4_pass: lambda_n1 - lambda_n >= 2.0 * mu,
        a5_pass: mu > 4.0 * m1 && delta <= 0.5,
        delta,
    })
}

/// `(λ_{N+1} − λ_N)/8 · exp{−(λ_{N+1} + λ_N)r/2}`: the largest admissible `M₁`
/// when `μ` takes its largest value `(λ_{N+1} − λ_N)/2`.
pub fn bound3(lambda_n: f64, lambda_n1: f64, r: f64) -> f64 {
    (lambda_n1 - lambda_n) / 8.0 * (-(lambda_n1 + lambda_n) / 2.0 * r).exp()
}

pub fn bound3_check(lambda_n: f64, lambda_n1: f64, r: f64, m1: f64) -> (f64, bool) {
    let b = bound3(lambda_n, lambda_n1, r);
    (b, m1 <= b)
}

/// Right-hand sides of the three inequalities used to split the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitBounds {
    /// Upper bound on `r`: `(λ_{N+1}−λ_N)/(16 L_b M_ξ)·e^{…}`.
    pub r_max: f64,
    /// Upper bound on `∫|ξ⁺|`: `(λ_{N+1}−λ_N)/(16 r M_b √|Ω|)·e^{…}`.
    pub plus_max: f64,
    /// Strict lower bound on `∫|ξ⁻|`: `(λ_{N+1}−λ_N)/(8 r M_b √|Ω|)·e^{…}`.
    pub minus_min: f64,
}

pub fn split_bounds(
    lambda_n: f64,
    lambda_n1: f64,
    r: f64,
    m_b: f64,
    l_b: f64,
    m_xi: f64,
    omega: f64,
) -> SplitBounds {
    let gap = lambda_n1 - lambda_n;
    let e = (-(lambda_n1 + lambda_n) / 2.0 * r).exp();
    let root = omega.sqrt();
    SplitBounds {
        r_max: gap / (16.0 * l_b * m_xi) * e,
        plus_max: gap / (16.0 * r * m_b * root) * e,
        minus_min: gap / (8.0 * r * m_b * root) * e,
    }
}

impl SplitBounds {
    pub fn r_pass(&self, r: f64) -> bool {
        r <= self.r_max
    }

    pub fn plus_pass(&self, plus_integral: f64) -> bool {
        plus_integral <= self.plus_max
    }

    pub fn minus_pass(&self, minus_integral: f64) -> bool {
        minus_integral > self.minus_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// The full kernel meets the sufficient condition.
    #[serde(rename = "IM_exists")]
    ImExists,
    /// Only the `p` variant does: a partial manifold attracting `D₊`.
    #[serde(rename = "PIM_only")]
    PimOnly,
    #[serde(rename = "neither_certified")]
    NeitherCertified,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ImExists => "IM_exists",
            Verdict::PimOnly => "PIM_only",
            Verdict::NeitherCertified => "neither_certified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    #[serde(rename = "A4_pass")]
    pub a4_pass: bool,
    #[serde(rename = "A5_pass_p")]
    pub a5_pass_p: bool,
    #[serde(rename = "A5_pass_full")]
    pub a5_pass_full: bool,
    #[serde(rename = "A5_pass_n")]
    pub a5_pass_n: bool,
    pub bound3_pass_full: bool,
    pub bound3_pass_p: bool,
    pub bound3_pass_n: bool,
    #[serde(rename = "remark17_pass")]
    pub delay_bound_pass: bool,
    #[serde(rename = "remark18_pass")]
    pub plus_bound_pass: bool,
    #[serde(rename = "remark19_pass")]
    pub minus_bound_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "lambda_N")]
    pub lambda_n: f64,
    #[serde(rename = "lambda_N1")]
    pub lambda_n1: f64,
    pub mu: f64,
    #[serde(rename = "M_b")]
    pub m_b: f64,
    #[serde(rename = "L_b")]
    pub l_b: f64,
    pub l11_full: f64,
    pub l11_p: f64,
    pub l11_n: f64,
    #[serde(rename = "M1_full")]
    pub m1_full: f64,
    #[serde(rename = "M1_p")]
    pub m1_p: f64,
    #[serde(rename = "M1_n")]
    pub m1_n: f64,
    pub delta_p: f64,
    pub delta_full: f64,
    pub delta_n: f64,
    pub bound3: f64,
    pub split: SplitBounds,
    #[serde(flatten)]
    pub flags: ConditionFlags,
    pub verdict: Verdict,
    pub note: String,
}

impl ConditionReport {
    pub fn m1(&self, variant: KernelVariant) -> f64 {
        match variant {
            KernelVariant::Full => self.m1_full,
            KernelVariant::P => self.m1_p,
            KernelVariant::N => self.m1_n,
        }
    }

    /// One row per `(variant, check)`: `variant,check,value,threshold,pass`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "variant,check,value,threshold,pass")?;
        let f = &self.flags;
        let rows: [(&str, &str, f64, f64, bool); 12] = [
            (
                "all",
                "A4",
                self.lambda_n1 - self.lambda_n,
                2.0 * self.mu,
                f.a4_pass,
            ),
            (
                "full",
                "bound3",
                self.m1_full,
                self.bound3,
                f.bound3_pass_full,
            ),
            ("p", "bound3", self.m1_p, self.bound3, f.bound3_pass_p),
            ("n", "bound3", self.m1_n, self.bound3, f.bound3_pass_n),
            ("full", "A5_delta", self.delta_full, 0.5, f.a5_pass_full),
            ("p", "A5_delta", self.delta_p, 0.5, f.a5_pass_p),
            ("n", "A5_delta", self.delta_n, 0.5, f.a5_pass_n),
            (
                "full",
                "A5_mu",
                4.0 * self.m1_full,
                self.mu,
                self.mu > 4.0 * self.m1_full,
            ),
            (
                "p",
                "A5_mu",
                4.0 * self.m1_p,
                self.mu,
                self.mu > 4.0 * self.m1_p,
            ),
            (
                "all",
                "delay_bound",
                0.0,
                self.split.r_max,
                f.delay_bound_pass,
            ),
            (
                "p",
                "plus_bound",
                self.l11_p,
                self.split.plus_max,
                f.plus_bound_pass,
            ),
            (
                "n",
                "minus_bound",
                self.l11_n,
                self.split.minus_min,
                f.minus_bound_pass,
            ),
        ];
        for (variant, check, value, threshold, pass) in rows {
            writeln!(out, "{variant},{check},{value},{threshold},{pass}")?;
        }
        Ok(())
    }
}

/// Fills every condition for a problem at rank `n` (`1 ≤ n < K`); `mu`
/// defaults to `(λ_{N+1} − λ_N)/2`.
pub fn condition_report(
    problem: &ProblemSpec,
    n: usize,
    mu: Option<f64>,
) -> Result<ConditionReport> {
    let op = &problem.operator;
    if n == 0 || n >= op.modes() {
        return Err(contract(format!(
            "N = {n} must satisfy 1 <= N < K = {}",
            op.modes()
        )));
    }
    let (m_b, l_b) = problem.nonlinearity.constants()?;
    let lambda_n = op.analytic_eigenvalue(n);
    let lambda_n1 = op.analytic_eigenvalue(n + 1);
    let mu = mu.unwrap_or(0.5 * (lambda_n1 - lambda_n));
    let r = problem.kernel.delay();
    let omega = op.domain_length();
    let m1_full = problem_m1(problem, KernelVariant::Full)?;
    let m1_p = problem_m1(problem, KernelVariant::P)?;
    let m1_n = problem_m1(problem, KernelVariant::N)?;
    let g_full = gap_check(lambda_n, lambda_n1, mu, m1_full, r)?;
    let g_p = gap_check(lambda_n, lambda_n1, mu, m1_p, r)?;
    let g_n = gap_check(lambda_n, lambda_n1, mu, m1_n, r)?;
    let (b3, pass_full) = bound3_check(lambda_n, lambda_n1, r, m1_full);
    let pass_p = m1_p <= b3;
    let pass_n = m1_n <= b3;
    let l11_p = problem.kernel.l11_constant(KernelVariant::P);
    let l11_n = problem.kernel.l11_constant(KernelVariant::N);
    let split = split_bounds(
        lambda_n,
        lambda_n1,
        r,
        m_b,
        l_b,
        problem.kernel.m_xi(),
        omega,
    );
    let verdict = if pass_full {
        Verdict::ImExists
    } else if pass_p {
        Verdict::PimOnly
    } else {
        Verdict::NeitherCertified
    };
    Ok(ConditionReport {
        n,
        lambda_n,
        lambda_n1,
        mu,
        m_b,
        l_b,
        l11_full: problem.kernel.l11_constant(KernelVariant::Full),
        l11_p,
        l11_n,
        m1_full,
        m1_p,
        m1_n,
        delta_p: g_p.delta,
        delta_full: g_full.delta,
        delta_n: g_n.delta,
        bound3: b3,
        split,
        flags: ConditionFlags {
            a4_pass: g_p.a4_pass,
            a5_pass_p: g_p.a5_pass,
            a5_pass_full: g_full.a5_pass,
            a5_pass_n: g_n.a5_pass,
            bound3_pass_full: pass_full,
            bound3_pass_p: pass_p,
            bound3_pass_n: pass_n,
            delay_bound_pass: split.r_pass(r),
            plus_bound_pass: split.plus_pass(l11_p),
            minus_bound_pass: split.minus_pass(l11_n),
        },
        verdict,
        note: VERDICT_NOTE.to_string(),
    })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// `∫|ξ⁺|` is placed at `(1 − margin)` times its admissible maximum.
    pub margin: f64,
    /// Relative position of `∫|ξ⁻|` inside its window `(lower, r·M_ξ/2]`, in `(0, 1]`.
    pub minus_position: f64,
    pub r_grid: Vec<f64>,
    pub m_xi_grid: Vec<f64>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            margin: 0.1,
            minus_position: 0.5,
            r_grid: logspace(1e-3, 10.0, 60),
            m_xi_grid: logspace(1e-6, 10.0, 120),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    #[serde(rename = "N")]
    pub n: usize,
    pub domain_length: f64,
    pub r: f64,
    #[serde(rename = "M_xi")]
    pub m_xi: f64,
    pub plus_integral: f64,
    pub minus_integral: f64,
    /// `(lower, upper]` window for `∫|ξ⁻|`.
    pub minus_window: (f64, f64),
    #[serde(rename = "lambda_N")]
    pub lambda_n: f64,
    #[serde(rename = "lambda_N1")]
    pub lambda_n1: f64,
    pub mu: f64,
    pub bound3: f64,
    #[serde(rename = "M1_full")]
    pub m1_full: f64,
    #[serde(rename = "M1_p")]
    pub m1_p: f64,
    #[serde(rename = "M1_n")]
    pub m1_n: f64,
    pub delta_p: f64,
    pub split: SplitBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    /// `(lower bound on ∫|ξ⁻|, r·M_ξ/2]` is empty wherever the `r` bound holds.
    MinusIntegralWindow,
    /// No grid point satisfies the bound on `r`.
    DelayBound,
    /// Mixed failures.
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    #[serde(rename = "N")]
    pub n: usize,
    pub domain_length: f64,
    pub binding_constraint: BindingConstraint,
    /// `4L_b/(M_b√|Ω|)`: with the `r` bound saturated the window is nonempty iff `r` exceeds this.
    pub window_threshold_r: f64,
    pub points_scanned: usize,
    pub delay_bound_failures: usize,
    pub window_failures: usize,
    pub other_failures: usize,
    pub largest_r_meeting_delay_bound: Option<f64>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Synthesis {
    Feasible(ParameterSet),
    Infeasible(InfeasibilityCertificate),
}

enum Outcome {
    Feasible(ParameterSet),
    DelayBound,
    Window,
    Other,
}

#[allow(clippy::too_many_arguments)]
fn try_point(
    n: usize,
    omega: f64,
    lambda_n: f64,
    lambda_n1: f64,
    m_b: f64,
    l_b: f64,
    r: f64,
    m_xi: f64,
    opts: &SynthesisOptions,
) -> Outcome {
    let rb = split_bounds(lambda_n, lambda_n1, r, m_b, l_b, m_xi, omega);
    if !rb.r_pass(r) {
        return Outcome::DelayBound;
    }
    let cap = 0.5 * r * m_xi;
    let (lo, hi) = (rb.minus_min, cap);
    if lo.is_nan() || lo >= hi {
        return Outcome::Window;
    }
    let plus = (1.0 - opts.margin) * rb.plus_max.min(cap);
    let minus = lo + opts.minus_position * (hi - lo);
    let b3 = bound3(lambda_n, lambda_n1, r);
    let m1 = |l11: f64| lipschitz_m1(r, m_xi, l11, m_b, l_b, omega);
    let (m1_p, m1_n, m1_full) = (m1(plus), m1(minus), m1(plus.max(minus)));
    let mu = 0.5 * (lambda_n1 - lambda_n);
    let Ok(g_p) = gap_check(lambda_n, lambda_n1, mu, m1_p, r) else {
        return Outcome::Other;
    };
    let ok = rb.plus_pass(plus)
        && rb.minus_pass(minus)
        && plus / r <= 0.5 * m_xi
        && minus / r <= 0.5 * m_xi
        && m1_p <= b3
        && m1_full > b3
        && m1_n > b3
        && g_p.a4_pass
        && g_p.a5_pass;
    if !ok {
        return Outcome::Other;
    }
    Outcome::Feasible(ParameterSet {
        n,
        domain_length: omega,
        r,
        m_xi,
        plus_integral: plus,
        minus_integral: minus,
        minus_window: (lo, hi),
        lambda_n,
        lambda_n1,
        mu,
        bound3: b3,
        m1_full,
        m1_p,
        m1_n,
        delta_p: g_p.delta,
        split: rb,
    })
}

/// Scans `(r, M_ξ)` in lexicographic grid order for a kernel whose `p` variant
/// meets the sufficient condition while the full and `n` variants do not.
pub fn synthesize_params(
    n: usize,
    nonlinearity: &NonlinearitySpec,
    domain_length: f64,
    opts: &SynthesisOptions,
) -> Result<Synthesis> {
    if opts.r_grid.is_empty() {
        return Err(Error::EmptyGrid("r_grid"));
    }
    if opts.m_xi_grid.is_empty() {
        return Err(Error::EmptyGrid("m_xi_grid"));
    }
    if n == 0 {
        return Err(contract("N must be at least 1"));
    }
    if !(0.0..1.0).contains(&opts.margin)
        || !(opts.minus_position > 0.0 && opts.minus_position <= 1.0)
    {
        return Err(Error::InvalidParameter(
            "margin must lie in [0, 1) and minus_position in (0, 1]".into(),
        ));
    }
    let (m_b, l_b) = nonlinearity.constants()?;
    let op = OperatorSpec::new(domain_length, n + 1, n + 1, EigenvalueMode::Analytic)?;
    let lambda_n = op.analytic_eigenvalue(n);
    let lambda_n1 = op.analytic_eigenvalue(n + 1);
    let (mut delay_fail, mut window_fail, mut other_fail) = (0, 0, 0);
    let mut largest_r: Option<f64> = None;
    for &r in &opts.r_grid {
        for &m_xi in &opts.m_xi_grid {
            match try_point(
                n,
                domain_length,
                lambda_n,
                lambda_n1,
                m_b,
                l_b,
                r,
                m_xi,
                opts,
            ) {
                Outcome::Feasible(p) => return Ok(Synthesis::Feasible(p)),
                Outcome::DelayBound => delay_fail += 1,
                Outcome::Window => {
                    window_fail += 1;
                    largest_r = Some(largest_r.map_or(r, |x: f64| x.max(r)));
                }
                Outcome::Other => {
                    other_fail += 1;
                    largest_r = Some(largest_r.map_or(r, |x: f64| x.max(r)));
                }
            }
        }
    }
    let threshold = 4.0 * l_b / (m_b * domain_length.sqrt());
    let scanned = opts.r_grid.len() * opts.m_xi_grid.len();
    let binding = if delay_fail == scanned {
        BindingConstraint::DelayBound
    } else if other_fail == 0 {
        BindingConstraint::MinusIntegralWindow
    } else {
        BindingConstraint::Other
    };
    let explanation = match binding {
        BindingConstraint::MinusIntegralWindow => format!(
            "minus-integral window (lower bound, r*M_xi/2] is empty at every grid point meeting the delay bound: \
             with the delay bound saturated the window needs r > 4 L_b/(M_b sqrt|Omega|) = {threshold:.6}, \
             and no grid M_xi >= {:.3e} meets the delay bound for such r",
            opts.m_xi_grid.iter().copied().fold(f64::INFINITY, f64::min)
        ),
        BindingConstraint::DelayBound => "no grid point satisfies the delay bound on r".to_string(),
        BindingConstraint::Other => {
            "grid points with a nonempty minus-integral window failed the remaining checks".to_string()
        }
    };
    Ok(Synthesis::Infeasible(InfeasibilityCertificate {
        n,
        domain_length,
        binding_constraint: binding,
        window_threshold_r: threshold,
        points_scanned: scanned,
        delay_bound_failures: delay_fail,
        window_failures: window_fail,
        other_failures: other_fail,
        largest_r_meeting_delay_bound: largest_r,
        explanation,
    }))
}
