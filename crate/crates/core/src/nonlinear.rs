//! The scalar nonlinearity `b` and the delay term
//! `(B₁[ξ](v))(x) = ∫_{−r}^0 b(v(θ, x)) ξ(θ, v) dθ`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::history::HistorySegment;
use crate::kernel::{KernelSpec, KernelVariant};
use crate::spectral::GridField;

/// Right end of the certification search interval for the Nicholson map.
pub const SEARCH_END: f64 = 20.0;
const SEARCH_POINTS: usize = 200_000;
const REFINE_TOL: f64 = 1e-9;
const REFINE_MAX_ITER: usize = 200;

/// Shape of `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `b(w) = p·w²·e^{−|w|}`.
    Nicholson { p: f64 },
    /// Even, piecewise-linear in `|w|` through the `[w, b]` nodes (`w` strictly
    /// increasing from 0), constant past the last node.
    BoundedCustom { table: Vec<[f64; 2]> },
}

/// `M_b ≥ sup|b|` and `L_b ≥ Lip(b)`, with their provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(rename = "M_b")]
    pub m_b: f64,
    #[serde(rename = "L_b")]
    pub l_b: f64,
    /// True when found by [`NonlinearitySpec::certify_constants`], false when supplied.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub profile: Profile,
    pub bounds: Option<Bounds>,
}

impl NonlinearitySpec {
    pub fn nicholson(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Nicholson amplitude p must be positive, got {p}"
            )));
        }
        Ok(Self {
            profile: Profile::Nicholson { p },
            bounds: None,
        })
    }

    /// Nicholson map with its constants certified.
    pub fn nicholson_certified(p: f64) -> Result<Self> {
        let mut nl = Self::nicholson(p)?;
        nl.certify_constants()?;
        Ok(nl)
    }

    /// A tabulated map with user-supplied constants. The constants must dominate
    /// the exact sup and slope of the table.
    pub fn bounded_custom(table: Vec<[f64; 2]>, m_b: f64, l_b: f64) -> Result<Self> {
        if table.is_empty() || table[0][0] != 0.0 {
            return Err(Error::InvalidParameter("table must start at w = 0".into()));
        }
        if table.windows(2).any(|p| p[1][0] <= p[0][0]) {
            return Err(Error::InvalidParameter(
                "table abscissae must strictly increase".into(),
            ));
        }
        if let Some(row) = table
            .iter()
            .find(|r| !(r[1] >= 0.0 && r[1].is_finite() && r[0].is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "table value b({}) = {} violates b >= 0",
                row[0], row[1]
            )));
        }
        let sup = table.iter().map(|r| r[1]).fold(0.0, f64::max);
        let slope = table
            .windows(2)
            .map(|p| ((p[1][1] - p[0][1]) / (p[1][0] - p[0][0])).abs())
            .fold(0.0, f64::max);
        if m_b < sup {
            return Err(Error::InvalidParameter(format!(
                "M_b = {m_b} is below the table sup {sup}"
            )));
        }
        if l_b < slope {
            return Err(Error::InvalidParameter(format!(
                "L_b = {l_b} is below the table slope {slope}"
            )));
        }
        Ok(Self {
            profile: Profile::BoundedCustom { table },
            bounds: Some(Bounds {
                m_b,
                l_b,
                certified: false,
            }),
        })
    }

    pub fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    /// `(M_b, L_b)`, or [`Error::Uncertified`].
    pub fn constants(&self) -> Result<(f64, f64)> {
        self.bounds
            .map(|b| (b.m_b, b.l_b))
            .ok_or(Error::Uncertified)
    }

    pub fn eval(&self, w: f64) -> f64 {
        match &self.profile {
            Profile::Nicholson { p } => p * w * w * (-w.abs()).exp(),
            Profile::BoundedCustom { table } => interpolate(table, w.abs()),
        }
    }

    /// `b′(w)` for the Nicholson map: `p·(2|w| − w²)·e^{−|w|}·sign(w)`.
    fn nicholson_derivative(p: f64, w: f64) -> f64 {
        let a = w.abs();
        p * (2.0 * a - a * a) * (-a).exp() * w.signum()
    }

    /// Finds `M_b = sup b` and `L_b = sup|b′|` by a dense grid scan of
    /// `[0, 20]` followed by golden-section refinement.
    ///
    /// Tabulated maps already carry validated constants; they are kept as supplied.
    pub fn certify_constants(&mut self) -> Result<Bounds> {
        let p = match &self.profile {
            Profile::Nicholson { p } => *p,
            Profile::BoundedCustom { .. } => return self.bounds.ok_or(Error::Uncertified),
        };
        let b = |w: f64| p * w * w * (-w).exp();
        let db = |w: f64| Self::nicholson_derivative(p, w).abs();
        let (w_b, m_b) = maximize(b)?;
        let (w_l, l_b) = maximize(db)?;
        // b and |b′| decrease monotonically past w = 2 + √2; the sup must sit
        // strictly inside the search interval with a negligible tail.
        for (name, f, best, at) in [
            ("b", &b as &dyn Fn(f64) -> f64, m_b, w_b),
            ("|b'|", &db, l_b, w_l),
        ] {
            if at >= SEARCH_END - 1.0 {
                return Err(Error::Certification(format!(
                    "{name} maximum at search boundary w = {at}"
                )));
            }
            let tail = (0..=200)
                .map(|i| f(SEARCH_END * (1.0 + i as f64 / 100.0)))
                .fold(0.0, f64::max);
            if tail >= 1e-5 * best {
                return Err(Error::Certification(format!(
                    "{name} tail {tail} not negligible against {best}"
                )));
            }
        }
        let bounds = Bounds {
            m_b,
            l_b,
            certified: true,
        };
        self.bounds = Some(bounds);
        Ok(bounds)
    }
}

fn interpolate(table: &[[f64; 2]], a: f64) -> f64 {
    let last = table[table.len() - 1];
    if a >= last[0] {
        return last[1];
    }
    let i = table.partition_point(|r| r[0] <= a);
    let (lo, hi) = (table[i - 1], table[i]);
    lo[1] + (hi[1] - lo[1]) * (a - lo[0]) / (hi[0] - lo[0])
}

/// Grid scan of `[0, SEARCH_END]` then golden-section search on the bracketing cell.
fn maximize(f: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let step = SEARCH_END / SEARCH_POINTS as f64;
    let (best, _) = (0..=SEARCH_POINTS).map(|i| (i, f(i as f64 * step))).fold(
        (0, f64::NEG_INFINITY),
        |acc, x| if x.1 > acc.1 { x } else { acc },
    );
    let mut lo = best.saturating_sub(1) as f64 * step;
    let mut hi = (best + 1).min(SEARCH_POINTS) as f64 * step;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iter = 0;
    while hi - lo > REFINE_TOL {
        iter += 1;
        if iter > REFINE_MAX_ITER {
            return Err(Error::Certification(format!(
                "golden section did not reach width {REFINE_TOL} (width {})",
                hi - lo
            )));
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let (w, v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((w, v))
}

/// `b(v(θ_j, x_i))` for every snapshot.
pub fn b_rows(nl: &NonlinearitySpec, v: &HistorySegment) -> Vec<Vec<f64>> {
    v.snapshots()
        .iter()
        .map(|s| s.iter().map(|&w| nl.eval(w)).collect())
        .collect()
}

/// `Σ_j w_j ξ_j b_j(x)` with the θ index outermost.
pub(crate) fn accumulate<'a>(
    rows: impl Iterator<Item = &'a [f64]>,
    xi: &[f64],
    weights: &[f64],
    grid_points: usize,
) -> GridField {
    let mut out = vec![0.0; grid_points];
    for ((row, x), w) in rows.zip(xi).zip(weights) {
        let c = w * x;
        for (o, b) in out.iter_mut().zip(row) {
            *o += c * b;
        }
    }
    GridField(out)
}

/// `B₁[ξ](v)` on the spatial grid, θ-trapezoid quadrature.
pub fn delay_term(
    nl: &NonlinearitySpec,
    ks: &KernelSpec,
    v: &HistorySegment,
    variant: KernelVariant,
) -> Result<GridField> {
    if !ks.matches(v) {
        return Err(contract("kernel and history grids differ"));
    }
    let xi = ks.eval_xi(v, variant)?;
    let rows = b_rows(nl, v);
    Ok(accumulate(
        rows.iter().map(Vec::as_slice),
        &xi,
        &ks.theta_weights(),
        v.grid_points(),
    ))
}
