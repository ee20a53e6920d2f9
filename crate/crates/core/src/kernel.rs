//! The state-dependent kernel
//!
//! ```text
//! ξ(θ, v) = ξ⁺(θ)·min{‖v⁺‖_{L¹L¹}, 1} + ξ⁻(θ)·min{‖v⁻‖_{L¹L¹}, 1}
//! ```
//!
//! with `ξ⁺ ≥ 0`, `ξ⁻ ≤ 0` and `sup|ξ^±| ≤ M_ξ/2`. The `p` and `n` variants keep
//! only the first or the second term.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::history::{theta_weights, trapezoid, HistorySegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    #[default]
    Full,
    P,
    N,
}

impl KernelVariant {
    pub const ALL: [KernelVariant; 3] = [KernelVariant::Full, KernelVariant::P, KernelVariant::N];

    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::Full => "full",
            KernelVariant::P => "p",
            KernelVariant::N => "n",
        }
    }
}

impl std::fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    delay: f64,
    m: usize,
    xi_plus: Vec<f64>,
    xi_minus: Vec<f64>,
    #[serde(rename = "M_xi")]
    m_xi: f64,
}

impl KernelSpec {
    /// Validates signs and the `M_ξ/2` cap on every θ node.
    pub fn new(
        delay: f64,
        m: usize,
        xi_plus: Vec<f64>,
        xi_minus: Vec<f64>,
        m_xi: f64,
    ) -> Result<Self> {
        if !(delay.is_finite() && delay > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delay must be positive, got {delay}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        if !(m_xi.is_finite() && m_xi >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "M_xi must be nonnegative, got {m_xi}"
            )));
        }
        if xi_plus.len() != m + 1 || xi_minus.len() != m + 1 {
            return Err(Error::InvalidParameter(format!(
                "kernel profiles need m + 1 = {} samples (got {} and {})",
                m + 1,
                xi_plus.len(),
                xi_minus.len()
            )));
        }
        let half = 0.5 * m_xi;
        if let Some((j, v)) = xi_plus
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "xi_plus[{j}] = {v} violates xi_plus >= 0"
            )));
        }
        if let Some((j, v)) = xi_minus
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v <= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "xi_minus[{j}] = {v} violates xi_minus <= 0"
            )));
        }
        if let Some((j, v)) = xi_plus.iter().enumerate().find(|(_, v)| v.abs() > half) {
            return Err(Error::InvalidParameter(format!(
                "|xi_plus[{j}]| = {v} violates |xi_plus| <= M_xi/2 = {half}"
            )));
        }
        if let Some((j, v)) = xi_minus.iter().enumerate().find(|(_, v)| v.abs() > half) {
            return Err(Error::InvalidParameter(format!(
                "|xi_minus[{j}]| = {} violates |xi_minus| <= M_xi/2 = {half}",
                v.abs()
            )));
        }
        Ok(Self {
            delay,
            m,
            xi_plus,
            xi_minus,
            m_xi,
        })
    }

    /// Constant-in-θ profiles realizing `∫|ξ⁺| = plus_integral` and
    /// `∫|ξ⁻| = minus_integral`.
    pub fn constant(
        delay: f64,
        m: usize,
        plus_integral: f64,
        minus_integral: f64,
        m_xi: f64,
    ) -> Result<Self> {
        if plus_integral < 0.0 || minus_integral < 0.0 {
            return Err(Error::InvalidParameter(
                "target integrals must be nonnegative".into(),
            ));
        }
        let plus = plus_integral / delay;
        let minus = minus_integral / delay;
        let half = 0.5 * m_xi;
        if plus > half {
            return Err(Error::InvalidParameter(format!(
                "plus_integral/r = {plus} violates xi_plus <= M_xi/2 = {half}"
            )));
        }
        if minus > half {
            return Err(Error::InvalidParameter(format!(
                "minus_integral/r = {minus} violates |xi_minus| <= M_xi/2 = {half}"
            )));
        }
        Self::new(delay, m, vec![plus; m + 1], vec![-minus; m + 1], m_xi)
    }

    pub fn zero(delay: f64, m: usize) -> Result<Self> {
        Self::new(delay, m, vec![0.0; m + 1], vec![0.0; m + 1], 0.0)
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m_xi(&self) -> f64 {
        self.m_xi
    }

    pub fn xi_plus(&self) -> &[f64] {
        &self.xi_plus
    }

    pub fn xi_minus(&self) -> &[f64] {
        &self.xi_minus
    }

    pub fn theta_weights(&self) -> Vec<f64> {
        theta_weights(self.delay, self.m)
    }

    pub fn matches(&self, v: &HistorySegment) -> bool {
        v.m() == self.m && v.delay() == self.delay
    }

    /// `ξ(θ_j, v)` on the θ grid for the requested variant.
    pub fn eval_xi(&self, v: &HistorySegment, variant: KernelVariant) -> Result<Vec<f64>> {
        if !self.matches(v) {
            return Err(contract(format!(
                "kernel grid (r = {}, m = {}) does not match history (r = {}, m = {})",
                self.delay,
                self.m,
                v.delay(),
                v.m()
            )));
        }
        let (pos, neg) = v.sign_norms_l1l1();
        Ok(self.eval_from_norms(pos, neg, variant))
    }

    /// Kernel samples given `‖v⁺‖_{L¹L¹}` and `‖v⁻‖_{L¹L¹}`.
    pub fn eval_from_norms(
        &self,
        pos_norm: f64,
        neg_norm: f64,
        variant: KernelVariant,
    ) -> Vec<f64> {
        let cp = pos_norm.min(1.0);
        let cn = neg_norm.min(1.0);
        let plus = self.xi_plus.iter().map(|x| x * cp);
        let minus = self.xi_minus.iter().map(|x| x * cn);
        match variant {
            KernelVariant::Full => plus.zip(minus).map(|(a, b)| a + b).collect(),
            KernelVariant::P => plus.collect(),
            KernelVariant::N => minus.collect(),
        }
    }

    pub fn plus_integral(&self) -> f64 {
        trapezoid(&self.theta_weights(), self.xi_plus.iter().map(|x| x.abs()))
    }

    pub fn minus_integral(&self) -> f64 {
        trapezoid(&self.theta_weights(), self.xi_minus.iter().map(|x| x.abs()))
    }

    /// `L^{1,1}`: `∫|ξ⁺|` (p), `∫|ξ⁻|` (n), or their maximum (full).
    pub fn l11_constant(&self, variant: KernelVariant) -> f64 {
        match variant {
            KernelVariant::Full => self.plus_integral().max(self.minus_integral()),
            KernelVariant::P => self.plus_integral(),
            KernelVariant::N => self.minus_integral(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridField;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DX: f64 = 0.25;

    fn segment(rng: &mut ChaCha8Rng, delay: f64, m: usize, n: usize) -> HistorySegment {
        let amp = 10f64.powf(rng.random_range(-2.0..1.0));
        let shift = rng.random_range(-0.8..0.8);
        let snaps = (0..=m)
            .map(|_| {
                GridField(
                    (0..n)
                        .map(|_| amp * (rng.random_range(-1.0..1.0) + shift))
                        .collect(),
                )
            })
            .collect();
        HistorySegment::from_snapshots(delay, DX, snaps).unwrap()
    }

    fn headline_kernel(m: usize) -> KernelSpec {
        KernelSpec::constant(0.5, m, 6e-5, 1.8e-4, 8e-4).unwrap()
    }

    #[test]
    fn constant_factory() {
        let k = headline_kernel(50);
        assert!(k.xi_plus().iter().all(|&x| (x - 1.2e-4).abs() < 1e-18));
        assert!(k.xi_minus().iter().all(|&x| (x + 3.6e-4).abs() < 1e-18));
        let z = KernelSpec::constant(0.5, 4, 0.0, 0.0, 8e-4).unwrap();
        assert!(z.xi_plus().iter().chain(z.xi_minus()).all(|&x| x == 0.0));
        let err = KernelSpec::constant(0.5, 4, 0.0, 0.5 * 8e-4, 8e-4).unwrap_err();
        assert!(err.to_string().contains("M_xi/2"), "{err}");
        assert!(KernelSpec::constant(0.5, 4, 0.5 * 8e-4, 0.0, 8e-4).is_err());
    }

    #[test]
    fn sign_and_cap_validation() {
        assert!(KernelSpec::new(1.0, 1, vec![-1e-3, 0.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(KernelSpec::new(1.0, 1, vec![0.0, 0.0], vec![0.0, 1e-3], 1.0).is_err());
        assert!(KernelSpec::new(1.0, 1, vec![0.6, 0.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(KernelSpec::new(1.0, 2, vec![0.0, 0.0], vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn l11_constants() {
        let k = headline_kernel(50);
        assert!((k.l11_constant(KernelVariant::Full) - 1.8e-4).abs() < 1e-15);
        assert!((k.l11_constant(KernelVariant::P) - 6e-5).abs() < 1e-15);
        assert!((k.l11_constant(KernelVariant::N) - 1.8e-4).abs() < 1e-15);
        let k = KernelSpec::constant(0.5, 10, 6e-5, 0.0, 8e-4).unwrap();
        assert_eq!(
            k.l11_constant(KernelVariant::Full),
            k.l11_constant(KernelVariant::P)
        );
        let c = 0.3;
        let k = KernelSpec::new(2.0, 7, vec![c; 8], vec![0.0; 8], 1.0).unwrap();
        assert!((k.l11_constant(KernelVariant::P) - c * 2.0).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let k = headline_kernel(4);
        let n = 8;
        let z = HistorySegment::zeros(0.5, 4, n, DX).unwrap();
        for variant in KernelVariant::ALL {
            assert!(k.eval_xi(&z, variant).unwrap().iter().all(|&x| x == 0.0));
        }
        // ‖v⁺‖ = 0.5: r·(n·dx)·c = 0.5·2·c.
        let v = HistorySegment::constant_in_time(0.5, 4, DX, &GridField::constant(n, 0.5)).unwrap();
        assert!((v.norm_l1l1() - 0.5).abs() < 1e-15);
        let full = k.eval_xi(&v, KernelVariant::Full).unwrap();
        for (x, p) in full.iter().zip(k.xi_plus()) {
            assert!((x - 0.5 * p).abs() < 1e-18);
        }
        assert!(k
            .eval_xi(&v, KernelVariant::N)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
        let big = v.map(|u| 14.0 * u);
        assert!((big.norm_l1l1() - 7.0).abs() < 1e-12);
        assert_eq!(k.eval_xi(&big, KernelVariant::Full).unwrap(), k.xi_plus());
        let wrong = HistorySegment::zeros(0.5, 5, n, DX).unwrap();
        assert!(matches!(
            k.eval_xi(&wrong, KernelVariant::Full),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn kernel_lipschitz_and_cap_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = 12;
        let k = KernelSpec::new(
            0.8,
            m,
            (0..=m).map(|j| 0.2 + 0.1 * (j as f64).sin()).collect(),
            (0..=m).map(|j| -0.35 * ((j as f64) / m as f64)).collect(),
            0.8,
        )
        .unwrap();
        let w = k.theta_weights();
        for _ in 0..1000 {
            let v1 = segment(&mut rng, 0.8, m, 9);
            let v2 = if rng.random_bool(0.5) {
                segment(&mut rng, 0.8, m, 9)
            } else {
                let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
                v1.map(|u| u + eps * (u.sin() - 0.3))
            };
            let dv = v1.difference(&v2).unwrap().norm_l1l1();
            for variant in KernelVariant::ALL {
                let a = k.eval_xi(&v1, variant).unwrap();
                let b = k.eval_xi(&v2, variant).unwrap();
                let lhs: f64 = w
                    .iter()
                    .zip(a.iter().zip(&b))
                    .map(|(w, (x, y))| w * (x - y).abs())
                    .sum();
                assert!(lhs <= k.l11_constant(variant) * dv * (1.0 + 1e-10) + 1e-300);
                assert!(a.iter().all(|x| x.abs() <= k.m_xi()));
            }
        }
    }

    #[test]
    fn variants_add_up_and_coincide_on_cones() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let k = headline_kernel(6);
        for _ in 0..200 {
            let v = segment(&mut rng, 0.5, 6, 5);
            let full = k.eval_xi(&v, KernelVariant::Full).unwrap();
            let p = k.eval_xi(&v, KernelVariant::P).unwrap();
            let n = k.eval_xi(&v, KernelVariant::N).unwrap();
            for ((f, a), b) in full.iter().zip(&p).zip(&n) {
                assert_eq!(f.to_bits(), (a + b).to_bits());
            }
            let vp = v.map(f64::abs);
            let full = k.eval_xi(&vp, KernelVariant::Full).unwrap();
            let p = k.eval_xi(&vp, KernelVariant::P).unwrap();
            assert!(full.iter().zip(&p).all(|(a, b)| a.to_bits() == b.to_bits()));
            let vn = v.map(|u| -u.abs());
            let full = k.eval_xi(&vn, KernelVariant::Full).unwrap();
            let n = k.eval_xi(&vn, KernelVariant::N).unwrap();
            assert!(full.iter().zip(&n).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    proptest! {
        #[test]
        fn clip_inequality(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            prop_assert!(a.min(1.0) - b.min(1.0) <= (a - b).abs());
            prop_assert!((a.min(1.0) - b.min(1.0)).abs() <= (a - b).abs());
        }
    }
}
