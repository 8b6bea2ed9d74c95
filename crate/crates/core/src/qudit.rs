//! Time-binned polarization states (the transmitted qudit) and the 2×2
//! Jones algebra acting on them.
//!
//! Time is discrete: bin `k` is the slot `τ + kΔt`. Every bin holds a Jones
//! vector in the h/v basis. Global phases are kept verbatim so intermediate
//! states can be compared term by term against closed-form expressions.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_complex::Complex;

use crate::error::{QkdError, Result};
use crate::scalar::Scalar;

/// Complex probability amplitude.
pub type ComplexAmp<T> = Complex<T>;

/// Polarization amplitude pair `(h, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct JonesVector<T> {
    pub h: Complex<T>,
    pub v: Complex<T>,
}

impl<T: Scalar> JonesVector<T> {
    pub fn new(h: Complex<T>, v: Complex<T>) -> Self {
        Self { h, v }
    }

    pub fn from_real(h: T, v: T) -> Self {
        Self::new(Complex::new(h, T::zero()), Complex::new(v, T::zero()))
    }

    pub fn zero() -> Self {
        Self::from_real(T::zero(), T::zero())
    }

    /// `|h⟩`
    pub fn horizontal() -> Self {
        Self::from_real(T::one(), T::zero())
    }

    /// `|v⟩`
    pub fn vertical() -> Self {
        Self::from_real(T::zero(), T::one())
    }

    /// `|d⟩ = (h + v)/√2`
    pub fn diagonal() -> Self {
        let r = T::FRAC_1_SQRT_2();
        Self::from_real(r, r)
    }

    /// `|d̄⟩ = (h − v)/√2`
    pub fn anti_diagonal() -> Self {
        let r = T::FRAC_1_SQRT_2();
        Self::from_real(r, -r)
    }

    pub fn norm_sq(&self) -> T {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self::new(self.h * c, self.v * c)
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    pub fn is_finite(&self) -> bool {
        self.h.re.is_finite() && self.h.im.is_finite() && self.v.re.is_finite() && self.v.im.is_finite()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.h - other.h).norm().max((self.v - other.v).norm())
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

impl<T: Scalar> Add for JonesVector<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.h + rhs.h, self.v + rhs.v)
    }
}

/// 2×2 complex matrix acting on Jones vectors, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesMatrix<T>(pub [[Complex<T>; 2]; 2]);

impl<T: Scalar> JonesMatrix<T> {
    pub fn from_real(m: [[T; 2]; 2]) -> Self {
        let c = |x: T| Complex::new(x, T::zero());
        Self([[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]])
    }

    pub fn identity() -> Self {
        Self::from_real([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    /// Rotation `[[cos, −sin], [sin, cos]]` from precomputed cosine and sine.
    pub fn rotation_cs(cos: T, sin: T) -> Self {
        Self::from_real([[cos, -sin], [sin, cos]])
    }

    /// Rotation by an arbitrary angle in radians.
    pub fn rotation(angle: T) -> Self {
        Self::rotation_cs(angle.cos(), angle.sin())
    }

    pub fn diagonal(a: Complex<T>, b: Complex<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self([[a, z], [z, b]])
    }

    pub fn apply(&self, x: &JonesVector<T>) -> JonesVector<T> {
        let m = &self.0;
        JonesVector::new(m[0][0] * x.h + m[0][1] * x.v, m[1][0] * x.h + m[1][1] * x.v)
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let m = &self.0;
        Self([[m[0][0] * c, m[0][1] * c], [m[1][0] * c, m[1][1] * c]])
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_deviation(&self) -> T {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        p.max_abs_diff(&id)
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.unitarity_deviation() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// Unit scalar `c` with `c·self == other` (to `tol`), if one exists.
    pub fn global_phase_to(&self, other: &Self, tol: T) -> Option<Complex<T>> {
        // Anchor on the largest entry of `self`.
        let mut anchor = (0, 0);
        for r in 0..2 {
            for c in 0..2 {
                if self.0[r][c].norm() > self.0[anchor.0][anchor.1].norm() {
                    anchor = (r, c);
                }
            }
        }
        let a = self.0[anchor.0][anchor.1];
        if a.norm() <= tol {
            return None;
        }
        let c = other.0[anchor.0][anchor.1] / a;
        if (c.norm() - T::one()).abs() > tol {
            return None;
        }
        (self.scale(c).max_abs_diff(other) <= tol).then_some(c)
    }
}

impl<T: Scalar> Mul for JonesMatrix<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Self(out)
    }
}

/// Single-photon qudit: an ordered map from time bin to polarization.
///
/// The empty state is the vacuum (photon lost).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TimeBinnedState<T> {
    bins: BTreeMap<u32, JonesVector<T>>,
}

impl<T: Scalar> TimeBinnedState<T> {
    pub fn vacuum() -> Self {
        Self { bins: BTreeMap::new() }
    }

    /// State with a single occupied bin.
    pub fn new_single(bin: i64, pol: JonesVector<T>) -> Result<Self> {
        Self::from_bins([(bin, pol)])
    }

    /// Builds a state from `(bin, polarization)` pairs. Repeated bins add.
    pub fn from_bins<I>(bins: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, JonesVector<T>)>,
    {
        let mut out = BTreeMap::new();
        for (bin, pol) in bins {
            if bin < 0 {
                return Err(QkdError::NegativeBin(bin));
            }
            let bin = u32::try_from(bin).map_err(|_| QkdError::NegativeBin(bin))?;
            let slot = out.entry(bin).or_insert_with(JonesVector::zero);
            *slot = *slot + pol;
        }
        let state = Self { bins: out };
        state.check_norm()?;
        Ok(state)
    }

    fn check_norm(&self) -> Result<()> {
        let n = self.total_norm_sq();
        if !n.is_finite() || n > T::one() + T::tolerance() {
            return Err(QkdError::OverNormalized(n.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(())
    }

    /// Replaces the vector in `bin` by `U·vector`. Rejects non-unitary `U`.
    ///
    /// An unoccupied bin stays unoccupied.
    pub fn apply_bin_unitary(&self, bin: u32, u: &JonesMatrix<T>) -> Result<Self> {
        let dev = u.unitarity_deviation();
        if !(dev <= T::tolerance()) {
            return Err(QkdError::NotUnitary(dev.to_f64().unwrap_or(f64::NAN)));
        }
        let mut out = self.clone();
        if let Some(pol) = out.bins.get_mut(&bin) {
            *pol = u.apply(pol);
        }
        Ok(out)
    }

    /// Applies the same unitary to every occupied bin.
    pub fn apply_all_bins(&self, u: &JonesMatrix<T>) -> Result<Self> {
        self.bins
            .keys()
            .try_fold(self.clone(), |s, &bin| s.apply_bin_unitary(bin, u))
    }

    pub fn total_norm_sq(&self) -> T {
        self.bins.values().fold(T::zero(), |acc, p| acc + p.norm_sq())
    }

    pub fn bin_norm_sq(&self, bin: u32) -> T {
        self.bins.get(&bin).map_or(T::zero(), JonesVector::norm_sq)
    }

    pub fn get(&self, bin: u32) -> JonesVector<T> {
        self.bins.get(&bin).copied().unwrap_or_else(JonesVector::zero)
    }

    pub fn bins(&self) -> impl Iterator<Item = (u32, &JonesVector<T>)> {
        self.bins.iter().map(|(k, v)| (*k, v))
    }

    pub fn occupied_bins(&self) -> impl Iterator<Item = u32> + '_ {
        self.bins.keys().copied()
    }

    pub fn is_vacuum(&self) -> bool {
        self.bins.is_empty()
    }

    /// Errors unless every occupied bin lies in `0..=max_bin`.
    pub fn require_bins_within(&self, max_bin: u32) -> Result<()> {
        match self.bins.keys().find(|&&k| k > max_bin) {
            Some(&k) => Err(QkdError::BinOutOfRange(k)),
            None => Ok(()),
        }
    }

    /// Largest componentwise difference; missing bins count as zero vectors.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.bins
            .keys()
            .chain(other.bins.keys())
            .fold(T::zero(), |acc, &k| acc.max(self.get(k).max_abs_diff(&other.get(k))))
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Per-bin transformation without unitarity checks.
    #[cfg(test)]
    pub(crate) fn map_bins<F>(&self, mut f: F) -> Self
    where
        F: FnMut(u32, &JonesVector<T>) -> JonesVector<T>,
    {
        Self {
            bins: self.bins.iter().map(|(&k, v)| (k, f(k, v))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type S = TimeBinnedState<f64>;
    type J = JonesVector<f64>;
    type M = JonesMatrix<f64>;

    const TOL: f64 = 1e-12;

    #[test]
    fn single_bin_states() {
        let s = S::new_single(0, J::horizontal()).unwrap();
        assert_eq!(s.get(0), J::horizontal());
        assert!((s.total_norm_sq() - 1.0).abs() < TOL);

        let iv = J::new(Complex::new(0.0, 0.0), Complex::new(0.0, 1.0));
        let s = S::new_single(1, iv).unwrap();
        assert_eq!(s.get(1), iv);
        assert_eq!(s.occupied_bins().collect::<Vec<_>>(), vec![1]);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = S::new_single(0, J::from_real(r, r)).unwrap();
        assert_eq!(s.get(0), J::diagonal());
        assert!((s.total_norm_sq() - 1.0).abs() < TOL);
    }

    #[test]
    fn negative_bin_rejected() {
        assert_eq!(S::new_single(-1, J::horizontal()), Err(QkdError::NegativeBin(-1)));
    }

    #[test]
    fn over_normalized_rejected() {
        assert!(matches!(
            S::new_single(0, J::from_real(1.0, 1.0)),
            Err(QkdError::OverNormalized(_))
        ));
    }

    #[test]
    fn rotations_on_a_bin() {
        let h = S::new_single(0, J::horizontal()).unwrap();
        assert_eq!(h.apply_bin_unitary(0, &M::identity()).unwrap(), h);

        let d = h.apply_bin_unitary(0, &M::rotation(std::f64::consts::FRAC_PI_4)).unwrap();
        assert!(d.get(0).approx_eq(&J::diagonal(), TOL));

        let back = d.apply_bin_unitary(0, &M::rotation(-std::f64::consts::FRAC_PI_4)).unwrap();
        assert!(back.get(0).approx_eq(&J::horizontal(), TOL));
    }

    #[test]
    fn non_unitary_rejected() {
        let h = S::new_single(0, J::horizontal()).unwrap();
        let m = M::from_real([[1.0, 0.0], [0.0, 0.5]]);
        assert!(matches!(h.apply_bin_unitary(0, &m), Err(QkdError::NotUnitary(_))));
    }

    #[test]
    fn norms() {
        assert_eq!(S::vacuum().total_norm_sq(), 0.0);
        let s = S::new_single(0, J::from_real(0.5, 0.5)).unwrap();
        assert!((s.bin_norm_sq(0) - 0.5).abs() < TOL);
        assert_eq!(s.bin_norm_sq(3), 0.0);
    }

    #[test]
    fn global_phase_detection() {
        let a = M::rotation(0.3);
        let c = Complex::from_polar(1.0, 0.7);
        assert!(a.global_phase_to(&a.scale(c), TOL).is_some());
        assert!(a.global_phase_to(&M::identity(), TOL).is_none());
    }

    fn arb_unitary() -> impl Strategy<Value = M> {
        (0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64).prop_map(|(t, a, b, g)| {
            let e = |x: f64| Complex::from_polar(1.0, x);
            // e^{ig} · diag(e^{ia}, e^{-ia}) · R(t) · diag(e^{ib}, e^{-ib})
            M::diagonal(e(a), e(-a)) * M::rotation(t) * M::diagonal(e(b), e(-b)).scale(e(g))
        })
    }

    fn arb_state() -> impl Strategy<Value = S> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..4).prop_map(
            |raw| {
                let total: f64 = raw.iter().map(|(a, b, c, d)| a * a + b * b + c * c + d * d).sum();
                let n = total.sqrt().max(1e-9);
                let bins = raw.iter().enumerate().map(|(k, (a, b, c, d))| {
                    (k as i64, J::new(Complex::new(a / n, b / n), Complex::new(c / n, d / n)))
                });
                S::from_bins(bins).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn unitary_preserves_norm(s in arb_state(), u in arb_unitary(), bin in 0u32..3) {
            let out = s.apply_bin_unitary(bin, &u).unwrap();
            prop_assert!((out.total_norm_sq() - s.total_norm_sq()).abs() < TOL);
        }

        #[test]
        fn composition_matches_product(s in arb_state(), a in arb_unitary(), b in arb_unitary()) {
            let seq = s.apply_bin_unitary(0, &a).unwrap().apply_bin_unitary(0, &b).unwrap();
            let once = s.apply_bin_unitary(0, &(b * a)).unwrap();
            prop_assert!(seq.approx_eq(&once, TOL));
        }

        #[test]
        fn other_bins_untouched(s in arb_state(), u in arb_unitary()) {
            let out = s.apply_bin_unitary(0, &u).unwrap();
            for (k, v) in s.bins().filter(|(k, _)| *k != 0) {
                prop_assert_eq!(out.get(k), *v);
            }
        }
    }
}
