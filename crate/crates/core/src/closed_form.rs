//! Closed-form expressions for the states at Alice's output and at Bob's
//! return Pockels cells, written out term by term. These are evaluated
//! directly from `cos α`, `sin α` and `e^{iφ}` and serve as the reference
//! the element-by-element pipeline is checked against.

use num_complex::Complex;

use crate::optics::{AlicePhases, PcAngle, PcAngles};
use crate::qudit::{JonesVector, TimeBinnedState};
use crate::scalar::Scalar;

fn real<T: Scalar>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

fn state<T: Scalar>(early: JonesVector<T>, late: JonesVector<T>) -> TimeBinnedState<T> {
    TimeBinnedState::from_bins([(0, early), (1, late)]).expect("closed forms are normalized")
}

/// `Ψ_A = [−e^{iφ₂} sin α₁, e^{iφ₁} cos α₁]/√2 − i[e^{iφ₄} cos α₂, e^{iφ₃} sin α₂]/√2`
pub fn psi_a<T: Scalar>(a1: PcAngle, a2: PcAngle, phases: &AlicePhases) -> TimeBinnedState<T> {
    let (c1, s1) = a1.cos_sin::<T>();
    let (c2, s2) = a2.cos_sin::<T>();
    let e = |i| phases.phi(i).factor::<T>();
    let k = real(T::FRAC_1_SQRT_2());
    let minus_i = Complex::new(T::zero(), -T::one());
    let early = JonesVector::new(-e(2) * real(s1) * k, e(1) * real(c1) * k);
    let late = JonesVector::new(minus_i * e(4) * real(c2) * k, minus_i * e(3) * real(s2) * k);
    state(early, late)
}

/// `Ψ′_B` just before PBS₂ on the return pass.
pub fn psi_b_prime<T: Scalar>(angles: &PcAngles, phases: &AlicePhases) -> TimeBinnedState<T> {
    let (c1, s1) = angles.a1.cos_sin::<T>();
    let (c2, s2) = angles.a2.cos_sin::<T>();
    let (c3, s3) = angles.a3.cos_sin::<T>();
    let (c4, s4) = angles.a4.cos_sin::<T>();
    let e = |i| phases.phi(i).factor::<T>();
    let k = real(T::FRAC_1_SQRT_2());
    let minus_i = Complex::new(T::zero(), -T::one());
    let early = JonesVector::new(
        -(e(2) * real(s1 * c3) + e(1) * real(c1 * s3)) * k,
        -(e(2) * real(s1 * s3) - e(1) * real(c1 * c3)) * k,
    );
    let late = JonesVector::new(
        minus_i * (e(4) * real(c2 * c4) - e(3) * real(s2 * s4)) * k,
        minus_i * (e(4) * real(c2 * s4) + e(3) * real(s2 * c4)) * k,
    );
    state(early, late)
}
