//! Operator models for the optical elements of both stations and the three
//! composite passes: Bob's preparation, Alice's phase-gate switch and Bob's
//! return decode.
//!
//! Conventions:
//! - Jones vectors are written in Bob's h/v frame throughout.
//! - Rotations are `R(α) = [[cos α, −sin α], [sin α, cos α]]`.
//! - The 50-50 beamsplitter transmits with a real factor and reflects with a
//!   factor `i` (both scaled by `1/√2`).
//! - The unbalanced interferometer's long arm delays by one bin.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};
use crate::qudit::{JonesMatrix, JonesVector, TimeBinnedState};
use crate::scalar::Scalar;

/// Number of detection bins after the return pass (`τ`, `τ+Δt`, `τ+2Δt`).
pub const DETECTION_BINS: usize = 3;

/// Pockels-cell rotation angle; only `0, ±π/4, π/2` are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum PcAngle {
    MinusQuarter,
    Zero,
    PlusQuarter,
    Half,
}

impl PcAngle {
    pub const ALL: [PcAngle; 4] = [PcAngle::Zero, PcAngle::PlusQuarter, PcAngle::MinusQuarter, PcAngle::Half];

    /// Angle as an integer multiple of π/4.
    pub fn quarter_turns(self) -> i8 {
        match self {
            PcAngle::MinusQuarter => -1,
            PcAngle::Zero => 0,
            PcAngle::PlusQuarter => 1,
            PcAngle::Half => 2,
        }
    }

    pub fn from_quarter_turns(q: i64) -> Result<Self> {
        match q {
            -1 => Ok(PcAngle::MinusQuarter),
            0 => Ok(PcAngle::Zero),
            1 => Ok(PcAngle::PlusQuarter),
            2 => Ok(PcAngle::Half),
            _ => Err(QkdError::DisallowedQuarterTurns(q)),
        }
    }

    pub fn from_radians(rad: f64) -> Result<Self> {
        let q = rad / std::f64::consts::FRAC_PI_4;
        let nearest = q.round();
        if !q.is_finite() || (q - nearest).abs() > 1e-9 {
            return Err(QkdError::DisallowedAngle(rad));
        }
        Self::from_quarter_turns(nearest as i64).map_err(|_| QkdError::DisallowedAngle(rad))
    }

    pub fn radians<T: Scalar>(self) -> T {
        T::FRAC_PI_4() * T::from_f64_lossy(f64::from(self.quarter_turns()))
    }

    /// Exact `(cos α, sin α)`.
    pub fn cos_sin<T: Scalar>(self) -> (T, T) {
        let r = T::FRAC_1_SQRT_2();
        match self {
            PcAngle::MinusQuarter => (r, -r),
            PcAngle::Zero => (T::one(), T::zero()),
            PcAngle::PlusQuarter => (r, r),
            PcAngle::Half => (T::zero(), T::one()),
        }
    }

    /// `0` or `π/2`: leaves h/v definite.
    pub fn is_rectilinear(self) -> bool {
        matches!(self, PcAngle::Zero | PcAngle::Half)
    }
}

impl From<PcAngle> for i8 {
    fn from(a: PcAngle) -> i8 {
        a.quarter_turns()
    }
}

impl TryFrom<i8> for PcAngle {
    type Error = QkdError;

    fn try_from(q: i8) -> Result<Self> {
        Self::from_quarter_turns(i64::from(q))
    }
}

impl fmt::Display for PcAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PcAngle::MinusQuarter => "-π/4",
            PcAngle::Zero => "0",
            PcAngle::PlusQuarter => "π/4",
            PcAngle::Half => "π/2",
        })
    }
}

/// Bob's four Pockels-cell settings: `α₁, α₂` outbound on the early/late
/// bins, `α₃, α₄` on the returning early/late bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PcAngles {
    pub a1: PcAngle,
    pub a2: PcAngle,
    pub a3: PcAngle,
    pub a4: PcAngle,
}

impl PcAngles {
    pub fn new(a1: PcAngle, a2: PcAngle, a3: PcAngle, a4: PcAngle) -> Self {
        Self { a1, a2, a3, a4 }
    }

    pub fn from_quarter_turns(q: [i64; 4]) -> Result<Self> {
        Ok(Self::new(
            PcAngle::from_quarter_turns(q[0])?,
            PcAngle::from_quarter_turns(q[1])?,
            PcAngle::from_quarter_turns(q[2])?,
            PcAngle::from_quarter_turns(q[3])?,
        ))
    }

    pub fn quarter_turns(&self) -> [i8; 4] {
        [self.a1, self.a2, self.a3, self.a4].map(PcAngle::quarter_turns)
    }

    /// All 256 combinations in a fixed order.
    pub fn all() -> impl Iterator<Item = PcAngles> {
        PcAngle::ALL.into_iter().flat_map(|a1| {
            PcAngle::ALL.into_iter().flat_map(move |a2| {
                PcAngle::ALL
                    .into_iter()
                    .flat_map(move |a3| PcAngle::ALL.into_iter().map(move |a4| PcAngles::new(a1, a2, a3, a4)))
            })
        })
    }
}

impl fmt::Display for PcAngles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.a1, self.a2, self.a3, self.a4)
    }
}

/// Alice's phase-modulator setting, `0` or `π`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Phase {
    Zero,
    Pi,
}

impl Phase {
    pub fn bit(self) -> u8 {
        match self {
            Phase::Zero => 0,
            Phase::Pi => 1,
        }
    }

    pub fn from_bit(b: bool) -> Self {
        if b {
            Phase::Pi
        } else {
            Phase::Zero
        }
    }

    pub fn from_radians(rad: f64) -> Result<Self> {
        let x = rad.rem_euclid(2.0 * std::f64::consts::PI);
        if x.abs() < 1e-9 || (x - 2.0 * std::f64::consts::PI).abs() < 1e-9 {
            Ok(Phase::Zero)
        } else if (x - std::f64::consts::PI).abs() < 1e-9 {
            Ok(Phase::Pi)
        } else {
            Err(QkdError::DisallowedPhase(rad))
        }
    }

    /// `e^{iφ}`, exactly ±1.
    pub fn factor<T: Scalar>(self) -> Complex<T> {
        match self {
            Phase::Zero => Complex::new(T::one(), T::zero()),
            Phase::Pi => Complex::new(-T::one(), T::zero()),
        }
    }
}

impl From<Phase> for u8 {
    fn from(p: Phase) -> u8 {
        p.bit()
    }
}

impl TryFrom<u8> for Phase {
    type Error = QkdError;

    fn try_from(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Phase::Zero),
            1 => Ok(Phase::Pi),
            _ => Err(QkdError::DisallowedPhase(f64::from(b) * std::f64::consts::PI)),
        }
    }
}

/// Alice's phases `φ₁..φ₄`. `φ₁, φ₂` act on the early bin's h and v inputs,
/// `φ₃, φ₄` on the late bin's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlicePhases(pub [Phase; 4]);

impl AlicePhases {
    pub const ZERO: AlicePhases = AlicePhases([Phase::Zero; 4]);

    /// `φ_i` with 1-based `i`.
    pub fn phi(&self, i: usize) -> Phase {
        self.0[i - 1]
    }

    /// Decodes `index ∈ 0..16`; bit `i−1` of the index is `φ_i`.
    pub fn from_index(index: u8) -> Self {
        Self(std::array::from_fn(|i| Phase::from_bit(index >> i & 1 == 1)))
    }

    pub fn index(&self) -> u8 {
        self.0.iter().enumerate().fold(0, |acc, (i, p)| acc | (p.bit() << i))
    }

    pub fn all() -> impl Iterator<Item = AlicePhases> {
        (0..16).map(Self::from_index)
    }

    pub fn bits(&self) -> [u8; 4] {
        self.0.map(Phase::bit)
    }
}

/// Propagation direction relative to Bob's source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Return,
}

/// Bob's two single-photon counting modules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    #[serde(rename = "SPCM1")]
    Spcm1,
    #[serde(rename = "SPCM2")]
    Spcm2,
}

impl Detector {
    pub const ALL: [Detector; 2] = [Detector::Spcm1, Detector::Spcm2];

    pub fn index(self) -> usize {
        match self {
            Detector::Spcm1 => 0,
            Detector::Spcm2 => 1,
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::Spcm1 => "SPCM1",
            Detector::Spcm2 => "SPCM2",
        })
    }
}

/// Amplitudes at the two detectors for each of the three detection bins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorAmplitudes<T> {
    amps: [[Complex<T>; 2]; DETECTION_BINS],
}

impl<T: Scalar> DetectorAmplitudes<T> {
    pub fn zero() -> Self {
        Self {
            amps: [[Complex::new(T::zero(), T::zero()); 2]; DETECTION_BINS],
        }
    }

    pub fn get(&self, bin: usize, det: Detector) -> Complex<T> {
        self.amps[bin][det.index()]
    }

    pub fn probability(&self, bin: usize, det: Detector) -> T {
        self.get(bin, det).norm_sqr()
    }

    pub fn bin_probability(&self, bin: usize) -> T {
        Detector::ALL.iter().fold(T::zero(), |acc, &d| acc + self.probability(bin, d))
    }

    pub fn total_probability(&self) -> T {
        (0..DETECTION_BINS).fold(T::zero(), |acc, k| acc + self.bin_probability(k))
    }

    /// `(bin, detector, probability)` in bin-major order.
    pub fn probabilities(&self) -> impl Iterator<Item = (usize, Detector, T)> + '_ {
        (0..DETECTION_BINS).flat_map(move |k| Detector::ALL.into_iter().map(move |d| (k, d, self.probability(k, d))))
    }
}

/// 50-50 beamsplitter convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitter<T> {
    pub transmission: Complex<T>,
    pub reflection: Complex<T>,
}

impl<T: Scalar> BeamSplitter<T> {
    /// Real transmission, reflection `i`, both scaled by `1/√2`.
    pub fn standard() -> Self {
        let r = T::FRAC_1_SQRT_2();
        Self {
            transmission: Complex::new(r, T::zero()),
            reflection: Complex::new(T::zero(), r),
        }
    }
}

impl<T: Scalar> Default for BeamSplitter<T> {
    fn default() -> Self {
        Self::standard()
    }
}

fn quarter<T: Scalar>(q: i8) -> JonesMatrix<T> {
    let (c, s) = PcAngle::from_quarter_turns(i64::from(q))
        .expect("fixed element angle")
        .cos_sin::<T>();
    JonesMatrix::rotation_cs(c, s)
}

/// Half-wave retarder Ĥ₁ in the long arm: `h → v` outbound, `v → −h` on return.
pub fn half_wave_h1<T: Scalar>(_dir: Direction) -> JonesMatrix<T> {
    quarter(2)
}

pub fn apply_half_wave_h1<T: Scalar>(pol: &JonesVector<T>, returning: bool) -> JonesVector<T> {
    let dir = if returning { Direction::Return } else { Direction::Forward };
    half_wave_h1(dir).apply(pol)
}

/// Half-wave retarder Ĥ₀: undoes the Faraday rotation outbound, adds to it on return.
pub fn half_wave_h0<T: Scalar>(dir: Direction) -> JonesMatrix<T> {
    match dir {
        Direction::Forward => quarter(-1),
        Direction::Return => quarter(1),
    }
}

/// 45° Faraday rotator: non-reciprocal, same sense both ways in Bob's frame.
pub fn faraday_45<T: Scalar>(_dir: Direction) -> JonesMatrix<T> {
    quarter(1)
}

/// Half-wave retarder Ĥ_A in Alice's loop.
pub fn half_wave_alice<T: Scalar>() -> JonesMatrix<T> {
    quarter(2)
}

/// Pockels cell rotation.
pub fn pockels<T: Scalar>(angle: PcAngle) -> JonesMatrix<T> {
    let (c, s) = angle.cos_sin();
    JonesMatrix::rotation_cs(c, s)
}

/// Amplitudes leaving PBS₁ after the return pass through Ĥ₀ and F̂₄₅.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnRouting<T> {
    /// Reflected (v) port, terminated by SPCM1.
    pub to_spcm1: Complex<T>,
    /// Transmitted (h) port, back toward the source.
    pub to_source: Complex<T>,
}

/// Return path from the beamsplitter through Ĥ₀, F̂₄₅ and PBS₁.
pub fn faraday_h0_return_filter<T: Scalar>(pol: &JonesVector<T>) -> ReturnRouting<T> {
    let m = faraday_45(Direction::Return) * half_wave_h0(Direction::Return);
    let out = m.apply(pol);
    ReturnRouting {
        to_spcm1: out.v,
        to_source: out.h,
    }
}

/// Forward path from PBS₁ through F̂₄₅ and Ĥ₀ toward the beamsplitter.
pub fn source_to_splitter<T: Scalar>(pol: &JonesVector<T>) -> JonesVector<T> {
    (half_wave_h0(Direction::Forward) * faraday_45(Direction::Forward)).apply(pol)
}

/// `Ψ₀`: the source photon split by the interferometer, before the Pockels cells.
pub fn prepare_psi0<T: Scalar>() -> TimeBinnedState<T> {
    prepare_psi0_with(&BeamSplitter::standard())
}

pub fn prepare_psi0_with<T: Scalar>(bs: &BeamSplitter<T>) -> TimeBinnedState<T> {
    let at_bs = source_to_splitter(&JonesVector::horizontal());
    let short = at_bs.scale(bs.transmission);
    let long = half_wave_h1(Direction::Forward).apply(&at_bs.scale(bs.reflection));
    // PBS₂ passes h from the short arm and reflects v from the long arm.
    let early = JonesVector::new(short.h, Complex::new(T::zero(), T::zero()));
    let late = JonesVector::new(Complex::new(T::zero(), T::zero()), long.v);
    TimeBinnedState::from_bins([(0, early), (1, late)]).expect("lossless split stays normalized")
}

/// `Ψ_B`: Ψ₀ with `R(α₁)` on the early bin and `R(α₂)` on the late bin.
pub fn prepare_psi_b<T: Scalar>(a1: PcAngle, a2: PcAngle) -> TimeBinnedState<T> {
    let s = prepare_psi0::<T>();
    s.apply_bin_unitary(0, &pockels(a1))
        .and_then(|s| s.apply_bin_unitary(1, &pockels(a2)))
        .expect("rotations are unitary")
}

/// Radian-valued entry point; rejects angles outside the allowed set.
pub fn prepare_psi_b_radians<T: Scalar>(a1: f64, a2: f64) -> Result<TimeBinnedState<T>> {
    Ok(prepare_psi_b(PcAngle::from_radians(a1)?, PcAngle::from_radians(a2)?))
}

/// Per-bin matrix of the phase-gate switch: `[a, b] → [−e^{iφ_v} b, e^{iφ_h} a]`.
pub fn phase_gate_matrix<T: Scalar>(phi_h: Phase, phi_v: Phase) -> JonesMatrix<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let ha = half_wave_alice::<T>();
    // h input: modulator, then retarder.
    let h_path = ha * JonesMatrix::diagonal(phi_h.factor(), zero);
    // v input: retarder, then modulator (which now sees it as h).
    let v_path = JonesMatrix::diagonal(phi_v.factor(), zero) * ha * JonesMatrix::diagonal(zero, one);
    let mut m = [[zero; 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = h_path.0[r][c] + v_path.0[r][c];
        }
    }
    JonesMatrix(m)
}

/// Alice's phase-gate switch applied per bin. Only bins 0 and 1 may be occupied.
pub fn alice_phase_gate<T: Scalar>(state: &TimeBinnedState<T>, phases: &AlicePhases) -> Result<TimeBinnedState<T>> {
    state.require_bins_within(1)?;
    let early = phase_gate_matrix(phases.phi(1), phases.phi(2));
    let late = phase_gate_matrix(phases.phi(3), phases.phi(4));
    state.apply_bin_unitary(0, &early)?.apply_bin_unitary(1, &late)
}

/// Faraday mirror: a 90° rotation on every bin, independent of any phase.
pub fn faraday_mirror_matrix<T: Scalar>() -> JonesMatrix<T> {
    quarter(2)
}

pub fn faraday_mirror<T: Scalar>(state: &TimeBinnedState<T>) -> Result<TimeBinnedState<T>> {
    state.apply_all_bins(&faraday_mirror_matrix())
}

/// Bob's Pockels cells on the returning photon: `R(α₃)` early, `R(α₄)` late.
pub fn return_through_pcs<T: Scalar>(state: &TimeBinnedState<T>, a3: PcAngle, a4: PcAngle) -> Result<TimeBinnedState<T>> {
    state.require_bins_within(1)?;
    state.apply_bin_unitary(0, &pockels(a3))?.apply_bin_unitary(1, &pockels(a4))
}

/// Interferometer recombination and detection with the standard beamsplitter.
pub fn decode_mzi<T: Scalar>(state: &TimeBinnedState<T>) -> Result<DetectorAmplitudes<T>> {
    decode_mzi_with(state, &BeamSplitter::standard())
}

/// PBS₂ sends h straight through (no delay) and v around the long arm (one
/// bin later, `v → −h` through Ĥ₁). The beamsplitter then mixes both arms;
/// its source-side port reaches SPCM1 via the return filter, the other
/// port is SPCM2.
pub fn decode_mzi_with<T: Scalar>(state: &TimeBinnedState<T>, bs: &BeamSplitter<T>) -> Result<DetectorAmplitudes<T>> {
    state.require_bins_within(1)?;
    let zero = Complex::new(T::zero(), T::zero());
    let h1 = half_wave_h1::<T>(Direction::Return);
    let mut out = DetectorAmplitudes::zero();
    for k in 0..DETECTION_BINS {
        let short = state.get(k as u32).h;
        let long = match k {
            0 => zero,
            _ => h1.apply(&JonesVector::new(zero, state.get(k as u32 - 1).v)).h,
        };
        let source_port = bs.reflection * short + bs.transmission * long;
        let spcm2_port = bs.transmission * short + bs.reflection * long;
        let routed = faraday_h0_return_filter(&JonesVector::new(source_port, zero));
        out.amps[k] = [routed.to_spcm1, spcm2_port];
    }
    Ok(out)
}

/// Full noiseless round trip: prepare, phase gate, return Pockels cells, decode.
pub fn round_trip<T: Scalar>(angles: &PcAngles, phases: &AlicePhases) -> DetectorAmplitudes<T> {
    round_trip_with(angles, phases, &BeamSplitter::standard())
}

pub fn round_trip_with<T: Scalar>(angles: &PcAngles, phases: &AlicePhases, bs: &BeamSplitter<T>) -> DetectorAmplitudes<T> {
    let psi_b = prepare_psi_b::<T>(angles.a1, angles.a2);
    let psi_a = alice_phase_gate(&psi_b, phases).expect("Ψ_B occupies bins 0 and 1");
    let psi_b_prime = return_through_pcs(&psi_a, angles.a3, angles.a4).expect("Ψ_A occupies bins 0 and 1");
    decode_mzi_with(&psi_b_prime, bs).expect("Ψ′_B occupies bins 0 and 1")
}
