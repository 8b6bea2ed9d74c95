//! Exhaustive-enumeration oracle.
//!
//! Every decision rule the protocol uses is derived here by sweeping all 16
//! phase combinations through the exact optics, never written by hand.
//! Protocol rates and attack error rates are exact expectations over the
//! full setting × phase × outcome grid; no sampling is involved.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::channel::{EveAttack, EveBasisChoice, EveStrategy};
use crate::optics::{
    alice_phase_gate, decode_mzi_with, prepare_psi_b, return_through_pcs, round_trip_with, AlicePhases, BeamSplitter,
    Detector, DetectorAmplitudes, PcAngle, PcAngles, Phase, DETECTION_BINS,
};
use crate::protocol::{
    measurement_options, standard_measurement, BasisLabel, ClassWeights, MeasurementClass, MeasurementMode,
};
use crate::qudit::{JonesMatrix, JonesVector, TimeBinnedState};
use crate::scalar::Scalar;
use crate::error::{QkdError, Result};

/// Disturbance level up to which a four-dimensional qudit protocol is known
/// to remain secure.
pub const QUDIT_DISTURBANCE_THRESHOLD: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryClass {
    /// Every phase combination that can produce this click agrees on `basis`.
    Deterministic { basis: BasisLabel, value: Phase },
    Random,
    /// Probability zero for every phase combination.
    Forbidden,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry<T> {
    pub bin: u8,
    pub detector: Detector,
    pub class: EntryClass,
    /// Every basis fixed by this click; `class` reports the first.
    pub determined: Vec<(BasisLabel, Phase)>,
    /// Click probability averaged over uniform phases.
    pub probability: T,
}

/// Click classification for one `(α₁..α₄)` setting.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTable<T> {
    angles: PcAngles,
    entries: Vec<TableEntry<T>>,
}

impl<T: Scalar> DecisionTable<T> {
    pub fn angles(&self) -> PcAngles {
        self.angles
    }

    pub fn entry(&self, bin: usize, det: Detector) -> &TableEntry<T> {
        &self.entries[2 * bin + det.index()]
    }

    pub fn entries(&self) -> &[TableEntry<T>] {
        &self.entries
    }

    pub fn conclusive_bases(&self) -> BTreeSet<BasisLabel> {
        self.entries
            .iter()
            .filter_map(|e| match e.class {
                EntryClass::Deterministic { basis, .. } => Some(basis),
                _ => None,
            })
            .collect()
    }

    /// Exact conclusive probability under uniform phases.
    pub fn conclusive_probability(&self) -> T {
        self.entries
            .iter()
            .filter(|e| matches!(e.class, EntryClass::Deterministic { .. }))
            .fold(T::zero(), |acc, e| acc + e.probability)
    }
}

/// Exact click probabilities for fixed settings and phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeDistribution<T> {
    pub angles: PcAngles,
    pub phases: AlicePhases,
    probs: [[T; 2]; DETECTION_BINS],
}

impl<T: Scalar> OutcomeDistribution<T> {
    fn from_amplitudes(angles: PcAngles, phases: AlicePhases, amps: &DetectorAmplitudes<T>) -> Self {
        let mut probs = [[T::zero(); 2]; DETECTION_BINS];
        for (bin, det, p) in amps.probabilities() {
            probs[bin][det.index()] = p;
        }
        Self { angles, phases, probs }
    }

    pub fn get(&self, bin: usize, det: Detector) -> T {
        self.probs[bin][det.index()]
    }

    pub fn bin_total(&self, bin: usize) -> T {
        self.probs[bin][0] + self.probs[bin][1]
    }

    pub fn total(&self) -> T {
        (0..DETECTION_BINS).fold(T::zero(), |acc, k| acc + self.bin_total(k))
    }
}

/// All 256 decision tables plus the extended-mode alternatives.
#[derive(Clone, Debug)]
pub struct TableSet<T = f64> {
    tables: HashMap<PcAngles, DecisionTable<T>>,
    alternatives: HashMap<(PcAngle, PcAngle), Vec<(PcAngle, PcAngle)>>,
}

impl<T: Scalar> TableSet<T> {
    pub fn get(&self, angles: &PcAngles) -> Result<&DecisionTable<T>> {
        self.tables
            .get(angles)
            .ok_or_else(|| QkdError::MissingTable(angles.to_string()))
    }

    /// Return settings other than the class rule whose table determines an
    /// early-late phase difference at `τ+Δt`.
    pub fn interferometric_alternatives(&self, a1: PcAngle, a2: PcAngle) -> Vec<(PcAngle, PcAngle)> {
        self.alternatives.get(&(a1, a2)).cloned().unwrap_or_default()
    }

    /// Tables in canonical setting order.
    pub fn iter(&self) -> impl Iterator<Item = &DecisionTable<T>> {
        PcAngles::all().map(move |a| &self.tables[&a])
    }
}

/// Eve's branches for an exact expectation: `(probability, resent state)`.
pub fn eve_branches<T: Scalar>(state: &TimeBinnedState<T>, attack: EveAttack) -> Vec<(T, TimeBinnedState<T>)> {
    let bases: Vec<(T, [JonesVector<T>; 2])> = match attack {
        EveAttack::Off => return vec![(T::one(), state.clone())],
        _ if state.is_vacuum() => return vec![(T::one(), state.clone())],
        EveAttack::TimePolProjective
        | EveAttack::PerBinPolarization {
            basis: EveBasisChoice::Rectilinear,
        } => vec![(T::one(), [JonesVector::horizontal(), JonesVector::vertical()])],
        EveAttack::PerBinPolarization {
            basis: EveBasisChoice::Diagonal,
        } => vec![(T::one(), [JonesVector::diagonal(), JonesVector::anti_diagonal()])],
        EveAttack::PerBinPolarization {
            basis: EveBasisChoice::Random,
        } => {
            let half = T::one() / (T::one() + T::one());
            vec![
                (half, [JonesVector::horizontal(), JonesVector::vertical()]),
                (half, [JonesVector::diagonal(), JonesVector::anti_diagonal()]),
            ]
        }
    };
    let mut out = Vec::new();
    for (w, basis) in bases {
        for (bin, pol) in state.bins() {
            for e in basis {
                // Joint projector |bin, e⟩⟨bin, e|.
                let p = e.inner(pol).norm_sqr();
                if p > T::zero() {
                    let resent = TimeBinnedState::new_single(i64::from(bin), e).expect("unit eigenstate");
                    out.push((w * p, resent));
                }
            }
        }
    }
    out
}

/// Deterministic channel effects the exact engine can fold in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactChannel<T> {
    /// Rotation applied on each pass at Alice's station.
    pub misalignment: T,
    pub eve: EveStrategy,
}

impl<T: Scalar> ExactChannel<T> {
    pub fn ideal() -> Self {
        Self {
            misalignment: T::zero(),
            eve: EveStrategy::off(),
        }
    }

    pub fn with_eve(eve: EveStrategy) -> Self {
        Self {
            misalignment: T::zero(),
            eve,
        }
    }
}

/// Exact probability mass for sifting events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactMass<T> {
    pub weight: T,
    pub click: T,
    pub conclusive: T,
    pub error: T,
}

impl<T: Scalar> ExactMass<T> {
    fn zero() -> Self {
        Self {
            weight: T::zero(),
            click: T::zero(),
            conclusive: T::zero(),
            error: T::zero(),
        }
    }

    /// Errors over conclusive clicks.
    pub fn qber(&self) -> T {
        if self.conclusive > T::zero() {
            self.error / self.conclusive
        } else {
            T::zero()
        }
    }

    /// Conclusive over all clicks.
    pub fn efficiency(&self) -> T {
        if self.click > T::zero() {
            self.conclusive / self.click
        } else {
            T::zero()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactStats<T> {
    pub total: ExactMass<T>,
    pub per_class: BTreeMap<MeasurementClass, ExactMass<T>>,
    /// `conclusive` and `error` only; `weight`/`click` are unused.
    pub per_basis: BTreeMap<BasisLabel, ExactMass<T>>,
    pub derivation: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolRates {
    pub eta_p: f64,
    /// Conclusive probability given the class.
    pub per_class: BTreeMap<MeasurementClass, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EveQber {
    pub strategy: EveStrategy,
    pub overall: f64,
    pub per_basis: BTreeMap<BasisLabel, f64>,
    pub conclusive_probability: f64,
    pub threshold: f64,
    pub exceeds_threshold: bool,
    pub derivation: Vec<String>,
}

/// The enumeration engine, parameterized by the beamsplitter convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oracle<T> {
    pub splitter: BeamSplitter<T>,
}

impl<T: Scalar> Default for Oracle<T> {
    fn default() -> Self {
        Self::standard()
    }
}

impl<T: Scalar> Oracle<T> {
    pub fn standard() -> Self {
        Self {
            splitter: BeamSplitter::standard(),
        }
    }

    pub fn with_splitter(splitter: BeamSplitter<T>) -> Self {
        Self { splitter }
    }

    pub fn enumerate_outcome_distribution(&self, angles: &PcAngles, phases: &AlicePhases) -> OutcomeDistribution<T> {
        let amps = round_trip_with(angles, phases, &self.splitter);
        OutcomeDistribution::from_amplitudes(*angles, *phases, &amps)
    }

    pub fn derive_decision_table(&self, angles: &PcAngles) -> DecisionTable<T> {
        let dists: Vec<_> = AlicePhases::all()
            .map(|p| self.enumerate_outcome_distribution(angles, &p))
            .collect();
        let sixteen = T::from_f64_lossy(16.0);
        let mut entries = Vec::with_capacity(2 * DETECTION_BINS);
        for bin in 0..DETECTION_BINS {
            for det in Detector::ALL {
                let support: Vec<&AlicePhases> = dists
                    .iter()
                    .filter(|d| d.get(bin, det) > T::tolerance())
                    .map(|d| &d.phases)
                    .collect();
                let probability = dists.iter().fold(T::zero(), |acc, d| acc + d.get(bin, det)) / sixteen;
                let determined: Vec<(BasisLabel, Phase)> = if support.is_empty() {
                    Vec::new()
                } else {
                    BasisLabel::ALL
                        .into_iter()
                        .filter_map(|b| {
                            let first = b.difference(support[0]);
                            support.iter().all(|p| b.difference(p) == first).then_some((b, first))
                        })
                        .collect()
                };
                let class = match (support.is_empty(), determined.first()) {
                    (true, _) => EntryClass::Forbidden,
                    (false, Some(&(basis, value))) => EntryClass::Deterministic { basis, value },
                    (false, None) => EntryClass::Random,
                };
                entries.push(TableEntry {
                    bin: bin as u8,
                    detector: det,
                    class,
                    determined,
                    probability,
                });
            }
        }
        DecisionTable {
            angles: *angles,
            entries,
        }
    }

    pub fn table_set(&self) -> TableSet<T> {
        let tables: HashMap<_, _> = PcAngles::all().map(|a| (a, self.derive_decision_table(&a))).collect();
        let mut alternatives = HashMap::new();
        for a1 in PcAngle::ALL {
            for a2 in PcAngle::ALL {
                let class = MeasurementClass::classify(a1, a2);
                let standard = standard_measurement(class, a1, a2).expect("classified pair");
                let alts: Vec<_> = PcAngle::ALL
                    .into_iter()
                    .flat_map(|a3| PcAngle::ALL.into_iter().map(move |a4| (a3, a4)))
                    .filter(|&pair| pair != standard)
                    .filter(|&(a3, a4)| {
                        let t = &tables[&PcAngles::new(a1, a2, a3, a4)];
                        Detector::ALL.iter().any(|&d| {
                            matches!(t.entry(1, d).class,
                                EntryClass::Deterministic { basis, .. } if basis.is_interferometric())
                        })
                    })
                    .collect();
                alternatives.insert((a1, a2), alts);
            }
        }
        TableSet { tables, alternatives }
    }

    /// Click distribution after the full channel for fixed settings and phases.
    pub fn channel_outcome(&self, angles: &PcAngles, phases: &AlicePhases, channel: &ExactChannel<T>) -> [[T; 2]; DETECTION_BINS] {
        let rot = JonesMatrix::rotation(channel.misalignment);
        let misalign = |s: &TimeBinnedState<T>| s.apply_all_bins(&rot).expect("rotation is unitary");
        let outbound_attack = if channel.eve.on_bob_to_alice() { channel.eve.attack } else { EveAttack::Off };
        let return_attack = if channel.eve.on_alice_to_bob() { channel.eve.attack } else { EveAttack::Off };

        let mut probs = [[T::zero(); 2]; DETECTION_BINS];
        let psi_b = prepare_psi_b::<T>(angles.a1, angles.a2);
        for (p_out, at_alice) in eve_branches(&psi_b, outbound_attack) {
            let psi_a = alice_phase_gate(&misalign(&at_alice), phases).expect("bins 0 and 1");
            for (p_ret, back) in eve_branches(&misalign(&psi_a), return_attack) {
                let amps = return_through_pcs(&back, angles.a3, angles.a4)
                    .and_then(|s| decode_mzi_with(&s, &self.splitter))
                    .expect("bins 0 and 1");
                for (bin, det, p) in amps.probabilities() {
                    probs[bin][det.index()] = probs[bin][det.index()] + p_out * p_ret * p;
                }
            }
        }
        probs
    }

    /// Exact sifting statistics over classes, settings, uniform phases, the
    /// channel's branches and every click.
    pub fn exact_sifted_stats(
        &self,
        weights: &ClassWeights,
        mode: MeasurementMode,
        channel: &ExactChannel<T>,
    ) -> Result<ExactStats<T>> {
        weights.validate()?;
        let tables = self.table_set();
        let sixteen = T::from_f64_lossy(16.0);
        let mut total = ExactMass::zero();
        let mut per_class: BTreeMap<MeasurementClass, ExactMass<T>> =
            MeasurementClass::ALL.iter().map(|&c| (c, ExactMass::zero())).collect();
        let mut per_basis: BTreeMap<BasisLabel, ExactMass<T>> = BTreeMap::new();
        let mut derivation = Vec::new();

        for ((a1, a2), w_pair) in weights.combo_probabilities() {
            if w_pair <= 0.0 {
                continue;
            }
            let class = MeasurementClass::classify(a1, a2);
            let w_pair = T::from_f64_lossy(w_pair);
            for opt in measurement_options(class, a1, a2, mode, &tables)? {
                let angles = PcAngles::new(a1, a2, opt.a3, opt.a4);
                let table = tables.get(&angles)?;
                let w = w_pair * T::from_f64_lossy(opt.probability);
                let mut local = ExactMass::zero();
                local.weight = w;
                for phases in AlicePhases::all() {
                    let probs = self.channel_outcome(&angles, &phases, channel);
                    for bin in 0..DETECTION_BINS {
                        for det in Detector::ALL {
                            let p = probs[bin][det.index()] * w / sixteen;
                            local.click = local.click + p;
                            if let EntryClass::Deterministic { basis, value } = table.entry(bin, det).class {
                                let wrong = basis.difference(&phases) != value;
                                local.conclusive = local.conclusive + p;
                                let b = per_basis.entry(basis).or_insert_with(ExactMass::zero);
                                b.conclusive = b.conclusive + p;
                                if wrong {
                                    local.error = local.error + p;
                                    b.error = b.error + p;
                                }
                            }
                        }
                    }
                }
                derivation.push(format!(
                    "{class} {angles} w={:.6} P(click)={:.12} P(conclusive)={:.12} P(error)={:.12}",
                    w.to_f64().unwrap_or(f64::NAN),
                    local.click.to_f64().unwrap_or(f64::NAN),
                    local.conclusive.to_f64().unwrap_or(f64::NAN),
                    local.error.to_f64().unwrap_or(f64::NAN),
                ));
                for m in [&mut total, per_class.get_mut(&class).expect("all classes present")] {
                    m.weight = m.weight + local.weight;
                    m.click = m.click + local.click;
                    m.conclusive = m.conclusive + local.conclusive;
                    m.error = m.error + local.error;
                }
            }
        }
        Ok(ExactStats {
            total,
            per_class,
            per_basis,
            derivation,
        })
    }

    /// Exact `η_p` and per-class conclusive probabilities on the ideal channel.
    pub fn exact_protocol_rates(&self, weights: &ClassWeights, mode: MeasurementMode) -> Result<ProtocolRates> {
        let stats = self.exact_sifted_stats(weights, mode, &ExactChannel::ideal())?;
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        Ok(ProtocolRates {
            eta_p: f(stats.total.efficiency()),
            per_class: MeasurementClass::ALL
                .iter()
                .map(|&c| {
                    // Class efficiency does not depend on the weights; evaluate it
                    // for every class, even ones with zero weight.
                    let m = &stats.per_class[&c];
                    let eta = if m.weight > T::zero() {
                        f(m.efficiency())
                    } else {
                        self.class_efficiency(c, mode).unwrap_or(f64::NAN)
                    };
                    (c, eta)
                })
                .collect(),
        })
    }

    fn class_efficiency(&self, class: MeasurementClass, mode: MeasurementMode) -> Result<f64> {
        let weights = match class {
            MeasurementClass::Class1 => ClassWeights::new(1.0, 0.0, 0.0)?,
            MeasurementClass::Class2 => ClassWeights::new(0.0, 1.0, 0.0)?,
            MeasurementClass::Class3 => ClassWeights::new(0.0, 0.0, 1.0)?,
        };
        let stats = self.exact_sifted_stats(&weights, mode, &ExactChannel::ideal())?;
        Ok(stats.total.efficiency().to_f64().unwrap_or(f64::NAN))
    }

    /// Exact sifted QBER under an intercept-resend attack on a lossless channel.
    pub fn exact_eve_qber(&self, strategy: EveStrategy, weights: &ClassWeights, mode: MeasurementMode) -> Result<EveQber> {
        let stats = self.exact_sifted_stats(weights, mode, &ExactChannel::with_eve(strategy))?;
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        let overall = f(stats.total.qber());
        let mut derivation = vec![format!(
            "attack={} leg={} mode={:?} weights=({}, {}, {})",
            strategy.attack, strategy.leg, mode, weights.class1, weights.class2, weights.class3
        )];
        derivation.extend(stats.derivation);
        for (b, m) in &stats.per_basis {
            derivation.push(format!(
                "{b}: P(conclusive)={:.12} P(error)={:.12} QBER={:.12}",
                f(m.conclusive),
                f(m.error),
                f(m.qber())
            ));
        }
        derivation.push(format!(
            "overall: P(conclusive)={:.12} P(error)={:.12} QBER={overall:.12} threshold={QUDIT_DISTURBANCE_THRESHOLD}",
            f(stats.total.conclusive),
            f(stats.total.error)
        ));
        Ok(EveQber {
            strategy,
            overall,
            per_basis: stats.per_basis.iter().map(|(b, m)| (*b, f(m.qber()))).collect(),
            conclusive_probability: f(stats.total.conclusive),
            threshold: QUDIT_DISTURBANCE_THRESHOLD,
            exceeds_threshold: overall > QUDIT_DISTURBANCE_THRESHOLD,
            derivation,
        })
    }
}

/// One exported table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntryJson {
    pub bin: u8,
    pub detector: Detector,
    pub classification: String,
    pub basis: Option<BasisLabel>,
    /// Phase difference in units of π.
    pub value: Option<u8>,
    pub probability: f64,
}

/// Settings key (quarter turns, comma separated) → table rows.
pub fn tables_to_json<T: Scalar>(tables: &TableSet<T>) -> BTreeMap<String, Vec<TableEntryJson>> {
    tables
        .iter()
        .map(|t| {
            let q = t.angles().quarter_turns();
            let key = format!("{},{},{},{}", q[0], q[1], q[2], q[3]);
            let rows = t
                .entries()
                .iter()
                .map(|e| {
                    let (classification, basis, value) = match e.class {
                        EntryClass::Deterministic { basis, value } => ("deterministic", Some(basis), Some(value.bit())),
                        EntryClass::Random => ("random", None, None),
                        EntryClass::Forbidden => ("forbidden", None, None),
                    };
                    TableEntryJson {
                        bin: e.bin,
                        detector: e.detector,
                        classification: classification.to_string(),
                        basis,
                        value,
                        probability: e.probability.to_f64().unwrap_or(f64::NAN),
                    }
                })
                .collect();
            (key, rows)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::EveLeg;
    use PcAngle::*;

    const TOL: f64 = 1e-12;

    fn oracle() -> Oracle<f64> {
        Oracle::standard()
    }

    #[test]
    fn outcome_distribution_examples() {
        let o = oracle();
        let c1 = PcAngles::new(Zero, Zero, Zero, Zero);
        let d = o.enumerate_outcome_distribution(&c1, &AlicePhases::ZERO);
        assert!((d.get(1, Detector::Spcm2) - 1.0).abs() < TOL);
        assert!((d.total() - 1.0).abs() < TOL);

        let c2 = PcAngles::new(Zero, PlusQuarter, Half, PlusQuarter);
        let d = o.enumerate_outcome_distribution(&c2, &AlicePhases::from_index(0b1100));
        for det in Detector::ALL {
            assert!((d.get(0, det) - 0.25).abs() < TOL);
            assert!((d.get(2, det) - 0.25).abs() < TOL);
        }

        let c3 = PcAngles::new(PlusQuarter, MinusQuarter, PlusQuarter, PlusQuarter);
        let d = o.enumerate_outcome_distribution(&c3, &AlicePhases::ZERO);
        assert!((d.bin_total(0) - 0.5).abs() < TOL);
        assert!((d.get(0, Detector::Spcm1) - 0.25).abs() < TOL);
        assert!((d.bin_total(1) - 0.5).abs() < TOL);
        assert!(d.bin_total(2) < TOL);
    }

    #[test]
    fn class2_example_table() {
        let t = oracle().derive_decision_table(&PcAngles::new(Zero, PlusQuarter, Half, PlusQuarter));
        for det in Detector::ALL {
            assert_eq!(t.entry(0, det).class, EntryClass::Random);
            assert_eq!(
                t.entry(1, det).class,
                EntryClass::Deterministic {
                    basis: BasisLabel::D43,
                    value: Phase::Pi
                }
            );
            assert_eq!(
                t.entry(2, det).class,
                EntryClass::Deterministic {
                    basis: BasisLabel::D43,
                    value: Phase::Zero
                }
            );
        }
    }

    #[test]
    fn class1_table() {
        let t = oracle().derive_decision_table(&PcAngles::new(Zero, Zero, Zero, Zero));
        for det in Detector::ALL {
            assert_eq!(t.entry(0, det).class, EntryClass::Forbidden);
            assert_eq!(t.entry(2, det).class, EntryClass::Forbidden);
        }
        assert_eq!(
            t.entry(1, Detector::Spcm2).class,
            EntryClass::Deterministic {
                basis: BasisLabel::D41,
                value: Phase::Zero
            }
        );
        assert_eq!(
            t.entry(1, Detector::Spcm1).class,
            EntryClass::Deterministic {
                basis: BasisLabel::D41,
                value: Phase::Pi
            }
        );
    }

    #[test]
    fn derived_tables_agree_with_alice() {
        // Self-consistency for a setting with no hand-written expectation,
        // then for every setting.
        let o = oracle();
        for angles in std::iter::once(PcAngles::new(Zero, Zero, Half, Half)).chain(PcAngles::all()) {
            let t = o.derive_decision_table(&angles);
            for phases in AlicePhases::all() {
                let d = o.enumerate_outcome_distribution(&angles, &phases);
                for e in t.entries() {
                    let p = d.get(e.bin as usize, e.detector);
                    match e.class {
                        EntryClass::Forbidden => assert!(p < TOL),
                        EntryClass::Deterministic { basis, value } if p > TOL => {
                            assert_eq!(crate::protocol::alice_bit_for(basis, &phases), value.bit());
                        }
                        _ => {}
                    }
                }
            }
        }
    }

    #[test]
    fn tables_are_reproducible() {
        let a = serde_json::to_string(&tables_to_json(&oracle().table_set())).unwrap();
        let b = serde_json::to_string(&tables_to_json(&oracle().table_set())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rates() {
        let o = oracle();
        let r = o.exact_protocol_rates(&ClassWeights::default(), MeasurementMode::Standard).unwrap();
        assert!((r.eta_p - 0.75).abs() < TOL);
        assert!((r.per_class[&MeasurementClass::Class1] - 1.0).abs() < TOL);
        assert!((r.per_class[&MeasurementClass::Class2] - 0.5).abs() < TOL);
        assert!((r.per_class[&MeasurementClass::Class3] - 0.5).abs() < TOL);
        let r = o.exact_protocol_rates(&ClassWeights::uniform16(), MeasurementMode::Standard).unwrap();
        assert!((r.eta_p - 0.625).abs() < TOL);
        let r = o.exact_protocol_rates(&ClassWeights::class1_only(), MeasurementMode::Standard).unwrap();
        assert!((r.eta_p - 1.0).abs() < TOL);
        assert!((r.per_class[&MeasurementClass::Class3] - 0.5).abs() < TOL);
    }

    #[test]
    fn eve_off_has_no_errors() {
        let q = oracle()
            .exact_eve_qber(EveStrategy::off(), &ClassWeights::default(), MeasurementMode::Standard)
            .unwrap();
        assert_eq!(q.overall, 0.0);
        assert!(!q.exceeds_threshold);
    }

    #[test]
    fn eve_branches_sum_to_one() {
        let psi = prepare_psi_b::<f64>(PlusQuarter, MinusQuarter);
        for attack in [
            EveAttack::TimePolProjective,
            EveAttack::PerBinPolarization {
                basis: EveBasisChoice::Random,
            },
            EveAttack::PerBinPolarization {
                basis: EveBasisChoice::Diagonal,
            },
        ] {
            let total: f64 = eve_branches(&psi, attack).iter().map(|(p, _)| p).sum();
            assert!((total - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn both_legs_at_least_one_leg() {
        let o = oracle();
        let w = ClassWeights::default();
        for attack in [
            EveAttack::TimePolProjective,
            EveAttack::PerBinPolarization {
                basis: EveBasisChoice::Random,
            },
        ] {
            let q = |leg| o.exact_eve_qber(EveStrategy::new(attack, leg), &w, MeasurementMode::Standard).unwrap();
            let both = q(EveLeg::Both);
            for leg in [EveLeg::BobToAlice, EveLeg::AliceToBob] {
                let one = q(leg);
                assert!(both.overall >= one.overall - TOL, "{attack} {leg}: {} < {}", both.overall, one.overall);
                for (b, v) in &one.per_basis {
                    assert!(both.per_basis[b] >= v - TOL, "{attack} {leg} {b}");
                }
            }
        }
    }
}
