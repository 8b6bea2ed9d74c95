//! Protocol layer: Bob's class and setting choices, outcome interpretation
//! against derived decision tables, sifting and QBER estimation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QkdError, Result};
use crate::oracle::{DecisionTable, EntryClass, TableSet};
use crate::optics::{AlicePhases, Detector, PcAngle, PcAngles, Phase};
use crate::rng::round_rng;
use crate::scalar::Scalar;

/// Bob's measurement class, fixed by the outbound angles `(α₁, α₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasurementClass {
    Class1,
    Class2,
    Class3,
}

impl MeasurementClass {
    pub const ALL: [MeasurementClass; 3] = [MeasurementClass::Class1, MeasurementClass::Class2, MeasurementClass::Class3];

    pub fn classify(a1: PcAngle, a2: PcAngle) -> Self {
        match (a1.is_rectilinear(), a2.is_rectilinear()) {
            (true, true) => MeasurementClass::Class1,
            (false, false) => MeasurementClass::Class3,
            _ => MeasurementClass::Class2,
        }
    }

    /// The `(α₁, α₂)` pairs belonging to this class, in a fixed order.
    pub fn combos(self) -> Vec<(PcAngle, PcAngle)> {
        outbound_pairs().filter(|&(a1, a2)| Self::classify(a1, a2) == self).collect()
    }

    pub fn number(self) -> u8 {
        match self {
            MeasurementClass::Class1 => 1,
            MeasurementClass::Class2 => 2,
            MeasurementClass::Class3 => 3,
        }
    }
}

impl fmt::Display for MeasurementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "class{}", self.number())
    }
}

/// All 16 outbound `(α₁, α₂)` pairs.
pub fn outbound_pairs() -> impl Iterator<Item = (PcAngle, PcAngle)> {
    PcAngle::ALL
        .into_iter()
        .flat_map(|a1| PcAngle::ALL.into_iter().map(move |a2| (a1, a2)))
}

/// Phase-difference basis `Δφ_ij = φ_i − φ_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisLabel {
    #[serde(rename = "dphi21")]
    D21,
    #[serde(rename = "dphi31")]
    D31,
    #[serde(rename = "dphi41")]
    D41,
    #[serde(rename = "dphi32")]
    D32,
    #[serde(rename = "dphi42")]
    D42,
    #[serde(rename = "dphi43")]
    D43,
}

impl BasisLabel {
    pub const ALL: [BasisLabel; 6] = [
        BasisLabel::D21,
        BasisLabel::D31,
        BasisLabel::D41,
        BasisLabel::D32,
        BasisLabel::D42,
        BasisLabel::D43,
    ];

    /// `(i, j)`, 1-based.
    pub fn indices(self) -> (usize, usize) {
        match self {
            BasisLabel::D21 => (2, 1),
            BasisLabel::D31 => (3, 1),
            BasisLabel::D41 => (4, 1),
            BasisLabel::D32 => (3, 2),
            BasisLabel::D42 => (4, 2),
            BasisLabel::D43 => (4, 3),
        }
    }

    /// Differences between an early-bin and a late-bin phase; these need
    /// interference at `τ+Δt`.
    pub fn is_interferometric(self) -> bool {
        !matches!(self, BasisLabel::D21 | BasisLabel::D43)
    }

    pub fn difference(self, phases: &AlicePhases) -> Phase {
        let (i, j) = self.indices();
        Phase::from_bit(phases.phi(i) != phases.phi(j))
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.indices();
        write!(f, "Δφ{i}{j}")
    }
}

/// Alice's key bit for an announced basis: `0` for `Δφ = 0`, `1` for `Δφ = π`.
pub fn alice_bit_for(basis: BasisLabel, phases: &AlicePhases) -> u8 {
    basis.difference(phases).bit()
}

/// How Bob reads one detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpretation {
    Conclusive { basis: BasisLabel, bit: u8 },
    Inconclusive,
    Discard,
}

impl Interpretation {
    pub fn is_conclusive(&self) -> bool {
        matches!(self, Interpretation::Conclusive { .. })
    }

    fn label(&self) -> &'static str {
        match self {
            Interpretation::Conclusive { .. } => "conclusive",
            Interpretation::Inconclusive => "inconclusive",
            Interpretation::Discard => "discard",
        }
    }
}

/// A click in detection bin `bin ∈ {0, 1, 2}` on one detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub bin: u8,
    pub detector: Detector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionOutcome {
    NoClick,
    Click(DetectionEvent),
    /// More than one (bin, detector) slot fired.
    MultiClick,
}

/// Class-weight configuration; weights are uniform within each class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub class1: f64,
    pub class2: f64,
    pub class3: f64,
}

impl Default for ClassWeights {
    /// Class 1 gets half the rounds, the other twelve pairs share the rest.
    fn default() -> Self {
        Self {
            class1: 0.5,
            class2: 1.0 / 3.0,
            class3: 1.0 / 6.0,
        }
    }
}

impl ClassWeights {
    pub fn new(class1: f64, class2: f64, class3: f64) -> Result<Self> {
        let w = Self { class1, class2, class3 };
        w.validate()?;
        Ok(w)
    }

    /// Every one of the 16 outbound pairs equally likely.
    pub fn uniform16() -> Self {
        Self {
            class1: 0.25,
            class2: 0.5,
            class3: 0.25,
        }
    }

    pub fn class1_only() -> Self {
        Self {
            class1: 1.0,
            class2: 0.0,
            class3: 0.0,
        }
    }

    pub fn weight(&self, class: MeasurementClass) -> f64 {
        match class {
            MeasurementClass::Class1 => self.class1,
            MeasurementClass::Class2 => self.class2,
            MeasurementClass::Class3 => self.class3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.class1, self.class2, self.class3];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(QkdError::InvalidWeights(format!("negative or non-finite weight in {ws:?}")));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(QkdError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Probability of each outbound pair.
    pub fn combo_probabilities(&self) -> Vec<((PcAngle, PcAngle), f64)> {
        outbound_pairs()
            .map(|(a1, a2)| {
                let class = MeasurementClass::classify(a1, a2);
                let size = class.combos().len() as f64;
                ((a1, a2), self.weight(class) / size)
            })
            .collect()
    }

    /// Parses `default`, `uniform16`, `class1`, or `w1,w2,w3`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "default" => Ok(Self::default()),
            "uniform16" | "uniform" => Ok(Self::uniform16()),
            "class1" => Ok(Self::class1_only()),
            other => {
                let parts: Vec<f64> = other
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| QkdError::InvalidWeights(format!("{other:?}: {e}")))?;
                match parts.as_slice() {
                    [a, b, c] => Self::new(*a, *b, *c),
                    _ => Err(QkdError::InvalidWeights(format!("{other:?}: expected three comma-separated weights"))),
                }
            }
        }
    }
}

/// Bob's outbound choice for one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BobChoice {
    pub class: MeasurementClass,
    pub a1: PcAngle,
    pub a2: PcAngle,
}

/// Draws `(class, α₁, α₂)` from the weight configuration.
pub fn choose_bob_settings<R: Rng + ?Sized>(rng: &mut R, weights: &ClassWeights) -> Result<BobChoice> {
    weights.validate()?;
    let combos = weights.combo_probabilities();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = None;
    for &(pair, p) in &combos {
        if p > 0.0 {
            pick = Some(pair);
            acc += p;
            if u < acc {
                break;
            }
        }
    }
    let (a1, a2) = pick.expect("validated weights have positive mass");
    Ok(BobChoice {
        class: MeasurementClass::classify(a1, a2),
        a1,
        a2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    #[default]
    Standard,
    Extended,
}

impl std::str::FromStr for MeasurementMode {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(MeasurementMode::Standard),
            "extended" => Ok(MeasurementMode::Extended),
            _ => Err(QkdError::InvalidConfig(format!("unknown mode {s:?}"))),
        }
    }
}

/// The deterministic class rule for the returning Pockels cells.
pub fn standard_measurement(class: MeasurementClass, a1: PcAngle, a2: PcAngle) -> Result<(PcAngle, PcAngle)> {
    use PcAngle::*;
    if MeasurementClass::classify(a1, a2) != class {
        return Err(QkdError::ClassMismatch(a1.quarter_turns(), a2.quarter_turns(), class.to_string()));
    }
    let swap = |a: PcAngle| if a == Zero { Half } else { Zero };
    Ok(match class {
        MeasurementClass::Class1 => (a1, a2),
        // Send the definite bin to the side slot, open the other to interference.
        MeasurementClass::Class2 if a1.is_rectilinear() => (swap(a1), PlusQuarter),
        MeasurementClass::Class2 => (PlusQuarter, swap(a2)),
        MeasurementClass::Class3 => (PlusQuarter, PlusQuarter),
    })
}

/// One possible return setting with its selection probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementOption {
    pub a3: PcAngle,
    pub a4: PcAngle,
    pub probability: f64,
}

/// Distribution over `(α₃, α₄)` for a given outbound choice.
///
/// Standard mode is the class rule with probability 1. Extended mode keeps
/// the class rule for class 1; for classes 2 and 3 it uses the class rule
/// half the time and otherwise a uniformly chosen alternative whose derived
/// table yields an interferometric phase difference at `τ+Δt`.
pub fn measurement_options<T: Scalar>(
    class: MeasurementClass,
    a1: PcAngle,
    a2: PcAngle,
    mode: MeasurementMode,
    tables: &TableSet<T>,
) -> Result<Vec<MeasurementOption>> {
    let (a3, a4) = standard_measurement(class, a1, a2)?;
    let alternatives = match (mode, class) {
        (MeasurementMode::Standard, _) | (MeasurementMode::Extended, MeasurementClass::Class1) => Vec::new(),
        (MeasurementMode::Extended, _) => tables.interferometric_alternatives(a1, a2),
    };
    if alternatives.is_empty() {
        return Ok(vec![MeasurementOption { a3, a4, probability: 1.0 }]);
    }
    let share = 0.5 / alternatives.len() as f64;
    let mut out = vec![MeasurementOption { a3, a4, probability: 0.5 }];
    out.extend(alternatives.into_iter().map(|(a3, a4)| MeasurementOption { a3, a4, probability: share }));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementChoice {
    pub a3: PcAngle,
    pub a4: PcAngle,
    /// Bases this setting can conclusively determine.
    pub targets: Vec<BasisLabel>,
}

pub fn choose_measurement<R: Rng + ?Sized>(
    class: MeasurementClass,
    a1: PcAngle,
    a2: PcAngle,
    rng: &mut R,
    mode: MeasurementMode,
    tables: &TableSet,
) -> Result<MeasurementChoice> {
    let options = measurement_options(class, a1, a2, mode, tables)?;
    let pick = if options.len() == 1 {
        options[0]
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        *options
            .iter()
            .find(|o| {
                acc += o.probability;
                u < acc
            })
            .unwrap_or_else(|| options.last().expect("non-empty"))
    };
    let angles = PcAngles::new(a1, a2, pick.a3, pick.a4);
    let targets = tables.get(&angles)?.conclusive_bases().into_iter().collect();
    Ok(MeasurementChoice {
        a3: pick.a3,
        a4: pick.a4,
        targets,
    })
}

/// Reads a detection against the decision table for these exact settings.
///
/// Random entries are discarded in class 2 (clicks from the definite bin)
/// and inconclusive otherwise. A click on a forbidden entry can only come
/// from noise or tampering and is discarded.
pub fn interpret_detection(
    class: MeasurementClass,
    angles: &PcAngles,
    event: DetectionEvent,
    table: &DecisionTable<f64>,
) -> Result<Interpretation> {
    if table.angles() != *angles {
        return Err(QkdError::MissingTable(angles.to_string()));
    }
    if usize::from(event.bin) >= crate::optics::DETECTION_BINS {
        return Err(QkdError::EventOutOfDomain(event.bin));
    }
    Ok(match table.entry(usize::from(event.bin), event.detector).class {
        EntryClass::Deterministic { basis, value } => Interpretation::Conclusive { basis, bit: value.bit() },
        EntryClass::Random if class == MeasurementClass::Class2 => Interpretation::Discard,
        EntryClass::Random => Interpretation::Inconclusive,
        EntryClass::Forbidden => Interpretation::Discard,
    })
}

/// Public sifting message: the round (relative time τ) and the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub round: u64,
    pub basis: BasisLabel,
}

/// Announcement for a round; depends only on the round index and Bob's reading.
pub fn announce(round: u64, interpretation: &Interpretation) -> Option<Announcement> {
    match *interpretation {
        Interpretation::Conclusive { basis, .. } => Some(Announcement { round, basis }),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub class: MeasurementClass,
    pub angles: PcAngles,
    /// Copy of Alice's private phases, kept for logging only.
    pub phases: AlicePhases,
    pub outcome: DetectionOutcome,
    pub interpretation: Interpretation,
    pub announcement: Option<Announcement>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisCounts {
    pub sifted: u64,
    pub errors: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiftResult {
    /// Bob's key after removing sacrificed positions.
    pub bob_key: Vec<u8>,
    pub alice_key: Vec<u8>,
    /// Conclusive rounds over all rounds.
    pub sifted_rate: f64,
    pub sacrificed: u64,
    pub sacrificed_errors: u64,
    /// `sacrificed_errors / sacrificed`, `None` if nothing was sacrificed.
    pub qber_estimate: Option<f64>,
    /// Per-basis counts over every sifted position, sacrificed or not.
    pub per_basis: BTreeMap<BasisLabel, BasisCounts>,
}

impl SiftResult {
    pub fn sifted_total(&self) -> u64 {
        self.per_basis.values().map(|c| c.sifted).sum()
    }

    pub fn errors_total(&self) -> u64 {
        self.per_basis.values().map(|c| c.errors).sum()
    }

    /// Error rate over the whole sifted key.
    pub fn qber_full(&self) -> f64 {
        let n = self.sifted_total();
        if n == 0 {
            0.0
        } else {
            self.errors_total() as f64 / n as f64
        }
    }
}

const SACRIFICE_SALT: u64 = 0x5AC2_1F1C_E000_0001;

/// Sifts conclusive rounds into keys and estimates the QBER on a random
/// `sacrifice_fraction` of them. `alice_log[r]` holds Alice's phases for round `r`.
pub fn sift(records: &[RoundRecord], alice_log: &[AlicePhases], sacrifice_fraction: f64, seed: u64) -> Result<SiftResult> {
    if !(0.0..1.0).contains(&sacrifice_fraction) {
        return Err(QkdError::InvalidConfig(format!("sacrifice fraction {sacrifice_fraction} not in [0, 1)")));
    }
    if records.len() != alice_log.len() {
        return Err(QkdError::MisalignedLogs(format!(
            "{} records vs {} phase entries",
            records.len(),
            alice_log.len()
        )));
    }
    let mut out = SiftResult {
        bob_key: Vec::new(),
        alice_key: Vec::new(),
        sifted_rate: 0.0,
        sacrificed: 0,
        sacrificed_errors: 0,
        qber_estimate: None,
        per_basis: BTreeMap::new(),
    };
    for (idx, rec) in records.iter().enumerate() {
        if rec.round != idx as u64 {
            return Err(QkdError::MisalignedLogs(format!("record {idx} carries round {}", rec.round)));
        }
        let (Some(ann), Interpretation::Conclusive { bit: bob_bit, .. }) = (rec.announcement, rec.interpretation) else {
            continue;
        };
        let alice_bit = alice_bit_for(ann.basis, &alice_log[idx]);
        let wrong = alice_bit != bob_bit;
        let counts = out.per_basis.entry(ann.basis).or_default();
        counts.sifted += 1;
        counts.errors += u64::from(wrong);
        let sacrifice = sacrifice_fraction > 0.0 && round_rng(seed ^ SACRIFICE_SALT, ann.round).random_bool(sacrifice_fraction);
        if sacrifice {
            out.sacrificed += 1;
            out.sacrificed_errors += u64::from(wrong);
        } else {
            out.bob_key.push(bob_bit);
            out.alice_key.push(alice_bit);
        }
    }
    if !records.is_empty() {
        out.sifted_rate = out.sifted_total() as f64 / records.len() as f64;
    }
    if out.sacrificed > 0 {
        out.qber_estimate = Some(out.sacrificed_errors as f64 / out.sacrificed as f64);
    }
    Ok(out)
}

/// Writes one CSV row per round.
pub fn write_round_log<W: Write>(records: &[RoundRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "round",
        "class",
        "a1",
        "a2",
        "a3",
        "a4",
        "phi1",
        "phi2",
        "phi3",
        "phi4",
        "bin",
        "detector",
        "interpretation",
        "bit",
    ])?;
    for r in records {
        let q = r.angles.quarter_turns();
        let p = r.phases.bits();
        let (bin, det) = match r.outcome {
            DetectionOutcome::Click(e) => (e.bin.to_string(), e.detector.to_string()),
            DetectionOutcome::NoClick => (String::new(), "none".to_string()),
            DetectionOutcome::MultiClick => (String::new(), "multi".to_string()),
        };
        let bit = match r.interpretation {
            Interpretation::Conclusive { bit, .. } => bit.to_string(),
            _ => String::new(),
        };
        let mut row = vec![r.round.to_string(), r.class.number().to_string()];
        row.extend(q.iter().map(|x| x.to_string()));
        row.extend(p.iter().map(|x| x.to_string()));
        row.extend([bin, det, r.interpretation.label().to_string(), bit]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
