//! Run configuration, Monte Carlo execution, reporting and the verification
//! sweep. This is the only module that touches the filesystem.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelParams, EveAttack, EveBasisChoice, EveLeg, EveStrategy};
use crate::closed_form;
use crate::error::QkdError;
use crate::optics::{
    self, alice_phase_gate, decode_mzi_with, faraday_mirror_matrix, phase_gate_matrix, prepare_psi_b,
    return_through_pcs, AlicePhases, Detector, Direction, PcAngle, PcAngles, Phase, DETECTION_BINS,
};
use crate::oracle::{tables_to_json, EntryClass, ExactChannel, Oracle, ProtocolRates, QUDIT_DISTURBANCE_THRESHOLD};
use crate::protocol::{alice_bit_for, sift, BasisLabel, ClassWeights, DetectionOutcome, Interpretation, MeasurementClass, MeasurementMode};
use crate::qudit::JonesMatrix;
use crate::simulation::{alice_log, simulate, SimParams};

pub const REPORT_SCHEMA: &str = "tbqkd.run-report/v1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Invalid(#[from] QkdError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// 1 for invalid input, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invalid(_) | HarnessError::Pool(_) => 1,
            HarnessError::Io { .. } | HarnessError::Csv(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rounds: u64,
    pub master_seed: u64,
    pub weights: ClassWeights,
    pub mode: MeasurementMode,
    pub channel: ChannelParams,
    pub eve: EveStrategy,
    pub sacrifice_fraction: f64,
    /// Not echoed in the report.
    #[serde(skip_serializing)]
    pub report_path: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub csv_log_path: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool. Not echoed in the report.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rounds: 100_000,
            master_seed: 0,
            weights: ClassWeights::default(),
            mode: MeasurementMode::Standard,
            channel: ChannelParams::ideal(),
            eve: EveStrategy::off(),
            sacrifice_fraction: 0.1,
            report_path: None,
            csv_log_path: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| QkdError::InvalidConfig(format!("{}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> Result<(), QkdError> {
        if self.rounds < 1 {
            return Err(QkdError::InvalidConfig("rounds must be at least 1".into()));
        }
        self.weights.validate()?;
        self.channel.validate()?;
        if !(0.0..1.0).contains(&self.sacrifice_fraction) {
            return Err(QkdError::InvalidConfig(format!(
                "sacrifice fraction {} not in [0, 1)",
                self.sacrifice_fraction
            )));
        }
        if self.threads == Some(0) {
            return Err(QkdError::InvalidConfig("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            rounds: self.rounds,
            seed: self.master_seed,
            weights: self.weights,
            mode: self.mode,
            channel: self.channel,
            eve: self.eve,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OutcomeCounts {
    pub rounds: u64,
    pub conclusive: u64,
    pub inconclusive: u64,
    /// Clicks that were discarded, including multi-clicks.
    pub discard: u64,
    pub no_click: u64,
    pub multi_click: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisSummary {
    pub sifted: u64,
    pub errors: u64,
    pub qber: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiftSummary {
    pub sifted_bits: u64,
    pub sacrificed: u64,
    pub key_length: u64,
    pub keys_identical: bool,
    /// Estimated from the sacrificed bits only.
    pub qber_estimate: Option<f64>,
    /// Over every sifted bit.
    pub qber_overall: f64,
    pub per_basis: BTreeMap<BasisLabel, BasisSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ClassSummary {
    pub rounds: u64,
    pub clicks: u64,
    pub conclusive: u64,
    pub errors: u64,
}

/// Exact-versus-empirical comparison for one proportion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub exact: f64,
    pub empirical: f64,
    pub trials: u64,
    pub sigma: f64,
    /// `None` when the exact value makes the binomial variance zero.
    pub z: Option<f64>,
    pub within_3_sigma: bool,
}

impl Comparison {
    pub fn new(exact: f64, successes: u64, trials: u64) -> Self {
        let empirical = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let sigma = if trials == 0 {
            0.0
        } else {
            (exact * (1.0 - exact) / trials as f64).max(0.0).sqrt()
        };
        let diff = (empirical - exact).abs();
        let (z, within) = if sigma > 0.0 {
            (Some((empirical - exact) / sigma), diff <= 3.0 * sigma)
        } else {
            (None, diff <= 1e-12)
        };
        Self {
            exact,
            empirical,
            trials,
            sigma,
            z,
            within_3_sigma: within,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleComparison {
    pub eta_p: Comparison,
    pub qber: Comparison,
    pub per_class_eta: BTreeMap<MeasurementClass, Comparison>,
    pub per_basis_qber: BTreeMap<BasisLabel, Comparison>,
    pub threshold: f64,
    pub exact_qber_exceeds_threshold: bool,
    pub empirical_qber_exceeds_threshold: bool,
    pub all_within_3_sigma: bool,
    pub derivation: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: String,
    pub config: RunConfig,
    pub counts: OutcomeCounts,
    pub sift: SiftSummary,
    /// Conclusive clicks over all clicks.
    pub eta_p_empirical: f64,
    pub per_class: BTreeMap<MeasurementClass, ClassSummary>,
    /// `"bin{k}/SPCM{n}"` → single-click count.
    pub histogram: BTreeMap<String, u64>,
    /// Present when the exact engine models the channel (no dark counts).
    pub oracle: Option<OracleComparison>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// Runs the configured simulation, writes the requested outputs and
/// returns the report.
pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let report = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?
            .install(|| execute(config))?,
        None => execute(config)?,
    };
    if let Some(path) = &config.report_path {
        fs::write(path, report.to_json()).map_err(io_err(path))?;
    }
    Ok(report)
}

fn execute(config: &RunConfig) -> Result<RunReport, HarnessError> {
    let oracle = Oracle::<f64>::standard();
    let tables = oracle.table_set();
    let records = simulate(&config.sim_params(), &tables)?;
    if let Some(path) = &config.csv_log_path {
        let file = fs::File::create(path).map_err(io_err(path))?;
        crate::protocol::write_round_log(&records, io::BufWriter::new(file))?;
    }
    let log = alice_log(&records);
    let sifted = sift(&records, &log, config.sacrifice_fraction, config.master_seed)?;

    let mut counts = OutcomeCounts {
        rounds: records.len() as u64,
        ..Default::default()
    };
    let mut per_class: BTreeMap<MeasurementClass, ClassSummary> =
        MeasurementClass::ALL.iter().map(|&c| (c, ClassSummary::default())).collect();
    let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
    for bin in 0..DETECTION_BINS {
        for d in Detector::ALL {
            histogram.insert(format!("bin{bin}/{d}"), 0);
        }
    }
    for (r, phases) in records.iter().zip(&log) {
        let cls = per_class.get_mut(&r.class).expect("all classes present");
        cls.rounds += 1;
        match r.outcome {
            DetectionOutcome::NoClick => counts.no_click += 1,
            DetectionOutcome::MultiClick => {
                counts.multi_click += 1;
                cls.clicks += 1;
            }
            DetectionOutcome::Click(e) => {
                cls.clicks += 1;
                *histogram.entry(format!("bin{}/{}", e.bin, e.detector)).or_default() += 1;
            }
        }
        match r.interpretation {
            Interpretation::Conclusive { basis, bit } => {
                counts.conclusive += 1;
                cls.conclusive += 1;
                cls.errors += u64::from(alice_bit_for(basis, phases) != bit);
            }
            Interpretation::Inconclusive => counts.inconclusive += 1,
            Interpretation::Discard if r.outcome != DetectionOutcome::NoClick => counts.discard += 1,
            Interpretation::Discard => {}
        }
    }
    let clicks = counts.rounds - counts.no_click;
    let eta_p_empirical = if clicks == 0 { 0.0 } else { counts.conclusive as f64 / clicks as f64 };

    let per_basis = sifted
        .per_basis
        .iter()
        .map(|(b, c)| {
            let qber = if c.sifted == 0 { 0.0 } else { c.errors as f64 / c.sifted as f64 };
            (
                *b,
                BasisSummary {
                    sifted: c.sifted,
                    errors: c.errors,
                    qber,
                },
            )
        })
        .collect();
    let sift_summary = SiftSummary {
        sifted_bits: sifted.sifted_total(),
        sacrificed: sifted.sacrificed,
        key_length: sifted.bob_key.len() as u64,
        keys_identical: sifted.bob_key == sifted.alice_key,
        qber_estimate: sifted.qber_estimate,
        qber_overall: sifted.qber_full(),
        per_basis,
    };

    let oracle_block = if config.channel.dark_count_prob == 0.0 {
        let exact = oracle.exact_sifted_stats(
            &config.weights,
            config.mode,
            &ExactChannel {
                misalignment: config.channel.misalignment_angle,
                eve: config.eve,
            },
        )?;
        let eta_p = Comparison::new(exact.total.efficiency(), counts.conclusive, clicks);
        let qber = Comparison::new(exact.total.qber(), sifted.errors_total(), sifted.sifted_total());
        let per_class_eta: BTreeMap<_, _> = per_class
            .iter()
            .filter(|(_, s)| s.clicks > 0)
            .map(|(c, s)| (*c, Comparison::new(exact.per_class[c].efficiency(), s.conclusive, s.clicks)))
            .collect();
        let per_basis_qber: BTreeMap<_, _> = sifted
            .per_basis
            .iter()
            .filter_map(|(b, s)| exact.per_basis.get(b).map(|m| (*b, Comparison::new(m.qber(), s.errors, s.sifted))))
            .collect();
        let all_within = eta_p.within_3_sigma
            && qber.within_3_sigma
            && per_class_eta.values().all(|c| c.within_3_sigma)
            && per_basis_qber.values().all(|c| c.within_3_sigma);
        Some(OracleComparison {
            exact_qber_exceeds_threshold: qber.exact > QUDIT_DISTURBANCE_THRESHOLD,
            empirical_qber_exceeds_threshold: qber.empirical > QUDIT_DISTURBANCE_THRESHOLD,
            threshold: QUDIT_DISTURBANCE_THRESHOLD,
            eta_p,
            qber,
            per_class_eta,
            per_basis_qber,
            all_within_3_sigma: all_within,
            derivation: exact.derivation,
        })
    } else {
        None
    };

    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        config: config.clone(),
        counts,
        sift: sift_summary,
        eta_p_empirical,
        per_class,
        histogram,
        oracle: oracle_block,
    })
}

/// Writes every decision table and the exact rates as JSON.
pub fn export_tables(oracle: &Oracle<f64>, weights: &ClassWeights, mode: MeasurementMode, path: &Path) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Export<'a> {
        rates: &'a ProtocolRates,
        tables: BTreeMap<String, Vec<crate::oracle::TableEntryJson>>,
    }
    let rates = oracle.exact_protocol_rates(weights, mode)?;
    let export = Export {
        rates: &rates,
        tables: tables_to_json(&oracle.table_set()),
    };
    let mut s = serde_json::to_string_pretty(&export).expect("serializable");
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}

/// Outcome of one verification check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// The protocol rule being checked.
    pub rule: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const TOL: f64 = 1e-12;

fn check(name: &'static str, rule: &'static str, failures: Vec<String>) -> Check {
    let passed = failures.is_empty();
    let detail = if passed {
        "ok".to_string()
    } else {
        let n = failures.len();
        let mut shown: Vec<_> = failures.into_iter().take(3).collect();
        if n > 3 {
            shown.push(format!("... {n} violations total"));
        }
        shown.join("; ")
    };
    Check {
        name,
        rule,
        passed,
        detail,
    }
}

fn outbound_grid() -> impl Iterator<Item = (PcAngle, PcAngle, AlicePhases)> {
    crate::protocol::outbound_pairs().flat_map(|(a1, a2)| AlicePhases::all().map(move |p| (a1, a2, p)))
}

/// Closed forms of the phase-gate output and of the state after the
/// return Pockels cells, for the full 16 × 16 grid.
pub fn check_equation_equivalence() -> Check {
    let mut bad = Vec::new();
    for (a1, a2, phases) in outbound_grid() {
        let psi_a = alice_phase_gate(&prepare_psi_b::<f64>(a1, a2), &phases).expect("bins 0 and 1");
        let want = closed_form::psi_a::<f64>(a1, a2, &phases);
        if !psi_a.approx_eq(&want, TOL) {
            bad.push(format!("Ψ_A ({a1},{a2}) φ={:?}", phases.bits()));
        }
        let (a3, a4) = crate::protocol::standard_measurement(MeasurementClass::classify(a1, a2), a1, a2).expect("classified");
        for (b3, b4) in [(a3, a4), (PcAngle::Zero, PcAngle::Zero), (PcAngle::PlusQuarter, PcAngle::MinusQuarter), (PcAngle::Half, PcAngle::PlusQuarter)] {
            let angles = PcAngles::new(a1, a2, b3, b4);
            let got = return_through_pcs(&psi_a, b3, b4).expect("bins 0 and 1");
            if !got.approx_eq(&closed_form::psi_b_prime::<f64>(&angles, &phases), TOL) {
                bad.push(format!("Ψ′_B {angles} φ={:?}", phases.bits()));
            }
        }
    }
    check("equation-equivalence", "pipeline reproduces the Ψ_A and Ψ′_B closed forms", bad)
}

/// Total detection probability and per-element unitarity.
pub fn check_normalization(oracle: &Oracle<f64>) -> Check {
    let mut bad = Vec::new();
    for angles in PcAngles::all() {
        for phases in AlicePhases::all() {
            let total = oracle.enumerate_outcome_distribution(&angles, &phases).total();
            if (total - 1.0).abs() > TOL {
                bad.push(format!("{angles} φ={:?}: total {total}", phases.bits()));
            }
        }
    }
    let mut elements: Vec<(String, JonesMatrix<f64>)> = vec![
        ("H1".into(), optics::half_wave_h1(Direction::Forward)),
        ("H0 fwd".into(), optics::half_wave_h0(Direction::Forward)),
        ("H0 ret".into(), optics::half_wave_h0(Direction::Return)),
        ("F45".into(), optics::faraday_45(Direction::Forward)),
        ("HA".into(), optics::half_wave_alice()),
    ];
    for a in PcAngle::ALL {
        elements.push((format!("PC {a}"), optics::pockels(a)));
    }
    for h in [Phase::Zero, Phase::Pi] {
        for v in [Phase::Zero, Phase::Pi] {
            elements.push((format!("gate {h:?}/{v:?}"), phase_gate_matrix(h, v)));
        }
    }
    let bs = oracle.splitter;
    let bs_matrix = JonesMatrix([[bs.transmission, bs.reflection], [bs.reflection, bs.transmission]]);
    elements.push(("beamsplitter".into(), bs_matrix));
    for (name, m) in elements {
        if !m.is_unitary(TOL) {
            bad.push(format!("{name} not unitary"));
        }
    }
    check("normalization", "total detection probability is 1 and every element is unitary", bad)
}

/// Class 1: all probability at `τ+Δt`, detector fixed by the phase
/// difference. For equal outbound angles `Δφ = 0` lands on SPCM2; the
/// mixed settings pick up a relative sign from `sin α` and swap detectors.
pub fn check_class1(oracle: &Oracle<f64>) -> Check {
    use PcAngle::*;
    let mut bad = Vec::new();
    let cases = [
        ((Zero, Zero), BasisLabel::D41, Detector::Spcm2),
        ((Zero, Half), BasisLabel::D31, Detector::Spcm1),
        ((Half, Zero), BasisLabel::D42, Detector::Spcm1),
        ((Half, Half), BasisLabel::D32, Detector::Spcm2),
    ];
    for ((a1, a2), basis, on_zero) in cases {
        let angles = PcAngles::new(a1, a2, a1, a2);
        for phases in AlicePhases::all() {
            let d = oracle.enumerate_outcome_distribution(&angles, &phases);
            let expect = match basis.difference(&phases) {
                Phase::Zero => on_zero,
                Phase::Pi => other(on_zero),
            };
            if (d.get(1, expect) - 1.0).abs() > TOL {
                bad.push(format!("{angles} φ={:?}: P(bin1,{expect})={}", phases.bits(), d.get(1, expect)));
            }
        }
    }
    check("class1-totality", "efficiency η = 1 at time τ + Δt", bad)
}

fn other(d: Detector) -> Detector {
    match d {
        Detector::Spcm1 => Detector::Spcm2,
        Detector::Spcm2 => Detector::Spcm1,
    }
}

fn expect_entry(bad: &mut Vec<String>, t: &crate::oracle::DecisionTable<f64>, bin: usize, want: EntryClass) {
    for det in Detector::ALL {
        let got = t.entry(bin, det).class;
        if got != want {
            bad.push(format!("{} bin{bin}/{det}: {got:?} != {want:?}", t.angles()));
        }
    }
}

pub fn check_class2_example(oracle: &Oracle<f64>) -> Check {
    use PcAngle::*;
    let t = oracle.derive_decision_table(&PcAngles::new(Zero, PlusQuarter, Half, PlusQuarter));
    let mut bad = Vec::new();
    expect_entry(&mut bad, &t, 0, EntryClass::Random);
    expect_entry(&mut bad, &t, 1, EntryClass::Deterministic { basis: BasisLabel::D43, value: Phase::Pi });
    expect_entry(&mut bad, &t, 2, EntryClass::Deterministic { basis: BasisLabel::D43, value: Phase::Zero });
    check(
        "class2-example",
        "τ + Δt determines Δφ43 = ±π; τ + 2Δt determines Δφ43 = 0; τ + 0 random",
        bad,
    )
}

pub fn check_class3_example(oracle: &Oracle<f64>) -> Check {
    use PcAngle::*;
    let t = oracle.derive_decision_table(&PcAngles::new(PlusQuarter, MinusQuarter, PlusQuarter, PlusQuarter));
    let mut bad = Vec::new();
    expect_entry(&mut bad, &t, 0, EntryClass::Deterministic { basis: BasisLabel::D21, value: Phase::Zero });
    expect_entry(&mut bad, &t, 1, EntryClass::Random);
    expect_entry(&mut bad, &t, 2, EntryClass::Deterministic { basis: BasisLabel::D43, value: Phase::Pi });
    check(
        "class3-example",
        "τ + 0 determines Δφ21 = 0; τ + 2Δt determines Δφ43 = ±π; τ + Δt undetermined",
        bad,
    )
}

pub fn check_rates(oracle: &Oracle<f64>) -> Check {
    let rates = |w: ClassWeights| oracle.exact_protocol_rates(&w, MeasurementMode::Standard);
    let mut cases: Vec<(&str, crate::Result<f64>, f64)> = Vec::new();
    let default = rates(ClassWeights::default());
    cases.push(("η_p default", default.as_ref().map(|r| r.eta_p).map_err(Clone::clone), 0.75));
    for (class, want) in [(MeasurementClass::Class1, 1.0), (MeasurementClass::Class2, 0.5), (MeasurementClass::Class3, 0.5)] {
        let got = default.as_ref().map(|r| r.per_class[&class]).map_err(Clone::clone);
        cases.push((class_label(class), got, want));
    }
    cases.push(("η_p uniform16", rates(ClassWeights::uniform16()).map(|r| r.eta_p), 0.625));
    cases.push(("η_p class1 only", rates(ClassWeights::class1_only()).map(|r| r.eta_p), 1.0));
    let bad = cases
        .into_iter()
        .filter_map(|(what, got, want)| match got {
            Ok(g) if (g - want).abs() <= TOL => None,
            Ok(g) => Some(format!("{what}: {g} != {want}")),
            Err(e) => Some(format!("{what}: {e}")),
        })
        .collect();
    check("efficiency", "class efficiencies 1, 1/2, 1/2 giving η_p = 0.75", bad)
}

fn class_label(c: MeasurementClass) -> &'static str {
    match c {
        MeasurementClass::Class1 => "η class1",
        MeasurementClass::Class2 => "η class2",
        MeasurementClass::Class3 => "η class3",
    }
}

/// Every conclusive reading agrees with Alice's bit on the ideal channel.
pub fn check_key_agreement(oracle: &Oracle<f64>) -> Check {
    let tables = oracle.table_set();
    let mut bad = Vec::new();
    for t in tables.iter() {
        for phases in AlicePhases::all() {
            let d = oracle.enumerate_outcome_distribution(&t.angles(), &phases);
            for e in t.entries() {
                let p = d.get(e.bin as usize, e.detector);
                if let EntryClass::Deterministic { basis, value } = e.class {
                    if p > TOL && alice_bit_for(basis, &phases) != value.bit() {
                        bad.push(format!("{} bin{}/{} φ={:?}", t.angles(), e.bin, e.detector, phases.bits()));
                    }
                }
                if e.class == EntryClass::Forbidden && p > TOL {
                    bad.push(format!("{} forbidden bin{}/{} has p={p}", t.angles(), e.bin, e.detector));
                }
            }
        }
    }
    check("key-agreement", "conclusive bits equal Alice's bits on the ideal channel", bad)
}

/// The switch with a relative phase is not a Faraday mirror up to any global phase.
pub fn check_faraday_breaking() -> Check {
    let fm = faraday_mirror_matrix::<f64>();
    let mut bad = Vec::new();
    let zero = phase_gate_matrix::<f64>(Phase::Zero, Phase::Zero);
    let (h, v) = (crate::Jones::horizontal(), crate::Jones::vertical());
    let (d, db) = (crate::Jones::diagonal(), crate::Jones::anti_diagonal());
    let neg = num_complex::Complex::new(-1.0, 0.0);
    for (name, input, want) in [
        ("h→v", h, v),
        ("v→−h", v, h.scale(neg)),
        ("d→−d̄", d, db.scale(neg)),
        ("d̄→d", db, d),
    ] {
        if !zero.apply(&input).approx_eq(&want, TOL) {
            bad.push(format!("switch {name} violated"));
        }
    }
    for (ph, pv) in [(Phase::Zero, Phase::Pi), (Phase::Pi, Phase::Zero)] {
        if let Some(c) = phase_gate_matrix::<f64>(ph, pv).global_phase_to(&fm, TOL) {
            bad.push(format!("gate({ph:?},{pv:?}) = {c}·Faraday mirror"));
        }
    }
    check("faraday-breaking", "phase-gate switch differs from a Faraday mirror beyond a global phase", bad)
}

pub fn check_table_determinism(oracle: &Oracle<f64>) -> Check {
    let a = serde_json::to_vec(&tables_to_json(&oracle.table_set())).expect("serializable");
    let b = serde_json::to_vec(&tables_to_json(&oracle.table_set())).expect("serializable");
    let bad = if a == b { vec![] } else { vec!["table JSON differs between runs".into()] };
    check("table-determinism", "decision tables regenerate byte-identically", bad)
}

pub fn check_eve_ordering(oracle: &Oracle<f64>) -> Check {
    let mut bad = Vec::new();
    let w = ClassWeights::default();
    match oracle.exact_eve_qber(EveStrategy::off(), &w, MeasurementMode::Standard) {
        Ok(q) if q.overall == 0.0 => {}
        Ok(q) => bad.push(format!("Eve off QBER {}", q.overall)),
        Err(e) => bad.push(e.to_string()),
    }
    for attack in [EveAttack::TimePolProjective, EveAttack::PerBinPolarization { basis: EveBasisChoice::Random }] {
        let q = |leg| oracle.exact_eve_qber(EveStrategy::new(attack, leg), &w, MeasurementMode::Standard);
        match (q(EveLeg::Both), q(EveLeg::BobToAlice), q(EveLeg::AliceToBob)) {
            (Ok(both), Ok(b2a), Ok(a2b)) => {
                for one in [b2a, a2b] {
                    if both.overall < one.overall - TOL {
                        bad.push(format!("{attack}: both legs {} < {} {}", both.overall, one.strategy.leg, one.overall));
                    }
                }
            }
            _ => bad.push(format!("{attack}: evaluation failed")),
        }
    }
    check("eve-monotonicity", "intercept-resend on both legs disturbs at least as much as on one", bad)
}

/// Runs every oracle and rule check against the given engine.
pub fn verify(oracle: &Oracle<f64>) -> VerifyReport {
    VerifyReport {
        checks: vec![
            check_equation_equivalence(),
            check_normalization(oracle),
            check_class1(oracle),
            check_class2_example(oracle),
            check_class3_example(oracle),
            check_rates(oracle),
            check_key_agreement(oracle),
            check_faraday_breaking(),
            check_table_determinism(oracle),
            check_eve_ordering(oracle),
        ],
    }
}

/// Decodes the state with a given engine; exposed for mutation tests.
pub fn decode_with(oracle: &Oracle<f64>, state: &crate::State) -> crate::Result<crate::Amplitudes> {
    decode_mzi_with(state, &oracle.splitter)
}
