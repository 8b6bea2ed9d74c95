//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use timebin_qkd::channel::{EveAttack, EveBasisChoice, EveLeg, EveStrategy};
use timebin_qkd::closed_form::{psi_a, psi_b_prime};
use timebin_qkd::harness::{self, RunConfig, RunReport};
use timebin_qkd::optics::{
    self, alice_phase_gate, decode_mzi, prepare_psi0, prepare_psi_b, return_through_pcs, AlicePhases, Direction,
    PcAngle, PcAngles,
};
use timebin_qkd::protocol::{outbound_pairs, standard_measurement, ClassWeights, MeasurementClass, MeasurementMode};
use timebin_qkd::{ExactOracle, Jones, State};

const N: u64 = 100_000;
const TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn from_check(c: harness::Check) -> Result<(), String> {
    ensure(c.passed, format!("{}: {}", c.name, c.detail))
}

fn mc(config: RunConfig) -> Result<RunReport, String> {
    harness::run(&config).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    from_check(harness::check_equation_equivalence())?;
    use PcAngle::*;
    for (a1, a2, a3, a4) in [(Zero, PlusQuarter, Half, PlusQuarter), (PlusQuarter, MinusQuarter, PlusQuarter, PlusQuarter)] {
        let angles = PcAngles::new(a1, a2, a3, a4);
        for phases in AlicePhases::all() {
            let gate = alice_phase_gate(&prepare_psi_b::<f64>(a1, a2), &phases).map_err(|e| e.to_string())?;
            ensure(gate.approx_eq(&psi_a(a1, a2, &phases), TOL), format!("Ψ_A at {angles}"))?;
            let back = return_through_pcs(&gate, a3, a4).map_err(|e| e.to_string())?;
            ensure(back.approx_eq(&psi_b_prime(&angles, &phases), TOL), format!("Ψ′_B at {angles}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("16×16 sweep and both worked examples match to 1e-12 in {elapsed:?}"))
}

fn criterion_2() -> Outcome {
    let oracle = ExactOracle::standard();
    from_check(harness::check_class1(&oracle))?;
    from_check(harness::check_class2_example(&oracle))?;
    from_check(harness::check_class3_example(&oracle))?;
    Ok("class 1 totality at τ+Δt; class-2 and class-3 example tables".into())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let oracle = ExactOracle::standard();
    let rates = oracle
        .exact_protocol_rates(&ClassWeights::default(), MeasurementMode::Standard)
        .map_err(|e| e.to_string())?;
    for (class, want) in [(MeasurementClass::Class1, 1.0), (MeasurementClass::Class2, 0.5), (MeasurementClass::Class3, 0.5)] {
        let got = rates.per_class[&class];
        ensure((got - want).abs() <= TOL, format!("{class} η = {got}"))?;
    }
    ensure((rates.eta_p - 0.75).abs() <= TOL, format!("η_p = {}", rates.eta_p))?;

    let report = mc(RunConfig {
        rounds: N,
        master_seed: 2024,
        ..RunConfig::default()
    })?;
    let cmp = report.oracle.ok_or("missing oracle block")?;
    ensure(cmp.eta_p.within_3_sigma, format!("MC η_p {} z={:?}", cmp.eta_p.empirical, cmp.eta_p.z))?;
    for (class, c) in &cmp.per_class_eta {
        ensure(c.within_3_sigma, format!("MC {class} η {} vs {}", c.empirical, c.exact))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!(
        "exact η = 1, 1/2, 1/2, η_p = 0.75; MC η_p = {:.5} (z = {:.2}) in {elapsed:?}",
        cmp.eta_p.empirical,
        cmp.eta_p.z.unwrap_or(0.0)
    ))
}

fn criterion_4() -> Outcome {
    let mut detail = Vec::new();
    for mode in [MeasurementMode::Standard, MeasurementMode::Extended] {
        let r = mc(RunConfig {
            rounds: N,
            master_seed: 11,
            mode,
            ..RunConfig::default()
        })?;
        ensure(r.sift.qber_overall == 0.0, format!("{mode:?} QBER {}", r.sift.qber_overall))?;
        ensure(r.sift.keys_identical, format!("{mode:?} keys differ"))?;
        ensure(r.sift.key_length > 0, "empty key")?;
        detail.push(format!("{mode:?} key {} bits", r.sift.key_length));
    }
    Ok(format!("QBER 0, identical keys ({})", detail.join(", ")))
}

fn criterion_5() -> Outcome {
    from_check(harness::check_normalization(&ExactOracle::standard()))?;
    let unit = |s: &State, what: &str| ensure((s.total_norm_sq() - 1.0).abs() <= TOL, format!("norm after {what}"));
    let psi0 = prepare_psi0::<f64>();
    unit(&psi0, "preparation")?;
    for (a1, a2) in outbound_pairs() {
        let s = psi0.apply_bin_unitary(0, &optics::pockels(a1)).map_err(|e| e.to_string())?;
        unit(&s, "PC1")?;
        let s = s.apply_bin_unitary(1, &optics::pockels(a2)).map_err(|e| e.to_string())?;
        unit(&s, "PC2")?;
        let (a3, a4) = standard_measurement(MeasurementClass::classify(a1, a2), a1, a2).map_err(|e| e.to_string())?;
        for phases in AlicePhases::all() {
            let g = alice_phase_gate(&s, &phases).map_err(|e| e.to_string())?;
            unit(&g, "phase gate")?;
            let b = g.apply_bin_unitary(0, &optics::pockels(a3)).map_err(|e| e.to_string())?;
            unit(&b, "PC3")?;
            let b = b.apply_bin_unitary(1, &optics::pockels(a4)).map_err(|e| e.to_string())?;
            unit(&b, "PC4")?;
            let amps = decode_mzi(&b).map_err(|e| e.to_string())?;
            ensure((amps.total_probability() - 1.0).abs() <= TOL, "decode total")?;
        }
    }
    let probe = Jones::new(num_complex::Complex::new(0.6, 0.0), num_complex::Complex::new(0.0, 0.8));
    for (name, m) in [
        ("H1", optics::half_wave_h1::<f64>(Direction::Forward)),
        ("H0", optics::half_wave_h0(Direction::Return)),
        ("F45", optics::faraday_45(Direction::Forward)),
        ("HA", optics::half_wave_alice()),
    ] {
        ensure((m.apply(&probe).norm_sq() - 1.0).abs() <= TOL, format!("norm after {name}"))?;
    }
    Ok("total probability 1 on the 16×16 grid; norm kept by every element".into())
}

fn criterion_6() -> Outcome {
    from_check(harness::check_faraday_breaking())?;
    Ok("no global scalar relates the switch with a relative phase to a Faraday mirror".into())
}

fn criterion_7() -> Outcome {
    let oracle = ExactOracle::standard();
    let mut lines = Vec::new();
    for (seed, attack) in [(71, EveAttack::TimePolProjective), (72, EveAttack::PerBinPolarization { basis: EveBasisChoice::Random })] {
        for leg in [EveLeg::BobToAlice, EveLeg::AliceToBob, EveLeg::Both] {
            let strategy = EveStrategy::new(attack, leg);
            let exact = oracle
                .exact_eve_qber(strategy, &ClassWeights::default(), MeasurementMode::Standard)
                .map_err(|e| e.to_string())?;
            let report = mc(RunConfig {
                rounds: N,
                master_seed: seed,
                eve: strategy,
                ..RunConfig::default()
            })?;
            let cmp = report.oracle.ok_or("missing oracle block")?;
            ensure((cmp.qber.exact - exact.overall).abs() <= TOL, "report and oracle disagree")?;
            ensure(!cmp.derivation.is_empty(), "derivation not logged")?;
            ensure(
                cmp.qber.within_3_sigma,
                format!("{attack}/{leg}: MC {} vs exact {} (z={:?})", cmp.qber.empirical, cmp.qber.exact, cmp.qber.z),
            )?;
            ensure(cmp.threshold == 0.25, "threshold")?;
            lines.push(format!(
                "{attack}/{leg} {:.4} vs {:.4} ({} 25%)",
                cmp.qber.empirical,
                exact.overall,
                if cmp.exact_qber_exceeds_threshold { ">" } else { "≤" }
            ));
        }
    }
    Ok(lines.join("; "))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = RunConfig {
        rounds: 20_000,
        master_seed: 0xDEC0DE,
        eve: EveStrategy::new(EveAttack::PerBinPolarization { basis: EveBasisChoice::Random }, EveLeg::Both),
        channel: timebin_qkd::channel::ChannelParams {
            transmittance_per_leg: 0.9,
            misalignment_angle: 0.05,
            dark_count_prob: 1e-3,
        },
        ..RunConfig::default()
    };
    let mut outputs = Vec::new();
    for threads in [1usize, 2, 4, 8] {
        let path = dir.path().join(format!("report-{threads}.json"));
        let csv = dir.path().join(format!("log-{threads}.csv"));
        harness::run(&RunConfig {
            threads: Some(threads),
            report_path: Some(path.clone()),
            csv_log_path: Some(csv.clone()),
            ..base.clone()
        })
        .map_err(|e| e.to_string())?;
        let report = std::fs::read(&path).map_err(|e| e.to_string())?;
        let log = std::fs::read(&csv).map_err(|e| e.to_string())?;
        outputs.push((threads, report, log));
    }
    let (_, r0, l0) = &outputs[0];
    for (threads, r, l) in &outputs[1..] {
        ensure(r == r0, format!("report differs at {threads} threads"))?;
        ensure(l == l0, format!("CSV log differs at {threads} threads"))?;
    }
    let other = harness::run(&RunConfig {
        master_seed: base.master_seed + 1,
        ..base.clone()
    })
    .map_err(|e| e.to_string())?;
    ensure(other.to_json().as_bytes() != r0.as_slice(), "seed has no effect")?;
    Ok("reports and round logs byte-identical at 1, 2, 4, 8 threads".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("equation equivalence", criterion_1),
        ("class rules", criterion_2),
        ("efficiency", criterion_3),
        ("key agreement", criterion_4),
        ("normalization", criterion_5),
        ("Faraday symmetry breaking", criterion_6),
        ("eavesdropping", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
