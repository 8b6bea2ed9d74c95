//! Monte Carlo round engine.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    apply_loss, apply_misalignment, eve_intercept_resend, sample_detection, ChannelParams, EveAttack, EveStrategy,
};
use crate::error::Result;
use crate::oracle::TableSet;
use crate::optics::{alice_phase_gate, decode_mzi, prepare_psi_b, return_through_pcs, AlicePhases, PcAngles};
use crate::protocol::{
    announce, choose_bob_settings, choose_measurement, interpret_detection, ClassWeights, DetectionOutcome,
    Interpretation, MeasurementMode, RoundRecord,
};
use crate::rng::round_rng;

/// Everything that determines the sampled rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub rounds: u64,
    pub seed: u64,
    pub weights: ClassWeights,
    pub mode: MeasurementMode,
    pub channel: ChannelParams,
    pub eve: EveStrategy,
}

/// Plays one round on its own random stream.
///
/// Order on the outbound leg: loss, Eve, residual misalignment at Alice.
/// On the return leg: misalignment, Eve, loss.
pub fn simulate_round(round: u64, params: &SimParams, tables: &TableSet) -> Result<RoundRecord> {
    let mut rng = round_rng(params.seed, round);
    let bob = choose_bob_settings(&mut rng, &params.weights)?;
    let meas = choose_measurement(bob.class, bob.a1, bob.a2, &mut rng, params.mode, tables)?;
    let angles = PcAngles::new(bob.a1, bob.a2, meas.a3, meas.a4);
    let phases = AlicePhases::from_index(rng.random_range(0..16u8));

    let ch = &params.channel;
    let attack_out = if params.eve.on_bob_to_alice() { params.eve.attack } else { EveAttack::Off };
    let attack_back = if params.eve.on_alice_to_bob() { params.eve.attack } else { EveAttack::Off };

    let mut state = prepare_psi_b::<f64>(angles.a1, angles.a2);
    state = apply_loss(&state, ch.transmittance_per_leg, &mut rng);
    state = eve_intercept_resend(&state, attack_out, &mut rng)?;
    state = apply_misalignment(&state, ch.misalignment_angle);
    state = alice_phase_gate(&state, &phases)?;
    state = apply_misalignment(&state, ch.misalignment_angle);
    state = eve_intercept_resend(&state, attack_back, &mut rng)?;
    state = apply_loss(&state, ch.transmittance_per_leg, &mut rng);
    state = return_through_pcs(&state, angles.a3, angles.a4)?;
    let amps = decode_mzi(&state)?;
    let outcome = sample_detection(&amps, ch, &mut rng);

    let interpretation = match outcome {
        DetectionOutcome::Click(ev) => interpret_detection(bob.class, &angles, ev, tables.get(&angles)?)?,
        DetectionOutcome::NoClick | DetectionOutcome::MultiClick => Interpretation::Discard,
    };
    Ok(RoundRecord {
        round,
        class: bob.class,
        angles,
        phases,
        outcome,
        interpretation,
        announcement: announce(round, &interpretation),
    })
}

/// All rounds in index order. Rounds run in parallel on the current rayon pool.
pub fn simulate(params: &SimParams, tables: &TableSet) -> Result<Vec<RoundRecord>> {
    (0..params.rounds)
        .into_par_iter()
        .map(|r| simulate_round(r, params, tables))
        .collect()
}

/// Alice's phase log, indexed by round.
pub fn alice_log(records: &[RoundRecord]) -> Vec<AlicePhases> {
    records.iter().map(|r| r.phases).collect()
}
