//! Writes the laboratory pulses of the three-mode loop to JSON, replays
//! them, and shows that a 1% coupling error breaks the passage condition.

use bosonet::synthesis::{
    build_noon_chiral_schedule, synth_three_mode, verify_passage, AlphaRateForm, Direction, LabControls,
    NoonPhasePlan,
};

fn main() -> bosonet::Result<()> {
    let schedule = build_noon_chiral_schedule(Direction::Ccw, 1, NoonPhasePlan::for_direction(Direction::Ccw))?;
    let ctl = synth_three_mode(&schedule, AlphaRateForm::Fdot)?;
    let samples = ctl.sample(1000)?;
    let path = std::env::temp_dir().join("noon_pulses.json");
    std::fs::write(&path, serde_json::to_string(&samples)?)?;
    println!("wrote {} ({} stages)", path.display(), samples.stages.len());

    let grid = ctl.sample_times(200);
    let replay = LabControls::from_samples(samples, Some(ctl.clone()))?;
    let skewed = ctl.clone().with_coupling_scale(1.01);
    for (name, model) in [("synthesized", &ctl), ("replayed", &replay), ("J x 1.01", &skewed)] {
        let worst = (1..=3)
            .map(|k| verify_passage(model, k, &grid).map(|r| format!("{:.3e}", r.max_residual)))
            .collect::<bosonet::Result<Vec<_>>>()?;
        println!("{name:>12}: residuals {}", worst.join(", "));
    }
    Ok(())
}
