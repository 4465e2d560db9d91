//! Fixtures shared by the criterion benchmarks.

use otfs_core::{
    add_awgn, apply_channel, make_pilot_frame, recover_effective_channel, sample_scenario,
    Complex64, DdGrid, DdMatrix, NoiseConfig, PathParams, PilotConfig, ScenarioConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recovered effective channel of one reference scenario at the given PSNR.
pub fn noisy_effective_channel(
    grid: &DdGrid,
    seed: u64,
    psnr_db: f64,
) -> (Vec<PathParams>, DdMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths =
        sample_scenario(&ScenarioConfig::default(), grid, &mut rng).expect("valid scenario");
    let pilot = PilotConfig::default();
    let x = make_pilot_frame(&pilot, grid).expect("valid pilot");
    let y = apply_channel(&x, &paths, grid).expect("same grid");
    let noise = NoiseConfig::from_psnr_db(psnr_db, pilot.e_p).expect("valid noise");
    let y = add_awgn(&y, &noise, &mut rng);
    (paths, recover_effective_channel(&y, &pilot))
}

/// Random unit-variance frame.
pub fn random_frame(grid: &DdGrid, seed: u64) -> DdMatrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DdMatrix::from_fn(*grid, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}
