//! Channel synthesis, the convolution input/output relation and pilot
//! recovery, each checked against a direct-summation oracle.

use std::f64::consts::PI;

use otfs_core::channel::circular_convolve;
use otfs_core::{
    apply_channel, generate_dd_channel, make_pilot_frame, recover_effective_channel,
    sample_scenario, Complex64, DdGrid, DdMatrix, PathParams, PilotConfig, ScenarioConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Entry (k, l) of the effective channel by explicit summation over `n` and `m`.
fn direct_entry(paths: &[PathParams], g: &DdGrid, k: usize, l: usize) -> Complex64 {
    let (m_len, n_len) = (g.m() as f64, g.n() as f64);
    let mn = m_len * n_len;
    paths
        .iter()
        .map(|p| {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * p.k_nu * p.l_tau / mn);
            let dop: Complex64 = (0..g.n())
                .map(|n| {
                    Complex64::from_polar(1.0, -2.0 * PI * n as f64 * (k as f64 - p.k_nu) / n_len)
                })
                .sum();
            let del: Complex64 = (0..g.m())
                .map(|m| {
                    Complex64::from_polar(1.0, 2.0 * PI * m as f64 * (l as f64 - p.l_tau) / m_len)
                })
                .sum();
            p.alpha * phase * dop * del / mn
        })
        .sum()
}

fn direct_convolution(h: &DdMatrix, x: &DdMatrix) -> DdMatrix {
    let g = *h.grid();
    let (n, m) = (g.n(), g.m());
    DdMatrix::from_fn(g, |k, l| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k2 in 0..n {
            for l2 in 0..m {
                acc += h.get(k2, l2) * x.get((k + n - k2) % n, (l + m - l2) % m);
            }
        }
        acc
    })
}

fn random_paths(rng: &mut ChaCha8Rng, g: &DdGrid, count: usize) -> Vec<PathParams> {
    (0..count)
        .map(|_| {
            PathParams::new(
                rng.random_range(0.0..g.m() as f64 - 1.0),
                rng.random_range(-(g.n() as f64) / 2.0..g.n() as f64 / 2.0),
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect()
}

fn random_frame(rng: &mut ChaCha8Rng, g: DdGrid) -> DdMatrix {
    DdMatrix::from_fn(g, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn max_rel_err(a: &DdMatrix, b: &DdMatrix) -> f64 {
    let scale = b.max_abs();
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn synthesis_matches_direct_double_sum() {
    let g = DdGrid::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let paths = random_paths(&mut rng, &g, 4);
        let h = generate_dd_channel(&paths, &g);
        let oracle = DdMatrix::from_fn(g, |k, l| direct_entry(&paths, &g, k, l));
        assert!(max_rel_err(&h, &oracle) < 1e-10);
    }
}

#[test]
fn integer_paths_occupy_single_cells() {
    let g = DdGrid::reference();
    let paths = [
        PathParams::new(4.0, 3.0, Complex64::new(0.8, 0.1)),
        PathParams::new(17.0, -5.0, Complex64::new(-0.2, 0.4)),
    ];
    let h = generate_dd_channel(&paths, &g);
    let nonzero: Vec<(usize, usize)> = (0..g.n())
        .flat_map(|k| (0..g.m()).map(move |l| (k, l)))
        .filter(|&(k, l)| h.get(k, l).norm() > 1e-12)
        .collect();
    assert_eq!(nonzero, vec![(3, 4), (27, 17)]);
    for p in &paths {
        let (k, l) = p.integer_tap(&g);
        let phase = Complex64::from_polar(1.0, 2.0 * PI * p.k_nu * p.l_tau / g.len() as f64);
        assert!((h.get(k, l) - p.alpha * phase).norm() < 1e-12);
    }
}

#[test]
fn synthesis_is_linear_in_path_sets() {
    let g = DdGrid::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_paths(&mut rng, &g, 3);
    let b = random_paths(&mut rng, &g, 2);
    let joined: Vec<PathParams> = a.iter().chain(&b).copied().collect();
    let sum = &generate_dd_channel(&a, &g) + &generate_dd_channel(&b, &g);
    assert!(max_rel_err(&generate_dd_channel(&joined, &g), &sum) < 1e-12);

    let c = Complex64::new(-0.3, 2.0);
    let scaled: Vec<PathParams> = a
        .iter()
        .map(|p| PathParams::new(p.l_tau, p.k_nu, p.alpha * c))
        .collect();
    let expect = &generate_dd_channel(&a, &g) * c;
    assert!(max_rel_err(&generate_dd_channel(&scaled, &g), &expect) < 1e-12);
}

#[test]
fn fft_convolution_matches_direct_convolution() {
    let g = DdGrid::new(16, 8, 30e3, 5.1e9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let paths = random_paths(&mut rng, &g, 3);
        let x = random_frame(&mut rng, g);
        let h = generate_dd_channel(&paths, &g);
        let fast = apply_channel(&x, &paths, &g).unwrap();
        assert!(max_rel_err(&fast, &direct_convolution(&h, &x)) < 1e-12);
    }
}

#[test]
fn convolution_is_linear_and_impulse_preserves_energy() {
    let g = DdGrid::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = generate_dd_channel(&random_paths(&mut rng, &g, 5), &g);
    let x1 = random_frame(&mut rng, g);
    let x2 = random_frame(&mut rng, g);
    let lhs = circular_convolve(&h, &(&x1 + &x2)).unwrap();
    let rhs = &circular_convolve(&h, &x1).unwrap() + &circular_convolve(&h, &x2).unwrap();
    assert!(max_rel_err(&lhs, &rhs) < 1e-12);

    let mut delta = DdMatrix::zeros(g);
    delta[(7, 40)] = Complex64::new(1.0, 0.0);
    let y = circular_convolve(&h, &delta).unwrap();
    assert!((y.energy() - h.energy()).abs() < 1e-12 * h.energy());
}

#[test]
fn integer_paths_shift_the_frame() {
    let g = DdGrid::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = random_frame(&mut rng, g);
    let p = PathParams::new(5.0, -2.0, Complex64::new(0.0, 1.0));
    let y = apply_channel(&x, &[p], &g).unwrap();
    let phase = Complex64::from_polar(1.0, 2.0 * PI * p.k_nu * p.l_tau / g.len() as f64);
    for k in 0..g.n() {
        for l in 0..g.m() {
            let src = x.get((k + 2) % g.n(), (l + g.m() - 5) % g.m());
            assert!((y.get(k, l) - p.alpha * phase * src).norm() < 1e-12);
        }
    }
}

#[test]
fn noiseless_pilot_recovers_the_channel() {
    let g = DdGrid::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let scenario = ScenarioConfig::default();
    for _ in 0..100 {
        let paths = sample_scenario(&scenario, &g, &mut rng).unwrap();
        let pilot = PilotConfig {
            k_pilot: rng.random_range(0..g.n()),
            l_pilot: rng.random_range(0..g.m()),
            e_p: rng.random_range(0.1..10.0),
        };
        let y = apply_channel(&make_pilot_frame(&pilot, &g).unwrap(), &paths, &g).unwrap();
        let h_hat = recover_effective_channel(&y, &pilot);
        let h = generate_dd_channel(&paths, &g);
        assert!(max_rel_err(&h_hat, &h) <= 1e-10);
    }
}
