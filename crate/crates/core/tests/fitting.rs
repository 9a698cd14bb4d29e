use jpa_core::chain::{
    added_noise_referred, coherent_response, planck_response, simulate_coherent_sweep, simulate_planck_sweep, ChainConfig,
    SweepDataset, SweepKind,
};
use jpa_core::fit::{
    eta_model, extract_efficiency, fit_coherent, fit_coherent_weighted, fit_eta_curve, fit_planck, fit_planck_weighted,
    least_squares, Data, EfficiencyMode, EfficiencyPoint, LmOptions, Weighting,
};
use jpa_core::physics::{
    db_to_linear, planck_occupation, quantum_efficiency, reference, sql_efficiency_bound, NoiseBudget, PumpNoise,
};
use jpa_core::pipeline::{self, default_input_photons, default_temperatures, PipelineConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn hemt_only() -> NoiseBudget {
    NoiseBudget {
        n_hemt: reference::N_HEMT,
        ..NoiseBudget::ideal()
    }
}

fn with_pump(n_jprime: f64, epsilon: f64) -> NoiseBudget {
    NoiseBudget {
        pump: PumpNoise { n_jprime, epsilon },
        ..hemt_only()
    }
}

#[test]
fn calibration_round_trip_at_two_percent_scatter() {
    let g_n = db_to_linear(12.0);
    let base = ChainConfig::new(reference::amplifier(), reference::noise(), 0, 0.02).unwrap();
    let p_truth = planck_response(&base, g_n).unwrap();
    let c_truth = coherent_response(&base, g_n).unwrap();
    let (temps, n_in) = (default_temperatures(), default_input_photons());
    let (mut planck_hits, mut coherent_hits) = (0, 0);
    for seed in 0..100 {
        let cfg = base.with_seed(1000 + seed);
        let ds = simulate_planck_sweep(&cfg, &temps, g_n).unwrap();
        let s = Weighting::Relative.sigma(&ds.y).unwrap();
        let f = fit_planck_weighted(&ds, cfg.amp.omega_signal(), s.as_deref()).unwrap();
        planck_hits += usize::from(
            (f.params[0] - p_truth.gain).abs() <= 3.0 * f.std_errors[0]
                && (f.params[1] - p_truth.offset).abs() <= 3.0 * f.std_errors[1],
        );
        let ds = simulate_coherent_sweep(&cfg, &n_in, g_n).unwrap();
        let s = Weighting::Relative.sigma(&ds.y).unwrap();
        let f = fit_coherent_weighted(&ds, s.as_deref()).unwrap();
        coherent_hits += usize::from(
            (f.params[0] - c_truth.gain).abs() <= 3.0 * f.std_errors[0]
                && (f.params[1] - c_truth.offset).abs() <= 3.0 * f.std_errors[1],
        );
    }
    assert!(planck_hits >= 95, "planck {planck_hits}/100");
    assert!(coherent_hits >= 95, "coherent {coherent_hits}/100");
}

#[test]
fn broadband_efficiency_matches_referred_noise() {
    let cfg = ChainConfig::new(reference::amplifier(), hemt_only(), 0, 0.0).unwrap();
    let f = cfg.amp.omega_signal();
    let ds = simulate_planck_sweep(&cfg, &default_temperatures(), 101.0).unwrap();
    let fit = fit_planck(&ds, f).unwrap();
    let eta = extract_efficiency(&fit, EfficiencyMode::Broadband).unwrap().eta;
    for (&t, &y) in ds.x.iter().zip(&ds.y) {
        let n_in = planck_occupation(f, t).unwrap();
        let n_f = added_noise_referred(y, n_in, fit.params[0], 0.0);
        let direct = quantum_efficiency(n_f).unwrap();
        assert!((eta - direct).abs() < 1e-6, "T {t}: {eta} vs {direct}");
    }
    // With a noiseless JPA the added noise is the referred HEMT noise.
    let g_b = planck_response(&cfg, 101.0).unwrap().gain;
    let hemt = quantum_efficiency(added_noise_referred(0.0, 0.0, g_b, reference::N_HEMT)).unwrap();
    assert!((eta - hemt).abs() < 1e-6, "{eta} vs {hemt}");
}

#[test]
fn narrowband_efficiency_at_high_gain_is_half() {
    let amp = jpa_core::AmplifierParams::from_gain_bandwidth(5.4e9, 1e7, 1e9, 300e3, 200e3).unwrap();
    let cfg = ChainConfig {
        grid: jpa_core::chain::GridSpec {
            spacing: Some(20e3),
            span_factor: 0.002,
        },
        ..ChainConfig::new(amp, NoiseBudget::ideal(), 0, 0.0).unwrap()
    };
    let fit = fit_coherent(&simulate_coherent_sweep(&cfg, &default_input_photons(), 1e5).unwrap()).unwrap();
    let p = extract_efficiency(&fit, EfficiencyMode::Narrowband).unwrap();
    assert!((p.eta - 0.5).abs() < 1e-3, "{}", p.eta);
}

#[test]
fn sql_separation() {
    let chain = ChainConfig::new(reference::amplifier(), with_pump(0.005, 0.5), 3, 0.01).unwrap();
    let out = pipeline::run(&PipelineConfig::new(chain)).unwrap();
    let broad: Vec<_> = out.rows(EfficiencyMode::Broadband).collect();
    // Above ~14 dB the HEMT no longer dominates and broadband beats the bound.
    let high: Vec<_> = broad.iter().filter(|r| r.gain_db >= 14.0).collect();
    assert!(high.len() >= 4);
    assert!(high.iter().all(|r| r.eta > r.eta_sql + 3.0 * r.sigma_eta), "{high:?}");
    for r in out.rows(EfficiencyMode::Narrowband) {
        assert!(r.eta <= r.eta_sql + 3.0 * r.sigma_eta);
    }
}

#[test]
fn linear_fit_is_scale_invariant() {
    let cfg = ChainConfig::new(reference::amplifier(), reference::noise(), 9, 0.01).unwrap();
    let ds = simulate_coherent_sweep(&cfg, &default_input_photons(), 100.0).unwrap();
    let a = fit_coherent(&ds).unwrap();
    let scaled = SweepDataset {
        y: ds.y.iter().map(|y| 7.5 * y).collect(),
        ..ds.clone()
    };
    let b = fit_coherent(&scaled).unwrap();
    assert!((b.params[0] / a.params[0] - 7.5).abs() < 1e-12);
    assert!((b.params[1] / a.params[1] - 7.5).abs() < 1e-12);
    let ea = extract_efficiency(&a, EfficiencyMode::Narrowband).unwrap();
    let eb = extract_efficiency(&b, EfficiencyMode::Narrowband).unwrap();
    assert!((ea.eta - eb.eta).abs() < 1e-14);
    assert!((ea.sigma_eta - eb.sigma_eta).abs() < 1e-12);
}

#[test]
fn eta_curve_from_simulated_chain() {
    let (n_jprime, epsilon) = (0.05, 0.6);
    let chain = ChainConfig::new(reference::amplifier(), with_pump(n_jprime, epsilon), 5, 0.01).unwrap();
    let cfg = PipelineConfig {
        weighting: Weighting::Relative,
        ..PipelineConfig::new(chain)
    };
    let out = pipeline::run(&cfg).unwrap();
    let fit = out.summary.broadband_fit.unwrap();
    assert!(fit.converged);
    assert!((fit.params[0] - n_jprime).abs() <= 3.0 * fit.std_errors[0], "{fit:?}");
    assert!((fit.params[1] - epsilon).abs() <= 3.0 * fit.std_errors[1], "{fit:?}");
    assert!(fit.r_squared.unwrap() >= 0.99);
}

#[test]
fn eta_curve_without_pump_noise_rises_to_one() {
    let gains = pipeline::logspace(2.0, 1e4, 9);
    let points: Vec<EfficiencyPoint> = gains
        .iter()
        .map(|&g| EfficiencyPoint {
            gain: g,
            eta: eta_model(g, 0.0, 0.6, reference::N_HEMT, EfficiencyMode::Broadband),
            sigma_eta: 0.0,
            mode: EfficiencyMode::Broadband,
        })
        .collect();
    let fit = fit_eta_curve(&points, reference::N_HEMT).unwrap();
    assert!(fit.params[0] < 1e-9, "{:?}", fit.params);
    let curve: Vec<f64> = pipeline::logspace(2.0, 1e6, 50)
        .iter()
        .map(|&g| eta_model(g, fit.params[0], fit.params[1], reference::N_HEMT, EfficiencyMode::Broadband))
        .collect();
    assert!(curve.windows(2).all(|w| w[1] >= w[0]));
    assert!(curve[49] > 0.999);
}

#[test]
fn narrowband_eta_curve_includes_idler() {
    let gains = pipeline::logspace(2.0, 300.0, 6);
    let points: Vec<EfficiencyPoint> = gains
        .iter()
        .map(|&g| EfficiencyPoint {
            gain: g,
            eta: eta_model(g, 0.02, 0.5, reference::N_HEMT, EfficiencyMode::Narrowband),
            sigma_eta: 0.01,
            mode: EfficiencyMode::Narrowband,
        })
        .collect();
    let fit = fit_eta_curve(&points, reference::N_HEMT).unwrap();
    assert!((fit.params[0] - 0.02).abs() < 1e-6);
    for &g in &gains {
        assert!(
            eta_model(g, fit.params[0], fit.params[1], reference::N_HEMT, EfficiencyMode::Narrowband)
                <= sql_efficiency_bound(g).unwrap()
        );
    }
}

#[test]
fn degenerate_designs_rejected() {
    let same = SweepDataset::new(
        SweepKind::Planck,
        10.0,
        0,
        vec![0.1, 0.1 + 1e-12, 0.1 + 2e-12],
        vec![1.0, 1.0, 1.0],
    )
    .unwrap();
    assert!(fit_planck(&same, 5e9).is_err());
    let one = SweepDataset::new(SweepKind::Coherent, 10.0, 0, vec![1.0], vec![2.0]).unwrap();
    assert!(fit_coherent(&one).is_err());
}

#[test]
fn weighted_power_law_round_trip() {
    let mut hits = 0;
    let x: Vec<f64> = (1..=25).map(|i| i as f64 * 4.0).collect();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x
            .iter()
            .map(|&x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.1 * x.powf(0.5) * (1.0 + 0.01 * z)
            })
            .collect();
        let fit = least_squares(
            |x, p| p[0] * x.powf(p[1]),
            Data::new(&x, &y),
            &[1.0, 1.0],
            None,
            &LmOptions::default(),
        )
        .unwrap();
        hits += usize::from(
            fit.converged
                && (fit.params[0] - 0.1).abs() <= 3.0 * fit.std_errors[0]
                && (fit.params[1] - 0.5).abs() <= 3.0 * fit.std_errors[1],
        );
    }
    assert!(hits >= 95, "{hits}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_planck_fits_are_exact(g in 2.0..2000.0f64, n_off in 0.0..3.0f64, f in 4e9..8e9f64) {
        let temps = default_temperatures();
        let y = temps.iter().map(|&t| g * (planck_occupation(f, t).unwrap() + n_off)).collect();
        let ds = SweepDataset::new(SweepKind::Planck, 1.0, 0, temps, y).unwrap();
        let fit = fit_planck(&ds, f).unwrap();
        prop_assert!(fit.converged);
        prop_assert!((fit.params[0] / g - 1.0).abs() < 1e-8);
        prop_assert!((fit.params[1] - n_off).abs() < 1e-8 * (1.0 + n_off));
    }

    #[test]
    fn noiseless_linear_fits_are_exact(g in 1.0..1e4f64, c in 0.0..1e3f64) {
        let x = default_input_photons();
        let y = x.iter().map(|x| g * x + c).collect();
        let ds = SweepDataset::new(SweepKind::Coherent, 1.0, 0, x, y).unwrap();
        let fit = fit_coherent(&ds).unwrap();
        prop_assert!((fit.params[0] / g - 1.0).abs() < 1e-12);
        prop_assert!((fit.params[1] - c).abs() < 1e-9 * (1.0 + c + g));
    }
}
