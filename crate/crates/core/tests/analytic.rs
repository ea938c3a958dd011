use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twolevel_core::noise::{log_grid, NoiseModel};
use twolevel_core::{fano_closed_form, steady_state, LaserParams};

fn random_params(rng: &mut ChaCha8Rng) -> LaserParams {
    let alpha = 10f64.powf(rng.gen_range(-1.0..2.0));
    let gamma = if rng.gen_bool(0.2) { 0.0 } else { 10f64.powf(rng.gen_range(-2.0..4.0)) };
    let pump = 10f64.powf(rng.gen_range(-1.0..5.0));
    LaserParams::new(1e5, alpha, gamma, pump, rng.gen_range(0.0..=1.0)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn photocurrent_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let model = NoiseModel::new(random_params(&mut rng)).unwrap();
        for w in log_grid(1e-3, 1e6, 50) {
            let a = model.photocurrent_psd(w).unwrap();
            let b = model.photocurrent_psd_closed_form(w);
            worst = worst.max(rel(a, b));
        }
    }
    assert!(worst < 1e-10, "worst relative gap {worst:e}");
}

#[test]
fn fano_bump_near_ten_for_thresholdless_laser() {
    let base = LaserParams::new(1e5, 6.32, 0.0, 1.0, 1.0).unwrap();
    let grid = log_grid(1.0, 1e3, 121);
    let f: Vec<f64> = grid
        .iter()
        .map(|&j| fano_closed_form(&base.with_pump(j).unwrap()).unwrap())
        .collect();
    let (i, _) = f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert!(i > 0 && i < grid.len() - 1);
    assert!((3.0..=30.0).contains(&grid[i]), "argmax J = {}", grid[i]);
}

#[test]
fn noisiest_where_photon_number_is_order_one() {
    for xi in [0.0, 1.0] {
        let base = LaserParams::new(1e5, 6.32, 0.0, 1.0, xi).unwrap();
        let grid = log_grid(1e-2, 1e5, 141);
        let (best_j, _) = grid
            .iter()
            .map(|&j| (j, NoiseModel::new(base.with_pump(j).unwrap()).unwrap().psd_peak().unwrap().s_max))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let m = steady_state(&base.with_pump(best_j).unwrap()).m;
        assert!((0.1..=10.0).contains(&m), "xi {xi}: m = {m}");
    }
}

#[test]
fn bump_tracks_threshold() {
    let argmax = |gamma: f64| {
        let base = LaserParams::new(1e5, 6.32, gamma, 1.0, 1.0).unwrap();
        log_grid(0.1, 1e6, 281)
            .into_iter()
            .map(|j| (j, fano_closed_form(&base.with_pump(j).unwrap()).unwrap()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    };
    let (j0, f0) = argmax(0.0);
    let (j632, f632) = argmax(632.0);
    assert!(j632 > j0);
    assert!(f632 > f0, "bump sharpens with gamma");
}

#[test]
fn thermal_statistics_below_threshold() {
    let base = LaserParams::new(1e5, 6.32, 632.0, 1.0, 1.0).unwrap();
    for j in log_grid(1.0, 3000.0, 30) {
        let p = base.with_pump(j).unwrap();
        let m = steady_state(&p).m;
        if (0.5..=5.0).contains(&m) {
            let f = NoiseModel::new(p).unwrap().fano_quadrature().unwrap();
            assert!(rel(f, m + 1.0) < 0.1, "J {j}: F {f} vs m+1 {}", m + 1.0);
        }
    }
}
