//! CSP checked against independent oracles: brute-force covariance sums, a
//! Rayleigh-quotient grid search, explicit flip-and-average, and naive
//! row-by-column products.

use focusloop_core::csp::{
    apply_filters, average_filters, class_covariance, compute_filters, CovarianceMatrix,
    SpatialFilterPair,
};
use focusloop_core::Window;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_window(rng: &mut ChaCha8Rng, c: usize, t: usize) -> Window {
    let rows: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..t).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    Window::from_rows(&rows, 0).unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng) -> CovarianceMatrix {
    // A Aᵀ + 0.1 I from a random 2x2 A
    let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m00 = a[0] * a[0] + a[1] * a[1] + 0.1;
    let m01 = a[0] * a[2] + a[1] * a[3];
    let m11 = a[2] * a[2] + a[3] * a[3] + 0.1;
    CovarianceMatrix::new(2, vec![m00, m01, m01, m11]).unwrap()
}

/// Brute force: argmax of wᵀ C_T w / wᵀ C_R w over 3601 unit vectors on a
/// 0.05° grid covering [0°, 180°].
fn grid_argmax(ct: &CovarianceMatrix, cr: &CovarianceMatrix) -> [f64; 2] {
    let q = |m: &CovarianceMatrix, w: [f64; 2]| {
        m.get(0, 0) * w[0] * w[0] + 2.0 * m.get(0, 1) * w[0] * w[1] + m.get(1, 1) * w[1] * w[1]
    };
    let mut best = [1.0, 0.0];
    let mut best_ratio = f64::NEG_INFINITY;
    for k in 0..3601 {
        let th = (k as f64 * 0.05).to_radians();
        let w = [th.cos(), th.sin()];
        let r = q(ct, w) / q(cr, w);
        if r > best_ratio {
            best_ratio = r;
            best = w;
        }
    }
    best
}

fn rayleigh(ct: &CovarianceMatrix, cr: &CovarianceMatrix, w: &[f64]) -> f64 {
    let q = |m: &CovarianceMatrix| {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += w[i] * m.get(i, j) * w[j];
            }
        }
        acc
    };
    q(ct) / q(cr)
}

#[test]
fn covariance_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let windows: Vec<Window> = (0..100).map(|_| random_window(&mut rng, 2, 5)).collect();
    let mut oracle = [[0.0; 2]; 2];
    for w in &windows {
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for t in 0..5 {
                    m[i][j] += w.get(i, t) * w.get(j, t);
                }
            }
        }
        let tr = m[0][0] + m[1][1];
        for i in 0..2 {
            for j in 0..2 {
                oracle[i][j] += m[i][j] / tr / 100.0;
            }
        }
    }
    let c = class_covariance(&windows).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((c.get(i, j) - oracle[i][j]).abs() < 1e-10);
        }
    }
    assert!((c.get(0, 0) + c.get(1, 1) - 1.0).abs() < 1e-12);
    assert!((c.get(0, 1) - c.get(1, 0)).abs() < 1e-12);
}

#[test]
fn filters_match_rayleigh_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let ct = random_spd(&mut rng);
        let cr = random_spd(&mut rng);
        let sol = compute_filters(&ct, &cr).unwrap();
        let g = grid_argmax(&ct, &cr);
        let w = &sol.filters.w_t;
        let cos = (w[0] * g[0] + w[1] * g[1]).abs();
        assert!(cos > 0.999, "cosine {}", cos);
        // Rayleigh optimality against every grid point
        let best = rayleigh(&ct, &cr, w);
        for k in 0..3601 {
            let th = (k as f64 * 0.05).to_radians();
            assert!(best >= rayleigh(&ct, &cr, &[th.cos(), th.sin()]) - 1e-6);
        }
    }
}

#[test]
fn filters_are_whitened_orthogonal_and_unit_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let ct = random_spd(&mut rng);
        let cr = random_spd(&mut rng);
        let p = compute_filters(&ct, &cr).unwrap().filters;
        // w_tᵀ (C_T + C_R) w_r = 0 iff the whitened vectors are orthogonal
        let mut cross = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                cross += p.w_t[i] * (ct.get(i, j) + cr.get(i, j)) * p.w_r[j];
            }
        }
        assert!(cross.abs() < 1e-8);
        for w in [&p.w_t, &p.w_r] {
            let n = (w[0] * w[0] + w[1] * w[1]).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
            let big = if w[0].abs() >= w[1].abs() { w[0] } else { w[1] };
            assert!(big > 0.0);
        }
    }
}

#[test]
fn four_channel_filters_maximize_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let conc: Vec<Window> = (0..60)
        .map(|_| {
            let mut w = random_window(&mut rng, 4, 5);
            w = w.combine(1.0, &Window::from_rows(&[vec![3.0; 5], vec![0.0; 5], vec![0.0; 5], vec![0.0; 5]], 0).unwrap(), 1.0).unwrap();
            w
        })
        .collect();
    let relax: Vec<Window> = (0..60).map(|_| random_window(&mut rng, 4, 5)).collect();
    let ct = class_covariance(&conc).unwrap();
    let cr = class_covariance(&relax).unwrap();
    let sol = compute_filters(&ct, &cr).unwrap();
    let ratio = |w: &[f64]| {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                a += w[i] * ct.get(i, j) * w[j];
                b += w[i] * cr.get(i, j) * w[j];
            }
        }
        a / b
    };
    let best = ratio(&sol.filters.w_t);
    for _ in 0..2000 {
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(ratio(&w) <= best + 1e-9);
        assert!(ratio(&w) >= ratio(&sol.filters.w_r) - 1e-9);
    }
}

#[test]
fn averaging_matches_explicit_flip_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let unit = |rng: &mut ChaCha8Rng| {
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        vec![th.cos(), th.sin()]
    };
    let pairs: Vec<SpatialFilterPair> = (0..3)
        .map(|_| SpatialFilterPair {
            w_t: unit(&mut rng),
            w_r: unit(&mut rng),
        })
        .collect();
    let oracle = |get: fn(&SpatialFilterPair) -> &Vec<f64>| {
        let r = get(&pairs[0]);
        let mut acc = [0.0; 2];
        for p in &pairs {
            let v = get(p);
            let s = if v[0] * r[0] + v[1] * r[1] < 0.0 { -1.0 } else { 1.0 };
            acc[0] += s * v[0];
            acc[1] += s * v[1];
        }
        let n = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
        [acc[0] / n, acc[1] / n]
    };
    let avg = average_filters(&pairs).unwrap();
    let ot = oracle(|p| &p.w_t);
    let or = oracle(|p| &p.w_r);
    for i in 0..2 {
        assert!((avg.w_t[i] - ot[i]).abs() < 1e-12);
        assert!((avg.w_r[i] - or[i]).abs() < 1e-12);
    }
}

#[test]
fn apply_matches_naive_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let p = SpatialFilterPair {
            w_t: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            w_r: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        };
        let w = random_window(&mut rng, 2, 5);
        let f = apply_filters(&p, &w).unwrap();
        assert_eq!(f.len(), 10);
        for t in 0..5 {
            let ht = p.w_t[0] * w.get(0, t) + p.w_t[1] * w.get(1, t);
            let hr = p.w_r[0] * w.get(0, t) + p.w_r[1] * w.get(1, t);
            assert!((f[t] - ht).abs() < 1e-12);
            assert!((f[5 + t] - hr).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn filters_scale_invariant(seed in 0u64..1000, s in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Window> = (0..20).map(|_| random_window(&mut rng, 2, 5)).collect();
        let b: Vec<Window> = (0..20).map(|_| random_window(&mut rng, 2, 5)).collect();
        let base = compute_filters(&class_covariance(&a).unwrap(), &class_covariance(&b).unwrap()).unwrap();
        let sa: Vec<Window> = a.iter().map(|w| w.scaled(s)).collect();
        let sb: Vec<Window> = b.iter().map(|w| w.scaled(s)).collect();
        let scaled = compute_filters(&class_covariance(&sa).unwrap(), &class_covariance(&sb).unwrap()).unwrap();
        for i in 0..2 {
            prop_assert!((base.filters.w_t[i] - scaled.filters.w_t[i]).abs() < 1e-9);
            prop_assert!((base.filters.w_r[i] - scaled.filters.w_r[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn apply_is_linear(seed in 0u64..1000, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = SpatialFilterPair { w_t: vec![0.6, 0.8], w_r: vec![-0.8, 0.6] };
        let x = random_window(&mut rng, 2, 5);
        let y = random_window(&mut rng, 2, 5);
        let lhs = apply_filters(&p, &x.combine(a, &y, b).unwrap()).unwrap();
        let fx = apply_filters(&p, &x).unwrap();
        let fy = apply_filters(&p, &y).unwrap();
        for i in 0..10 {
            prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-10);
        }
    }
}
