//! Cross-checks against independent brute-force or external reference
//! computations.

use craft_core::clustering::{core_distances, hdbscan_fit, prim_mst, HdbscanParams, NOISE};
use craft_core::evaluation::upgma;
use craft_core::kpca::kpca_reduce;
use craft_core::numeric::student_t_two_sided;
use craft_core::self_similarity::{analyze_exponent, pearson_with_p, scal_at};
use craft_core::synthgen::{catalog, generate, Tone};
use craft_core::tonality::detect_peaks;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

mod common;
use common::{brute_peaks, kruskal_weights, random_row};

fn fixture(name: &str) -> Value {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// ---------- peaks ----------

#[test]
fn prominence_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let row = random_row(&mut rng);
        let expected = brute_peaks(&row);
        let got = detect_peaks(&row, 0.0);
        let got: Vec<(usize, f64)> = got.iter().map(|p| (p.index, p.prominence)).collect();
        assert_eq!(got, expected, "row {row:?}");
        let filtered: Vec<(usize, f64)> = expected.iter().copied().filter(|p| p.1 >= 3.0).collect();
        let got3: Vec<(usize, f64)> = detect_peaks(&row, 3.0).iter().map(|p| (p.index, p.prominence)).collect();
        assert_eq!(got3, filtered);
    }
}

// ---------- MST ----------

#[test]
fn mst_weights_match_kruskal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(1..=4);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let ms = rng.random_range(1..=n.min(4));
        let core = core_distances(&pts, ms);
        let mut ours: Vec<f64> = prim_mst(&pts, &core).iter().map(|e| e.weight).collect();
        ours.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(ours, kruskal_weights(&pts, ms));
    }
}

// ---------- HDBSCAN ----------

/// Points on a line: a = {0, 1, 2, 3} plus 11, b = {20, 21, 22, 23}, and 60.
///
/// With min_samples 2 every core distance is the nearest-neighbour gap
/// (1 inside a and b, 8 for 11, 37 for 60). The MST holds six unit edges,
/// 11–3 at 8, 11–20 at 9 and 60–23 at 37. Condensing with
/// min_cluster_size 3: 60 drops out of the root at λ = 1/37; at λ = 1/9 the
/// root splits into {a, 11} and b. In the first child 11 leaves at λ = 1/8
/// and the rest at λ = 1. Stabilities are 1/8 − 1/9 + 4·(1 − 1/9) and
/// 4·(1 − 1/9); both beat their parent, which is never selected when it
/// has children. The death λ of both clusters is 1, so 11 has membership
/// 1/8 and every other member 1.
#[test]
fn hand_computed_line_instance() {
    let xs = [0.0, 1.0, 2.0, 3.0, 11.0, 20.0, 21.0, 22.0, 23.0, 60.0];
    let pts: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
    let mut params = HdbscanParams::new(3);
    params.min_samples = Some(2);
    let m = hdbscan_fit(&pts, &params).unwrap();
    assert_eq!(m.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, NOISE]);
    for (i, c) in m.confidence.iter().enumerate() {
        let expected = match i {
            4 => 0.125,
            9 => 0.0,
            _ => 1.0,
        };
        assert!((c - expected).abs() < 1e-12, "point {i}: {c}");
    }
    let core = core_distances(&pts, 2);
    let total: f64 = prim_mst(&pts, &core).iter().map(|e| e.weight).sum();
    assert_eq!(total, 60.0);
}

#[test]
fn hdbscan_matches_reference_implementation() {
    let v = fixture("hdbscan_reference.json");
    let pts: Vec<Vec<f64>> = serde_json::from_value(v["points"].clone()).unwrap();
    for case in v["cases"].as_array().unwrap() {
        let mut params = HdbscanParams::new(case["min_cluster_size"].as_u64().unwrap() as usize);
        params.min_samples = case["min_samples"].as_u64().map(|x| x as usize);
        let m = hdbscan_fit(&pts, &params).unwrap();
        let labels: Vec<i64> = serde_json::from_value(case["labels"].clone()).unwrap();
        let probs: Vec<f64> = serde_json::from_value(case["probabilities"].clone()).unwrap();
        for i in 0..pts.len() {
            assert_eq!(labels[i] == NOISE, m.labels[i] == NOISE, "noise status of {i}");
            for j in 0..pts.len() {
                assert_eq!(labels[i] == labels[j], m.labels[i] == m.labels[j], "pair {i},{j}");
            }
            assert!((probs[i] - m.confidence[i]).abs() < 1e-9, "probability of {i}");
        }
    }
}

// ---------- KPCA ----------

#[test]
fn kpca_matches_reference_implementation() {
    let v = fixture("kpca_reference.json");
    let pts: Vec<Vec<f64>> = serde_json::from_value(v["points"].clone()).unwrap();
    let eig: Vec<f64> = serde_json::from_value(v["eigenvalues"].clone()).unwrap();
    let scores: Vec<Vec<f64>> = serde_json::from_value(v["scores"].clone()).unwrap();
    let r = kpca_reduce(&pts, Some(v["gamma"].as_f64().unwrap()), 1.0).unwrap();
    for (k, e) in eig.iter().enumerate() {
        assert!((r.eigenvalues[k] - e).abs() < 1e-9 * e.max(1.0), "eigenvalue {k}");
        // eigenvector signs are arbitrary
        let dot: f64 = (0..pts.len()).map(|i| r.scores[i][k] * scores[i][k]).sum();
        let sign = dot.signum();
        for i in 0..pts.len() {
            assert!((r.scores[i][k] - sign * scores[i][k]).abs() < 1e-8, "score {i},{k}");
        }
    }
}

// ---------- UPGMA ----------

/// Average linkage recomputed from the original distances at every step.
fn brute_upgma(d: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += d[i][j];
                    }
                }
                let avg = s / (clusters[a].len() * clusters[b].len()) as f64;
                if avg < best.0 {
                    best = (avg, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let mut merged = clusters[a].clone();
        merged.extend(&clusters[b]);
        merged.sort();
        clusters.remove(b);
        clusters[a] = merged.clone();
        out.push((merged, h));
    }
    out
}

#[test]
fn upgma_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let k = rng.random_range(2..9);
        let pts: Vec<(f64, f64)> = (0..k).map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))).collect();
        let d: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect();
        let merges = upgma(&d);
        let mut members: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
        let expected = brute_upgma(&d);
        for (m, (set, h)) in merges.iter().zip(&expected) {
            let mut merged = members[m.left].clone();
            merged.extend(&members[m.right]);
            merged.sort();
            assert_eq!(&merged, set);
            assert!((m.height - h).abs() < 1e-12);
            assert_eq!(m.size, set.len());
            members.push(merged);
        }
        assert_eq!(merges.len(), k - 1);
    }
}

// ---------- correlation p-value ----------

/// Two-sided p-value by Simpson integration of the t density with 8
/// degrees of freedom, Γ(4.5) and Γ(4) in closed form.
fn simpson_p_df8(t: f64) -> f64 {
    let nu = 8.0;
    let gamma_45 = 3.5 * 2.5 * 1.5 * 0.5 * std::f64::consts::PI.sqrt();
    let c = gamma_45 / ((nu * std::f64::consts::PI).sqrt() * 6.0);
    let f = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let n = 20_000;
    let h = t / n as f64;
    let mut s = f(0.0) + f(t);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

#[test]
fn correlation_p_value_matches_integrated_density() {
    let rho: f64 = 0.6324;
    let t = rho * 8f64.sqrt() / (1.0 - rho * rho).sqrt();
    let expected = simpson_p_df8(t);
    assert!((student_t_two_sided(t, 8.0) - expected).abs() < 1e-10);
    assert!((expected - 0.0499).abs() < 5e-4);

    // ten pairs with exactly this correlation
    let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let z: Vec<f64> = [1.0, -2.0, 0.5, 3.0, -1.0, 2.0, -3.0, 0.0, 1.5, -2.5].to_vec();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mean(&x)).collect();
    let zc: Vec<f64> = z.iter().map(|v| v - mean(&z)).collect();
    let proj = xc.iter().zip(&zc).map(|(a, b)| a * b).sum::<f64>() / xc.iter().map(|a| a * a).sum::<f64>();
    let zo: Vec<f64> = zc.iter().zip(&xc).map(|(b, a)| b - proj * a).collect();
    let nx = xc.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nz = zo.iter().map(|a| a * a).sum::<f64>().sqrt();
    let y: Vec<Option<f64>> = xc
        .iter()
        .zip(&zo)
        .map(|(a, b)| Some(rho * a / nx + (1.0 - rho * rho).sqrt() * b / nz))
        .collect();
    let xo: Vec<Option<f64>> = x.iter().map(|v| Some(*v)).collect();
    let (r, p) = pearson_with_p(&xo, &y).unwrap();
    assert!((r - rho).abs() < 1e-12);
    assert!((p - expected).abs() < 1e-9);
}

// ---------- secondary exponent ----------

#[test]
fn mixed_source_takes_secondary_maximum() {
    let c = catalog();
    let mut a = c.get("he-resonance").unwrap().clone();
    a.mechanism.tones = vec![
        Tone { freq: 6.0, prominence_db: 14.0, width_octaves: 0.08, m: None },
        Tone { freq: 12.0, prominence_db: 14.0, width_octaves: 0.08, m: None },
        Tone { freq: 30.0, prominence_db: 12.0, width_octaves: 0.1, m: Some(1.0) },
        Tone { freq: 45.0, prominence_db: 12.0, width_octaves: 0.1, m: Some(1.0) },
    ];
    a.noise_db = 0.3;
    let r = generate(&a, &c.setup.machs, 3).unwrap();
    let ea = analyze_exponent(&r).unwrap();
    assert!(ea.m_star < 0.05);
    // fine scan of the curve above 0.5 for its highest interior maximum
    let grid: Vec<f64> = (0..=300).map(|i| 0.5 + i as f64 * 0.005).collect();
    let vals: Vec<f64> = grid.iter().map(|m| scal_at(&r, *m).map(|s| s.scal).unwrap_or(f64::NAN)).collect();
    let (mut best, mut best_v) = (f64::NAN, f64::NEG_INFINITY);
    for i in 1..grid.len() - 1 {
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > best_v {
            best = grid[i];
            best_v = vals[i];
        }
    }
    assert!((ea.m_st - best).abs() <= 0.05, "m_st {} vs {}", ea.m_st, best);
}
