use esafe_core::codec::{cs_deshift, cs_enc, cs_gen, quantize};
use esafe_core::recovery::{
    build_basis, gen_sensing_matrix, measurements_for_cr, omp_solve, prd, synth_sparse_signal, BasisKind,
    Dictionary, RecoveryParams,
};
use esafe_core::seed::seeded_rng;
use rand::seq::index::sample;
use rand::Rng;

const L1: i64 = 590;
const L2: i64 = 1487;

/// Planted support check: least squares restricted to the true support
/// reproduces y exactly, and the greedy support must equal the planted one.
#[test]
fn ten_sparse_recovery_finds_planted_support() {
    let (m, n, s) = (256, 512, 10);
    let psi = build_basis::<f64>(n, BasisKind::Cosine).unwrap();
    let mut good = 0;
    for trial in 0..100u64 {
        let seed = trial.to_be_bytes();
        let phi = gen_sensing_matrix::<f64>(&seed, m, n).unwrap();
        let dict = Dictionary::new(&phi, &psi).unwrap();
        let mut rng = seeded_rng("test/planted", &seed);
        let mut support: Vec<usize> = sample(&mut rng, n, s).into_vec();
        support.sort_unstable();
        let mut b = vec![0.0; n];
        for &i in &support {
            b[i] = rng.gen_range(1.0..10.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let x = psi.synthesize(&b).unwrap();
        let y = phi.matrix().mul_vec(&x).unwrap();
        let sol = omp_solve(&y, &dict, &RecoveryParams::default_for(m, &y)).unwrap();
        let x_hat = psi.synthesize(&sol.coefficients).unwrap();
        let mut found = sol.support.clone();
        found.sort_unstable();
        if prd(&x, &x_hat).unwrap() < 1.0 && found == support {
            good += 1;
        }
    }
    assert!(good >= 95, "only {good}/100 trials recovered");
}

#[test]
fn planted_signal_self_consistent_at_cr_50() {
    let n = 512;
    let m = measurements_for_cr(n, 50.0).unwrap();
    let psi = build_basis::<f64>(n, BasisKind::Cosine).unwrap();
    for seed in 0..10u64 {
        let s = synth_sparse_signal::<f64>(&seed.to_be_bytes(), n, 15, L1, L2).unwrap();
        let phi = gen_sensing_matrix::<f64>(&seed.to_be_bytes(), m, n).unwrap();
        let dict = Dictionary::new(&phi, &psi).unwrap();
        let y = phi.matrix().mul_vec(s.signal.values()).unwrap();
        let sol = omp_solve(&y, &dict, &RecoveryParams::default_for(m, &y)).unwrap();
        let x_hat = psi.synthesize(&sol.coefficients).unwrap();
        assert!(prd(s.signal.values(), &x_hat).unwrap() < 1.0);
        let mut found = sol.support.clone();
        found.sort_unstable();
        assert_eq!(found, s.support);
    }
}

#[test]
fn fourier_basis_also_recovers() {
    let n = 256;
    let psi = build_basis::<f64>(n, BasisKind::RealFourier).unwrap();
    let phi = gen_sensing_matrix::<f64>(b"fourier", 128, n).unwrap();
    let dict = Dictionary::new(&phi, &psi).unwrap();
    let mut b = vec![0.0; n];
    b[0] = 16_000.0;
    b[7] = 900.0;
    b[40] = -700.0;
    let x = psi.synthesize(&b).unwrap();
    let y = phi.matrix().mul_vec(&x).unwrap();
    let sol = omp_solve(&y, &dict, &RecoveryParams::default_for(128, &y)).unwrap();
    assert!(prd(&x, &psi.synthesize(&sol.coefficients).unwrap()).unwrap() < 1e-6);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Full codec pipeline PRD for one seed.
fn pipeline_prd(seed: u64, cr: f64, qs: Option<u32>) -> f64 {
    let n = 512;
    let m = measurements_for_cr(n, cr).unwrap();
    let sb = seed.to_be_bytes();
    let s = synth_sparse_signal::<f64>(&sb, n, 10, L1, L2).unwrap();
    let psi = build_basis::<f64>(n, BasisKind::Cosine).unwrap();
    let phi = gen_sensing_matrix::<f64>(&sb, m, n).unwrap();
    let key = cs_gen(&sb, n, L1, L2).unwrap();
    let mut c = cs_enc(&key, &s.signal, &phi).unwrap();
    if let Some(q) = qs {
        c = quantize(&c, q).unwrap();
    }
    let y = cs_deshift(&key, &c, &phi, L1, L2).unwrap();
    let dict = Dictionary::new(&phi, &psi).unwrap();
    let sol = omp_solve(&y, &dict, &RecoveryParams::for_measurements(m, &y, qs)).unwrap();
    prd(s.signal.values(), &psi.synthesize(&sol.coefficients).unwrap()).unwrap()
}

#[test]
fn median_prd_grows_with_quantization_step() {
    let mut last = 0.0;
    for qs in [10, 20, 30, 60, 100, 120] {
        let med = median((0..20).map(|s| pipeline_prd(s, 50.0, Some(qs))).collect());
        assert!(med >= last, "qs={qs}: median {med} < {last}");
        last = med;
    }
}

#[test]
fn median_prd_grows_with_compression() {
    let mut last = 0.0;
    for cr in [50.0, 60.0, 70.0, 80.0, 90.0, 95.0] {
        let med = median((0..20).map(|s| pipeline_prd(s, cr, Some(20))).collect());
        assert!(med >= last, "cr={cr}: median {med} < {last}");
        last = med;
    }
}
