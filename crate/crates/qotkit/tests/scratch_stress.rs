use qotkit::linalg::FactorShape;
use qotkit::quadratic::{cost_operator, dquad};
use qotkit::quantum::{random_observable, random_state};
use qotkit::verify::{suite_marton, suite_pinsker};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn scan(dim: usize, observables: usize, trials: usize, seed: u64) {
    let shape = FactorShape::new(vec![dim]).unwrap();
    let mut bad = 0;
    for t in 0..trials {
        let ts = trial_seed(seed, t);
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let obs: Vec<_> = (0..observables)
            .map(|_| random_observable(&shape, rng.next_u64()).unwrap())
            .collect();
        let cost = cost_operator(obs, dim).unwrap();
        let sigma = random_state(&shape, dim, rng.next_u64()).unwrap();
        let rho = random_state(&shape, dim, rng.next_u64()).unwrap();
        let tau = random_state(&shape, dim, rng.next_u64()).unwrap();
        for (name, a, b) in [
            ("fwd", &sigma, &rho),
            ("bwd", &rho, &sigma),
            ("self_s", &sigma, &sigma),
            ("to_mid", &sigma, &tau),
            ("mid_self", &tau, &tau),
            ("from_mid", &tau, &rho),
        ] {
            if let Err(e) = dquad(a, b, &cost) {
                bad += 1;
                let la = a.matrix().eigh().unwrap().values;
                let lb = b.matrix().eigh().unwrap().values;
                println!(
                    "dim{} t={} {}: {:?} | eig_a={:?} eig_b={:?}",
                    dim, t, name, e, la, lb
                );
            }
        }
    }
    println!("dim{} total failures: {}", dim, bad);
}

#[test]
fn repro_one() {
    std::env::set_var("QOTKIT_IPM_TRACE", "1");
    std::env::set_var("QOTKIT_REPAIR_TRACE", "1");
    let dim = 2;
    let shape = FactorShape::new(vec![dim]).unwrap();
    let ts = trial_seed(12345, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(ts);
    let obs: Vec<_> = (0..1)
        .map(|_| random_observable(&shape, rng.next_u64()).unwrap())
        .collect();
    let cost = cost_operator(obs, dim).unwrap();
    let sigma = random_state(&shape, dim, rng.next_u64()).unwrap();
    let rho = random_state(&shape, dim, rng.next_u64()).unwrap();
    match dquad(&rho, &sigma, &cost) {
        Ok(r) => println!("bwd ok value={:.6e}", r.value()),
        Err(e) => println!("bwd err {:?}", e),
    }
}

#[test]
fn scan_dim2() {
    scan(2, 1, 60, 12345);
}

#[test]
fn scan_dim4() {
    scan(4, 2, 30, 777);
}

#[test]
fn stress_marton_n3() {
    let r = suite_marton(25, 99, 3).unwrap();
    assert!(r.passed(), "violations: {:?}", r.violations);
    println!("marton3 worst={:.3e} skipped={}", r.worst_margin, r.skipped);
}

#[test]
fn stress_pinsker_n3() {
    let r = suite_pinsker(60, 4242, 3).unwrap();
    assert!(r.passed(), "violations: {:?}", r.violations);
    println!("pinsker3 worst={:.3e} skipped={}", r.worst_margin, r.skipped);
}
