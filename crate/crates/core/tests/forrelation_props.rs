use forrelation_core::forrelation::{
    acceptance_probability, forrelation_value, nominal_threshold, quantum_forrelation_test, sample_exact_forrelated,
    sample_gaussian_forrelated, sample_uniform_instance, uniform_with, default_epsilon, ForrelationInstance,
};
use forrelation_core::quantum::{run_query_algorithm, QueryProgram};
use forrelation_core::rng::rng_from_seed;
use forrelation_core::walsh::fwht;
use proptest::prelude::*;

fn phi_direct(inst: &ForrelationInstance) -> f64 {
    let size = 1usize << inst.ell();
    let s = |b: bool| if b { -1.0 } else { 1.0 };
    let mut t = 0.0;
    for x in 0..size {
        for y in 0..size {
            t += s(inst.f().get(x)) * s((x & y).count_ones() % 2 == 1) * s(inst.g().get(y));
        }
    }
    t / (size as f64).powf(1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuit_acceptance_is_phi_squared(ell in 0u32..=6, seed in any::<u64>(), kind in 0u8..3) {
        let inst = match kind {
            0 => sample_uniform_instance(ell, seed).unwrap(),
            1 => sample_exact_forrelated(ell.max(1), seed).unwrap(),
            _ => sample_gaussian_forrelated(ell.max(1), default_epsilon(ell.max(1)), seed).unwrap(),
        };
        let phi = phi_direct(&inst);
        prop_assert!((forrelation_value(&inst) - phi).abs() < 1e-9);
        prop_assert!((acceptance_probability(&inst) - phi * phi).abs() < 1e-9);
        prop_assert!(phi.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn instance_length_is_two_tables(ell in 0u32..=10, seed in any::<u64>()) {
        let inst = sample_uniform_instance(ell, seed).unwrap();
        prop_assert_eq!(inst.f().len(), 1usize << ell);
        prop_assert_eq!(inst.g().len(), 1usize << ell);
        prop_assert_eq!(inst.block_len(), 2usize << ell);
    }

    #[test]
    fn random_programs_conserve_norm_and_mass(
        nq in 1usize..=8,
        calls in 0usize..=6,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from_seed(seed);
        let reg = 1 + (seed as usize) % nq;
        let len = 1usize << nq;
        let program = QueryProgram::random(nq, calls, reg, len, &mut rng);
        let oracle: Vec<bool> = (0..len).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let run = run_query_algorithm(&program, &oracle).unwrap();
        prop_assert!(run.max_norm_error <= 1e-9);
        prop_assert!((run.total_query_mass() - calls as f64).abs() <= 1e-9);
        prop_assert!(run.query_mass.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn query_mass_is_nondecreasing(nq in 1usize..=6, calls in 1usize..=5, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let len = 1usize << nq;
        let full = QueryProgram::random(nq, calls, nq, len, &mut rng);
        let oracle: Vec<bool> = (0..len).map(|i| i % 3 == 0).collect();
        // prefixes of the program up to each oracle call
        let mut prev: Option<Vec<f64>> = None;
        let ops = &full.ops;
        for cut in 0..=ops.len() {
            let mut p = QueryProgram::new(nq);
            for op in &ops[..cut] {
                p.push(op.clone());
            }
            let mass = run_query_algorithm(&p, &oracle).unwrap().query_mass;
            if let Some(prev) = &prev {
                for (a, b) in prev.iter().zip(&mass) {
                    prop_assert!(b + 1e-12 >= *a);
                }
            }
            prev = Some(mass);
        }
    }
}

#[test]
fn walsh_spectrum_matches_phi_numerator() {
    let inst = sample_exact_forrelated(5, 9).unwrap();
    let mut spec: Vec<i64> = (0..32).map(|x| if inst.f().get(x) { -1 } else { 1 }).collect();
    fwht(&mut spec);
    let s: i64 = spec.iter().enumerate().map(|(y, v)| v * if inst.g().get(y) { -1 } else { 1 }).sum();
    assert!((s as f64 / 32f64.powf(1.5) - forrelation_value(&inst)).abs() < 1e-12);
}

#[test]
fn uniform_phi_moments_by_monte_carlo() {
    let mut rng = rng_from_seed(4);
    for ell in [4u32, 6, 8] {
        let trials = 4000;
        let vals: Vec<f64> = (0..trials).map(|_| forrelation_value(&uniform_with(ell, &mut rng).unwrap())).collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = 2f64.powi(-(ell as i32));
        assert!(mean.abs() <= 3.0 * (var / trials as f64).sqrt(), "ell={ell}: mean {mean}");
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let m2 = sq.iter().sum::<f64>() / trials as f64;
        let sd = (sq.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        assert!((m2 - var).abs() <= 3.0 * sd / (trials as f64).sqrt(), "ell={ell}: E[phi^2] {m2} vs {var}");
    }
}

#[test]
fn gaussian_marginals_are_uniform() {
    let ell = 6;
    let trials = 2000u64;
    let (mut f_ones, mut g_ones) = (0u64, 0u64);
    for s in 0..trials {
        let inst = sample_gaussian_forrelated(ell, default_epsilon(ell), 1000 + s).unwrap();
        f_ones += inst.f().count_ones() as u64;
        g_ones += inst.g().count_ones() as u64;
    }
    let total = (trials << ell) as f64;
    let sigma = (0.25 / total).sqrt();
    for (name, ones) in [("f", f_ones), ("g", g_ones)] {
        let z = (ones as f64 / total - 0.5) / sigma;
        assert!(z.abs() <= 3.0, "{name}: z = {z}");
    }
}

#[test]
fn more_repetitions_do_not_hurt() {
    let ell = 6;
    let thr = nominal_threshold(ell, forrelation_core::forrelation::ForrelatedSampler::Exact);
    let trials = 3000u64;
    let mut rng = rng_from_seed(77);
    let mut errors = |reps: u32| {
        let mut e = 0u64;
        for s in 0..trials {
            let forr = s % 2 == 0;
            let inst = if forr { sample_exact_forrelated(ell, s).unwrap() } else { sample_uniform_instance(ell, s).unwrap() };
            e += (quantum_forrelation_test(&inst, reps, thr, &mut rng).unwrap() != forr) as u64;
        }
        e as f64 / trials as f64
    };
    let (lo, hi) = (errors(2), errors(8));
    let sigma = ((lo * (1.0 - lo) + hi * (1.0 - hi)) / trials as f64).sqrt();
    assert!(hi <= lo + 3.0 * sigma, "error at 8 reps {hi} vs 2 reps {lo}");
}
