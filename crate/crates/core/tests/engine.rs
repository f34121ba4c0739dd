mod common;

use common::*;
use fmnes::engine::{
    apply_updates, ask, detect_phase, emphasize_expansion, estimate_gradients, maybe_reset, rank,
    rank_one_update, select_weights_and_rates, update_p_c, update_p_sigma, LearningRates,
};
use fmnes::linalg::det;
use fmnes::{
    chi_d, compute_distance_weights, evaluate, feasible_alpha, make_benchmark, Candidate,
    DerivedParams, Engine, EvalCounter, EvaluatedSolution, Fitness, Phase, Problem, SearchState,
    StrategyConfig, StrategyMode, StrategyOverrides, SymMatrix,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

fn solution(z: DVector<f64>, value: Fitness) -> EvaluatedSolution {
    Candidate { x: z.clone(), z }.evaluated(value)
}

/// λ random solutions, some infeasible, already in rank order.
fn sorted_population(rng: &mut ChaCha8Rng, d: usize, lambda: usize) -> Vec<EvaluatedSolution> {
    let pop = (0..lambda)
        .map(|_| {
            let z = gaussian(rng, d);
            let v = if rng.gen_bool(0.3) {
                Fitness::Infeasible
            } else {
                Fitness::Feasible(rng.gen::<f64>())
            };
            solution(z, v)
        })
        .collect();
    rank(pop)
}

fn random_state(rng: &mut ChaCha8Rng, d: usize) -> SearchState {
    // B = exp(S) with traceless S, so det(B) = 1.
    let s = random_symmetric(rng, d, 0.3);
    let b = fmnes::linalg::sym_exp(&SymMatrix::new(s).unwrap().traceless()).into_inner();
    let mut st = SearchState::new(gaussian(rng, d), 0.7, b);
    st.p_sigma = gaussian(rng, d);
    st.p_c = gaussian(rng, d);
    st
}

fn run_generation(engine: &mut Engine, problem: &Problem, rng: &mut ChaCha8Rng) -> fmnes::StepReport {
    let mut counter = EvalCounter::default();
    let pop = engine
        .ask(rng)
        .into_iter()
        .map(|c| {
            let v = evaluate(problem, c.x.as_slice(), &mut counter).unwrap();
            c.evaluated(v)
        })
        .collect();
    engine.step(pop).unwrap()
}

fn engine_for(mode: StrategyMode, problem: &Problem, lambda: usize) -> Engine {
    let cfg = StrategyConfig::for_mode(mode, problem.dim, lambda).unwrap();
    Engine::new(cfg, problem.initial_mean(), problem.initial_sigma()).unwrap()
}

// ---- formula oracles -------------------------------------------------------

#[test]
fn p_sigma_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (d, lambda) = (6, 10);
    let params = DerivedParams::new(lambda, d).unwrap();
    for _ in 0..20 {
        let sorted = sorted_population(&mut rng, d, lambda);
        let mut st = random_state(&mut rng, d);
        let before = st.p_sigma.clone();
        let c = 0.3;
        update_p_sigma(&mut st, &sorted, &params.w_rank, params.mu_eff, c);
        for k in 0..d {
            let sum: f64 = (0..lambda).map(|i| params.w_rank[i] * sorted[i].z[k]).sum();
            let expect = (1.0 - c) * before[k] + (c * (2.0 - c) * params.mu_eff).sqrt() * sum;
            assert!((st.p_sigma[k] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn p_sigma_boundary_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = DerivedParams::new(8, 4).unwrap();
    // Mirrored pairs with tied values keep Σ w z at zero only when weights pair up;
    // use an explicitly zero population instead.
    let zeros: Vec<_> = (0..8)
        .map(|_| solution(DVector::zeros(4), Fitness::Feasible(1.0)))
        .collect();
    let mut st = SearchState::new(DVector::zeros(4), 1.0, DMatrix::identity(4, 4));
    update_p_sigma(&mut st, &zeros, &params.w_rank, params.mu_eff, 0.4);
    assert_eq!(st.p_sigma, DVector::zeros(4));

    let sorted = sorted_population(&mut rng, 4, 8);
    let mut st = random_state(&mut rng, 4);
    update_p_sigma(&mut st, &sorted, &params.w_rank, params.mu_eff, 1.0);
    let mut direct = DVector::zeros(4);
    for (s, w) in sorted.iter().zip(&params.w_rank) {
        direct += &s.z * (*w * params.mu_eff.sqrt());
    }
    assert!((st.p_sigma - direct).amax() < 1e-12);
}

#[test]
fn gradients_match_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (d, lambda) = (5, 12);
    for _ in 0..20 {
        let sorted = sorted_population(&mut rng, d, lambda);
        let w: Vec<f64> = (0..lambda).map(|_| rng.gen_range(-0.3..0.5)).collect();
        let g = estimate_gradients(&sorted, &w);
        let mut gm = vec![vec![0.0; d]; d];
        let mut gd = vec![0.0; d];
        for (s, wi) in sorted.iter().zip(&w) {
            for i in 0..d {
                gd[i] += wi * s.z[i];
                for j in 0..d {
                    gm[i][j] += wi * (s.z[i] * s.z[j] - if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        let gs: f64 = (0..d).map(|i| gm[i][i]).sum::<f64>() / d as f64;
        assert!((g.g_sigma - gs).abs() < 1e-12);
        assert!(max_abs_diff(&to_mat(g.g_m.as_matrix()), &gm) < 1e-12);
        for i in 0..d {
            assert!((g.g_delta[i] - gd[i]).abs() < 1e-12);
            for j in 0..d {
                let expect = gm[i][j] - if i == j { gs } else { 0.0 };
                assert!((g.g_b.as_matrix()[(i, j)] - expect).abs() < 1e-12);
            }
        }
        assert!(g.g_b.trace().abs() < 1e-10);
    }
}

#[test]
fn gradient_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sorted = sorted_population(&mut rng, 3, 6);
    let g = estimate_gradients(&sorted, &[0.0; 6]);
    assert_eq!(g.g_delta, DVector::zeros(3));
    assert_eq!(g.g_sigma, 0.0);
    assert_eq!(g.g_m.as_matrix(), &DMatrix::zeros(3, 3));

    let z = gaussian(&mut rng, 3);
    let pair = vec![
        solution(z.clone(), Fitness::Feasible(0.0)),
        solution(-&z, Fitness::Feasible(1.0)),
    ];
    let g = estimate_gradients(&pair, &[0.25, -0.25]);
    assert!((g.g_delta - &z * 0.5).amax() < 1e-15);
    assert!(g.g_m.as_matrix().amax() < 1e-15);
}

#[test]
fn updates_match_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 5;
    for _ in 0..20 {
        let mut st = random_state(&mut rng, d);
        let sorted = sorted_population(&mut rng, d, 10);
        let w: Vec<f64> = DerivedParams::new(10, d).unwrap().w_rank;
        let g = estimate_gradients(&sorted, &w);
        let rates = LearningRates { eta_m: 1.0, eta_sigma: 0.8, eta_b: 0.3 };
        let (m0, s0, b0) = (st.mean.clone(), st.sigma, st.transform.clone());
        apply_updates(&mut st, &g, rates).unwrap();

        let m_expect = &m0 + (&b0 * &g.g_delta) * s0;
        assert!((&st.mean - m_expect).amax() < 1e-12);
        assert!((st.sigma - s0 * (0.8 * g.g_sigma / 2.0).exp()).abs() < 1e-12 * s0);
        let step = series_exp(&to_mat(&(g.g_b.as_matrix() * 0.15)), 40);
        let b_expect = matmul(&to_mat(&b0), &step);
        assert!(max_abs_diff(&to_mat(&st.transform), &b_expect) < 1e-10);
        assert!((det(&st.transform).unwrap() - det(&b0).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn update_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut st = random_state(&mut rng, 4);
    let zero = estimate_gradients(&sorted_population(&mut rng, 4, 6), &[0.0; 6]);
    let before = st.clone();
    apply_updates(&mut st, &zero, LearningRates { eta_m: 1.0, eta_sigma: 1.0, eta_b: 1.0 }).unwrap();
    assert_eq!(st, before);

    let mut g = zero.clone();
    let eta_sigma = 0.4;
    g.g_sigma = 2.0 / eta_sigma;
    apply_updates(&mut st, &g, LearningRates { eta_m: 1.0, eta_sigma, eta_b: 1.0 }).unwrap();
    assert!((st.sigma - before.sigma * std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn p_c_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let mut st = random_state(&mut rng, 6);
        let b_old = st.transform.clone();
        let gd = gaussian(&mut rng, 6);
        let before = st.p_c.clone();
        let (cc, mu) = (0.2, 3.1);
        update_p_c(&mut st, &b_old, &gd, cc, mu);
        let bg = matmul(&to_mat(&b_old), &gd.iter().map(|v| vec![*v]).collect());
        for k in 0..6 {
            let expect = (1.0 - cc) * before[k] + (cc * (2.0 - cc) * mu).sqrt() * bg[k][0];
            assert!((st.p_c[k] - expect).abs() < 1e-12);
        }
    }
    let mut st = SearchState::new(DVector::zeros(3), 1.0, DMatrix::identity(3, 3));
    update_p_c(&mut st, &DMatrix::identity(3, 3), &DVector::zeros(3), 0.5, 2.0);
    assert_eq!(st.p_c, DVector::zeros(3));
}

#[test]
fn expansion_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = 5;
    for _ in 0..20 {
        let mut st = random_state(&mut rng, d);
        let b_old = st.transform.clone();
        let g = random_symmetric(&mut rng, d, 0.2);
        let shape = fmnes::linalg::sym_exp(&SymMatrix::new(g).unwrap().traceless());
        st.transform = &b_old * shape.as_matrix();
        st.gamma = 1.1;
        let (b_new, sigma0) = (st.transform.clone(), st.sigma);
        let (cg, dg) = (0.3, 2.0);
        emphasize_expansion(&mut st, &b_old, true, cg, dg).unwrap();

        let c_old = matmul(&to_mat(&b_old), &to_mat(&b_old.transpose()));
        let c_new = matmul(&to_mat(&b_new), &to_mat(&b_new.transpose()));
        let (_, e) = jacobi_eigen(&c_old);
        let quad = |c: &Mat, k: usize| -> f64 {
            (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| e[i][k] * c[i][j] * e[j][k])
                .sum()
        };
        let taus: Vec<f64> = (0..d).map(|k| quad(&c_new, k) / quad(&c_old, k) - 1.0).collect();
        let tau = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gamma = ((1.0 - cg) * 1.1 + cg * (1.0 + dg * tau).sqrt()).max(1.0);
        assert!((st.gamma - gamma).abs() < 1e-10);

        let mut q = identity(d);
        for k in (0..d).filter(|&k| taus[k] > 0.0) {
            for i in 0..d {
                for j in 0..d {
                    q[i][j] += (gamma - 1.0) * e[i][k] * e[j][k];
                }
            }
        }
        let root = gauss_inverse(&q).1.powf(1.0 / d as f64);
        let b_expect: Mat = matmul(&q, &to_mat(&b_new))
            .into_iter()
            .map(|r| r.into_iter().map(|v| v / root).collect())
            .collect();
        assert!(max_abs_diff(&to_mat(&st.transform), &b_expect) < 1e-9);
        assert!((st.sigma - sigma0 * root).abs() < 1e-10 * sigma0);
        assert!((det(&st.transform).unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn expansion_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // Unchanged shape: every τ is 0, so Q = I.
    let mut st = random_state(&mut rng, 4);
    let b = st.transform.clone();
    let before = st.clone();
    emphasize_expansion(&mut st, &b, true, 0.2, 1.0).unwrap();
    assert!((&st.transform - &before.transform).amax() < 1e-12);
    assert_eq!(st.sigma, before.sigma);
    assert_eq!(st.gamma, 1.0);

    // Shrinking every direction drives γ below 1; it is clamped.
    let mut st = random_state(&mut rng, 4);
    let b_old = st.transform.clone();
    st.transform = &b_old * 0.5;
    emphasize_expansion(&mut st, &b_old, true, 0.9, 1.0).unwrap();
    assert_eq!(st.gamma, 1.0);
    assert!((&st.transform - &b_old * 0.5).amax() < 1e-12);

    // Outside movement γ still moves but B and σ do not.
    let mut st = random_state(&mut rng, 4);
    let b_old = st.transform.clone();
    let stretch = DMatrix::from_diagonal(&DVector::from_vec(vec![1.2, 1.0 / 1.2, 1.0, 1.0]));
    st.transform = &b_old * stretch;
    let before = st.clone();
    emphasize_expansion(&mut st, &b_old, false, 0.5, 1.0).unwrap();
    assert!(st.gamma > 1.0);
    assert_eq!(st.transform, before.transform);
    assert_eq!(st.sigma, before.sigma);
}

#[test]
fn rank_one_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let d = 5;
    for _ in 0..20 {
        let mut st = random_state(&mut rng, d);
        let b_old = random_state(&mut rng, d).transform;
        let b_new = st.transform.clone();
        let c1 = 0.05;
        rank_one_update(&mut st, &b_old, c1).unwrap();

        let (inv, _) = gauss_inverse(&to_mat(&b_old));
        let y: Vec<f64> = (0..d).map(|i| (0..d).map(|j| inv[i][j] * st.p_c[j]).sum()).collect();
        let mut r: Mat = (0..d)
            .map(|i| (0..d).map(|j| y[i] * y[j] - if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let tr: f64 = (0..d).map(|i| r[i][i]).sum::<f64>() / d as f64;
        for (i, row) in r.iter_mut().enumerate() {
            row[i] -= tr;
            for v in row.iter_mut() {
                *v *= c1 / 2.0;
            }
        }
        // ‖c1·R_B/2‖ can be a few units here; 60 series terms are plenty.
        let expect = matmul(&to_mat(&b_new), &series_exp(&r, 60));
        let scale = expect.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&to_mat(&st.transform), &expect) < 1e-9 * scale);
        assert!((det(&st.transform).unwrap() - det(&b_new).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn rank_one_with_zero_path_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut st = random_state(&mut rng, 6);
    st.p_c.fill(0.0);
    let b_old = random_state(&mut rng, 6).transform;
    let before = st.transform.clone();
    rank_one_update(&mut st, &b_old, 0.3).unwrap();
    assert!((st.transform - before).amax() < 1e-10);
}

// ---- documented examples ---------------------------------------------------

#[test]
fn reset_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b0 = DMatrix::identity(4, 4);

    let mut st = random_state(&mut rng, 4);
    st.gamma = 1.4;
    assert!(maybe_reset(&mut st, 1, &b0, true));
    assert_eq!(st.transform, b0);
    assert_eq!(st.p_sigma, DVector::zeros(4));
    assert_eq!(st.p_c, DVector::zeros(4));
    assert_eq!(st.gamma, 1.0);
    assert!(!st.unconstrained);

    let before = st.clone();
    let mut after = {
        let mut s = random_state(&mut rng, 4);
        s.unconstrained = false;
        s
    };
    let snapshot = after.clone();
    assert!(!maybe_reset(&mut after, 3, &b0, true));
    assert_eq!(after, snapshot);
    assert_eq!(st, before);

    let mut st = random_state(&mut rng, 4);
    let snapshot = st.clone();
    assert!(!maybe_reset(&mut st, 0, &b0, true));
    assert_eq!(st, snapshot);

    // Disabled reset keeps the shape but still records the first infeasible sample.
    let mut st = random_state(&mut rng, 4);
    let shape = st.transform.clone();
    assert!(!maybe_reset(&mut st, 2, &b0, false));
    assert_eq!(st.transform, shape);
    assert!(!st.unconstrained);
}

#[test]
fn phase_examples() {
    let chi = chi_d(10);
    assert_eq!(detect_phase(1.2 * chi, chi), Phase::Movement);
    assert_eq!(detect_phase(chi, chi), Phase::Movement);
    assert_eq!(detect_phase(0.5 * chi, chi), Phase::Stagnation);
    assert_eq!(detect_phase(0.1 * chi, chi), Phase::Stagnation);
    assert_eq!(detect_phase(0.0, chi), Phase::Convergence);
}

#[test]
fn weight_and_rate_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = StrategyConfig::for_mode(StrategyMode::FmNes, 6, 10).unwrap();
    let params = DerivedParams::new(10, 6).unwrap();
    let sorted = sorted_population(&mut rng, 6, 10);
    let n_feasible = sorted.iter().filter(|s| s.feasible()).count();
    let norms: Vec<f64> = sorted.iter().map(|s| s.z_norm).collect();

    let (w, r) = select_weights_and_rates(Some(Phase::Movement), &sorted, &cfg, &params);
    assert_eq!(w, compute_distance_weights(&norms, feasible_alpha(cfg.alpha, n_feasible, 10)));
    assert_eq!((r.eta_sigma, r.eta_b), (cfg.eta_sigma_move, cfg.eta_b_move));
    let (w, r) = select_weights_and_rates(Some(Phase::Stagnation), &sorted, &cfg, &params);
    assert_eq!(w, params.w_rank);
    assert_eq!((r.eta_sigma, r.eta_b), (cfg.eta_sigma_stag, cfg.eta_b_stag));
    let (w, r) = select_weights_and_rates(Some(Phase::Convergence), &sorted, &cfg, &params);
    assert_eq!(w, params.w_rank);
    assert_eq!((r.eta_sigma, r.eta_b, r.eta_m), (cfg.eta_sigma_conv, cfg.eta_b_conv, 1.0));

    let xnes = StrategyConfig::for_mode(StrategyMode::Xnes, 6, 10).unwrap();
    let (w, r) = select_weights_and_rates(None, &sorted, &xnes, &params);
    assert_eq!(w, params.w_rank);
    assert_eq!(r.eta_sigma, xnes.eta_sigma_stag);
    assert_eq!(r.eta_b, xnes.eta_b_conv);
}

#[test]
fn first_generation_of_fm_nes_applies_rank_one() {
    let p = make_benchmark("sphere", 8).unwrap();
    let mut e = engine_for(StrategyMode::FmNes, &p, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    assert!(run_generation(&mut e, &p, &mut rng).rank_one_applied);
    assert_eq!(e.state().generation, 1);
}

#[test]
fn ridge_condition_gates_rank_one() {
    // Method B keeps a stretched B through the first infeasible generation.
    let d = 2;
    let cfg = StrategyConfig::for_mode(StrategyMode::MethodB, d, 4).unwrap();
    let pop = |engine: &Engine, rng: &mut ChaCha8Rng| -> Vec<EvaluatedSolution> {
        engine
            .ask(rng)
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let v = if i == 0 { Fitness::Infeasible } else { Fitness::Feasible(i as f64) };
                c.evaluated(v)
            })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let stretched = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 1.0 / 1.5]));
    let mut e = Engine::with_transform(cfg.clone(), DVector::zeros(d), 1.0, stretched).unwrap();
    let p = pop(&e, &mut rng);
    assert!(e.step(p).unwrap().rank_one_applied);

    // Freeze the shape so B stays near I through the update.
    let mut frozen = cfg;
    frozen.eta_b_move = 1e-9;
    frozen.eta_b_stag = 1e-9;
    frozen.eta_b_conv = 1e-9;
    let mut e = Engine::new(frozen, DVector::zeros(d), 1.0).unwrap();
    let p = pop(&e, &mut rng);
    let report = e.step(p).unwrap();
    assert!(fmnes::engine::ridge_ratio(&e.state().transform) < 1.2);
    assert!(!report.rank_one_applied);
}

#[test]
fn method_c_never_resets_and_always_stretches() {
    let p = make_benchmark("ic-sphere", 5).unwrap();
    let mut e = engine_for(StrategyMode::MethodC, &p, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut saw_infeasible = false;
    for _ in 0..300 {
        let r = run_generation(&mut e, &p, &mut rng);
        saw_infeasible |= r.n_infeasible > 0;
        assert!(!r.reset);
        assert!(r.rank_one_applied);
    }
    assert!(saw_infeasible);
}

#[test]
fn fm_nes_resets_once_on_first_infeasible_generation() {
    let p = make_benchmark("ic-sphere", 5).unwrap();
    let mut e = engine_for(StrategyMode::FmNes, &p, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut resets = Vec::new();
    let mut first_infeasible = None;
    for g in 0..300 {
        let r = run_generation(&mut e, &p, &mut rng);
        if r.n_infeasible > 0 && first_infeasible.is_none() {
            first_infeasible = Some(g);
        }
        if r.reset {
            resets.push(g);
        }
    }
    assert!(first_infeasible.is_some());
    assert_eq!(resets, vec![first_infeasible.unwrap()]);
}

// ---- mode equivalences -----------------------------------------------------

fn trajectories_match(
    a: StrategyConfig,
    b: StrategyConfig,
    problem: &Problem,
    generations: usize,
    compare_p_c: bool,
) {
    let mut ea = Engine::new(a, problem.initial_mean(), problem.initial_sigma()).unwrap();
    let mut eb = Engine::new(b, problem.initial_mean(), problem.initial_sigma()).unwrap();
    let mut ra = ChaCha8Rng::seed_from_u64(99);
    let mut rb = ChaCha8Rng::seed_from_u64(99);
    for g in 0..generations {
        let (x, y) = (run_generation(&mut ea, problem, &mut ra), run_generation(&mut eb, problem, &mut rb));
        assert_eq!(x.phase, y.phase, "generation {g}");
        let (sa, sb) = (ea.state(), eb.state());
        assert_eq!(sa.mean, sb.mean, "generation {g}");
        assert_eq!(sa.sigma.to_bits(), sb.sigma.to_bits(), "generation {g}");
        assert_eq!(sa.transform, sb.transform, "generation {g}");
        assert_eq!(sa.p_sigma, sb.p_sigma, "generation {g}");
        assert_eq!(sa.gamma.to_bits(), sb.gamma.to_bits(), "generation {g}");
        if compare_p_c {
            assert_eq!(sa.p_c, sb.p_c, "generation {g}");
        }
    }
}

#[test]
fn fm_nes_without_rank_one_and_reset_is_dx_nes_ic() {
    for name in ["rosenbrock", "ic-cigar"] {
        let p = make_benchmark(name, 8).unwrap();
        let mut fm = StrategyConfig::for_mode(StrategyMode::FmNes, 8, 10).unwrap();
        fm.enable_rank_one = false;
        fm.enable_reset = false;
        let dx = StrategyConfig::for_mode(StrategyMode::DxNesIc, 8, 10).unwrap();
        trajectories_match(fm, dx, &p, 150, true);
    }
}

#[test]
fn fm_nes_with_zero_c1_tracks_dx_nes_ic() {
    let p = make_benchmark("ic-rosenbrock", 8).unwrap();
    let mut fm = StrategyConfig::for_mode(StrategyMode::FmNes, 8, 10).unwrap();
    fm.c1 = 0.0;
    fm.enable_reset = false;
    let dx = StrategyConfig::for_mode(StrategyMode::DxNesIc, 8, 10).unwrap();
    // p_c is still accumulated by FM-NES but never read back.
    trajectories_match(fm, dx, &p, 150, false);
}

#[test]
fn ablation_modes_are_fm_nes_with_switches() {
    let base = StrategyConfig::for_mode(StrategyMode::FmNes, 12, 14).unwrap();
    let with = |ridge: bool, reset: bool| {
        let mut c = base.clone();
        c.apply(&StrategyOverrides {
            enable_ridge_condition: Some(ridge),
            enable_reset: Some(reset),
            ..Default::default()
        });
        c
    };
    let mode = |m| StrategyConfig::for_mode(m, 12, 14).unwrap();
    assert_eq!(mode(StrategyMode::MethodA), with(false, true));
    assert_eq!(mode(StrategyMode::MethodB), with(true, false));
    assert_eq!(mode(StrategyMode::MethodC), with(false, false));
}

// ---- gradient sanity -------------------------------------------------------

#[test]
fn monte_carlo_mean_gradient_points_downhill() {
    let d = 10;
    let lambda = 10_000;
    let p = make_benchmark("sphere", d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let st = SearchState::new(gaussian(&mut rng, d) * 3.0, 0.2, DMatrix::identity(d, d));
    let params = DerivedParams::new(lambda, d).unwrap();
    let pop = ask(&st, lambda, &mut rng)
        .into_iter()
        .map(|c| {
            let v = p.objective(c.x.as_slice());
            c.evaluated(Fitness::Feasible(v))
        })
        .collect();
    let g = estimate_gradients(&rank(pop), &params.w_rank);

    // Central finite differences of f at m, pulled back through σB (= σI here).
    let h = 1e-6;
    let fd = DVector::from_fn(d, |i, _| {
        let mut up = st.mean.clone();
        let mut dn = st.mean.clone();
        up[i] += h;
        dn[i] -= h;
        (p.objective(up.as_slice()) - p.objective(dn.as_slice())) / (2.0 * h)
    }) * st.sigma;
    let cos = -g.g_delta.dot(&fd) / (g.g_delta.norm() * fd.norm());
    assert!(cos > 30f64.to_radians().cos(), "cos = {cos}");
}

// ---- properties ------------------------------------------------------------

fn mixed_population() -> impl Strategy<Value = Vec<EvaluatedSolution>> {
    prop::collection::vec(
        (prop::collection::vec(-3.0f64..3.0, 3), prop::option::weighted(0.6, -5.0f64..5.0)),
        2..24,
    )
    .prop_map(|items| {
        items
            .into_iter()
            .map(|(z, v)| {
                let value = match v {
                    Some(v) => Fitness::Feasible((v * 4.0).round() / 4.0), // force ties
                    None => Fitness::Infeasible,
                };
                solution(DVector::from_vec(z), value)
            })
            .collect()
    })
}

/// Brute-force check of the preference order between two solutions.
fn prefers(a: &EvaluatedSolution, b: &EvaluatedSolution) -> bool {
    match (a.value, b.value) {
        (Fitness::Feasible(x), Fitness::Feasible(y)) => x <= y,
        (Fitness::Feasible(_), Fitness::Infeasible) => true,
        (Fitness::Infeasible, Fitness::Feasible(_)) => false,
        (Fitness::Infeasible, Fitness::Infeasible) => a.z_norm <= b.z_norm,
    }
}

fn key(s: &EvaluatedSolution) -> (bool, u64, u64) {
    // Tied feasible values may come out in either order; only the value counts.
    match s.value {
        Fitness::Feasible(v) => (true, v.to_bits(), 0),
        Fitness::Infeasible => (false, 0, s.z_norm.to_bits()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ranking_is_a_total_order_independent_of_input_order(
        pop in mixed_population(),
        seed in any::<u64>(),
    ) {
        let sorted = rank(pop.clone());
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                prop_assert!(prefers(&sorted[i], &sorted[j]));
            }
        }
        let mut shuffled = pop;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let again = rank(shuffled);
        let ka: Vec<_> = sorted.iter().map(key).collect();
        let kb: Vec<_> = again.iter().map(key).collect();
        prop_assert_eq!(ka, kb);
    }

    #[test]
    fn ask_is_closed_under_negation(seed in any::<u64>(), d in 1usize..12, half in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&mut rng, d);
        let cands = ask(&st, 2 * half, &mut rng);
        prop_assert_eq!(cands.len(), 2 * half);
        for pair in cands.chunks(2) {
            prop_assert_eq!(&pair[0].z, &-&pair[1].z);
        }
        for c in &cands {
            let x = &st.mean + (&st.transform * &c.z) * st.sigma;
            prop_assert!((&c.x - x).amax() <= 1e-10 * c.x.amax().max(1.0));
        }
    }

    #[test]
    fn every_mode_preserves_unit_determinant(
        seed in any::<u64>(),
        mode in prop::sample::select(StrategyMode::ALL.to_vec()),
        problem in prop::sample::select(vec!["sphere", "ellipsoid", "rosenbrock", "cigar", "ic-sphere", "ic-ellipsoid", "ic-rosenbrock", "ic-cigar"]),
        half in 2usize..8,
    ) {
        let p = make_benchmark(problem, 6).unwrap();
        let mut e = engine_for(mode, &p, 2 * half);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..40 {
            // The resampling wrapper is exercised in the harness; draw plainly here.
            run_generation(&mut e, &p, &mut rng);
            prop_assert!((det(&e.state().transform).unwrap() - 1.0).abs() <= 1e-6);
            prop_assert!(e.state().gamma >= 1.0);
            prop_assert!(e.state().sigma > 0.0);
        }
    }
}
