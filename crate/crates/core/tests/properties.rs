use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use uasn_core::acoustics::{self, ChannelParams};
use uasn_core::agent::{argmax, td_loss, td_loss_and_grad, vdn_mix, NetShape, Transition};
use uasn_core::curricula::{rls_update, sls_schedule, CurriculumConfig, CurriculumKind};
use uasn_core::env::{Env, EnvConfig, RewardKind, TERMINATION_PENALTY};
use uasn_core::metrics::{self, Horizon, RunLedger, SlotLedger};
use uasn_core::seeding::rng_from_seed;

fn slot_strategy(n: usize) -> impl Strategy<Value = SlotLedger> {
    prop::collection::vec((any::<bool>(), any::<bool>(), 1.0f64..5e4), n).prop_map(|v| {
        let sent: Vec<bool> = v.iter().map(|x| x.0).collect();
        let delivered: Vec<bool> = v.iter().map(|x| x.0 && x.1).collect();
        let rates = v.iter().map(|x| if x.0 && x.1 { x.2 } else { 0.0 }).collect();
        SlotLedger::new(sent, delivered, rates).unwrap()
    })
}

fn ledger_strategy() -> impl Strategy<Value = RunLedger> {
    (1usize..6, 1usize..8).prop_flat_map(|(n, alpha)| {
        prop::collection::vec(slot_strategy(n), 1..40).prop_map(move |slots| {
            let mut l = RunLedger::new(n, 0.5, alpha);
            for s in slots {
                l.push(s).unwrap();
            }
            l
        })
    })
}

proptest! {
    #[test]
    fn sinr_is_scale_invariant(
        powers in prop::collection::vec(0.0f64..64.0, 1..6),
        gains in prop::collection::vec(1e-12f64..1e-6, 6),
        ext in 0.0f64..1e-6,
        noise in 1e-12f64..1e-6,
        scale in 1e-3f64..1e3,
        pick in any::<prop::sample::Index>(),
    ) {
        let n = powers.len();
        let i = pick.index(n);
        let g = &gains[..n];
        let base = acoustics::sinr(&powers, g, i, ext, noise, 0.9).unwrap();
        let scaled: Vec<f64> = powers.iter().map(|p| p * scale).collect();
        let s = acoustics::sinr(&scaled, g, i, ext * scale, noise * scale, 0.9).unwrap();
        prop_assert!((base - s).abs() <= 1e-9 * base.max(1e-300));
    }

    #[test]
    fn sinr_rises_with_own_power_and_falls_with_interference(
        powers in prop::collection::vec(0.5f64..64.0, 2..6),
        gains in prop::collection::vec(1e-12f64..1e-6, 6),
        noise in 1e-12f64..1e-6,
        bump in 0.1f64..10.0,
    ) {
        let n = powers.len();
        let g = &gains[..n];
        let base = acoustics::sinr(&powers, g, 0, 0.0, noise, 0.9).unwrap();
        let mut louder = powers.clone();
        louder[0] += bump;
        prop_assert!(acoustics::sinr(&louder, g, 0, 0.0, noise, 0.9).unwrap() > base);
        let mut noisy = powers.clone();
        noisy[1] += bump;
        prop_assert!(acoustics::sinr(&noisy, g, 0, 0.0, noise, 0.9).unwrap() < base);
        prop_assert!(acoustics::sinr(&powers, g, 0, 1e-6, noise, 0.9).unwrap() < base);
    }

    #[test]
    fn transmission_loss_decreases_with_distance(d in 0.01f64..5.0, step in 0.001f64..1.0) {
        let c = ChannelParams::default();
        let near = acoustics::transmission_loss(d, &c).unwrap();
        let far = acoustics::transmission_loss(d + step, &c).unwrap();
        prop_assert!(far < near && far > 0.0);
    }

    #[test]
    fn fading_inverse_cdf_round_trips(u in 0.0f64..0.999_999) {
        let x = acoustics::fading_from_uniform(u);
        prop_assert!(x >= 0.0);
        prop_assert!((acoustics::fading_cdf(x) - u).abs() < 1e-12);
    }

    #[test]
    fn data_rate_is_gated_and_monotone(g1 in 0.0f64..1e4, g2 in 0.0f64..1e4) {
        let c = ChannelParams::default();
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        prop_assert!(acoustics::data_rate(lo, &c) <= acoustics::data_rate(hi, &c));
        if lo < c.sinr_threshold_linear() {
            prop_assert_eq!(acoustics::data_rate(lo, &c), 0.0);
        }
    }

    #[test]
    fn jain_index_properties(
        xs in prop::collection::vec(0.0f64..100.0, 1..12),
        scale in 1e-3f64..1e3,
        rot in any::<prop::sample::Index>(),
    ) {
        let j = metrics::jain_index(&xs);
        let m = xs.len() as f64;
        if xs.iter().all(|&x| x == 0.0) {
            prop_assert_eq!(j, 0.0);
        } else {
            prop_assert!(j >= 1.0 / m - 1e-12 && j <= 1.0 + 1e-12);
        }
        let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
        prop_assert!((metrics::jain_index(&scaled) - j).abs() < 1e-9);
        let mut rotated = xs.clone();
        rotated.rotate_left(rot.index(xs.len()));
        prop_assert!((metrics::jain_index(&rotated) - j).abs() < 1e-12);
        let flat = vec![xs[0] + 1.0; xs.len()];
        prop_assert!((metrics::jain_index(&flat) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ledger_metrics_are_consistent(ledger in ledger_strategy()) {
        let t = ledger.len();
        let n = ledger.n;
        let reuse = metrics::avg_reuse(&ledger).unwrap();
        let waste = metrics::waste(&ledger).unwrap();
        let sends: usize = ledger.slots.iter().map(SlotLedger::sends).sum();
        prop_assert!((0.0..=1.0).contains(&reuse));
        prop_assert!((reuse + waste - sends as f64 / (t * n) as f64).abs() < 1e-12);
        let dr = metrics::delivery_ratio(&ledger);
        prop_assert!((0.0..=1.0).contains(&dr));
        for at in 1..=t {
            let u = metrics::network_utility(&ledger, at).unwrap();
            prop_assert!((0.0..=2.0 + 1e-12).contains(&u));
            let a = metrics::jain_fairness(&ledger, Horizon::Adaptive(ledger.horizon_alpha), at).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        }
        let full = metrics::jain_fairness(&ledger, Horizon::Adaptive(t), t).unwrap();
        prop_assert_eq!(full, metrics::jain_fairness(&ledger, Horizon::Lifetime, t).unwrap());
        match metrics::delivery_delay(reuse) {
            Some(d) => prop_assert!((d - (1.0 - reuse) / reuse).abs() < 1e-12),
            None => prop_assert_eq!(reuse, 0.0),
        }
    }

    #[test]
    fn additive_mixing_greedy_joint_action_is_per_agent_greedy(
        tables in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 7), 1..4),
    ) {
        let greedy: Vec<usize> = tables.iter().map(|q| argmax(q)).collect();
        let best_by_agents = vdn_mix(&tables.iter().zip(&greedy).map(|(q, &a)| q[a]).collect::<Vec<_>>());
        let n = tables.len();
        let mut best_joint = f64::NEG_INFINITY;
        for code in 0..7usize.pow(n as u32) {
            let mut c = code;
            let chosen: Vec<f64> = tables.iter().map(|q| { let a = c % 7; c /= 7; q[a] }).collect();
            best_joint = best_joint.max(vdn_mix(&chosen));
        }
        prop_assert_eq!(best_joint, best_by_agents);
    }

    #[test]
    fn rls_stays_within_bounds(
        utilities in prop::collection::vec(0.0f64..2.0, 1..200),
        upper in 0.01f64..1.0,
        gamma in 0.001f64..1.0,
    ) {
        let cfg = CurriculumConfig { kind: CurriculumKind::Rls, eps_upper: upper, learning_factor: gamma, ..Default::default() };
        let mut eps = 0.0;
        for u in utilities {
            let next = rls_update(eps, u, &cfg);
            prop_assert!((0.0..=upper).contains(&next));
            if u >= cfg.utility_threshold {
                prop_assert!(next >= eps);
            } else {
                prop_assert!(next <= eps);
            }
            eps = next;
        }
    }

    #[test]
    fn sls_is_monotone_and_capped(
        upper in 0.01f64..1.0,
        cycle in 1u64..500,
        total in 1u64..100_000,
        e in 0u64..200_000,
    ) {
        let cfg = CurriculumConfig { kind: CurriculumKind::Sls, eps_upper: upper, update_cycle: cycle, total_episodes: total, ..Default::default() };
        let a = sls_schedule(e, &cfg);
        let b = sls_schedule(e + 1, &cfg);
        prop_assert!(a <= b && b <= upper && a >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn env_invariants_under_random_play(seed in any::<u64>(), n in 1usize..5, reward in 0usize..3) {
        let mut cfg = EnvConfig::default();
        cfg.world.n_pairs = n;
        cfg.world.malfunction_rate = 0.3;
        cfg.world.entity.activation_prob = 0.5;
        cfg.reward = [RewardKind::FrLh, RewardKind::EFrLh, RewardKind::EFrAh][reward];
        let mut env = Env::new(cfg.clone()).unwrap();
        let obs = env.reset(seed).unwrap();
        prop_assert!(obs.iter().all(|o| o.0.len() == cfg.observation_dim()));
        let floor = cfg.world.energy_floor_j();
        let mut energy: Vec<f64> = env.world().transmitters.iter().map(|t| t.energy_j).collect();
        let mut rng = rng_from_seed(seed, 77);
        while !env.is_done() {
            let acts: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.n_actions())).collect();
            let out = env.step(&acts).unwrap();
            prop_assert!(out.next_observations.iter().all(|o| o.0.len() == cfg.observation_dim() && o.0.iter().all(|x| x.is_finite())));
            prop_assert!(out.reward == TERMINATION_PENALTY || (out.reward >= -1.0 && out.reward <= n as f64));
            for (t, e) in env.world().transmitters.iter().zip(energy.iter_mut()) {
                prop_assert!(t.energy_j <= *e && t.energy_j >= floor);
                *e = t.energy_j;
            }
            for r in 0..n {
                prop_assert!(!out.info.record.delivered[r] || out.info.record.sent[r]);
            }
        }
        prop_assert!(env.slot() <= cfg.episode_len());
    }
}

#[test]
fn td_gradient_matches_central_differences() {
    let shape = NetShape::new(5, 4, 3);
    let mut rng = rng_from_seed(11, 0);
    let params = shape.init_params(&mut rng);
    let target = shape.init_params(&mut rng);
    let obs: Vec<Vec<Vec<f64>>> =
        (0..3).map(|_| (0..2).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()).collect();
    let episode = Arc::new(obs);
    let hidden = |rng: &mut uasn_core::seeding::SimRng| (0..2).map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
    let batch: Vec<Transition> = (0..2)
        .map(|t| Transition {
            episode: Arc::clone(&episode),
            t,
            hidden: hidden(&mut rng),
            next_hidden: hidden(&mut rng),
            actions: vec![t % 3, 2],
            active: vec![true, t == 0],
            reward: 0.7,
            done: t == 1,
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let mut grad = vec![0.0; shape.n_params()];
    td_loss_and_grad(&shape, &params, &target, &refs, 0.9, &mut grad).unwrap();
    let h = 1e-5;
    for k in 0..shape.n_params() {
        let mut p = params.clone();
        p[k] += h;
        let up = td_loss(&shape, &p, &target, &refs, 0.9);
        p[k] -= 2.0 * h;
        let down = td_loss(&shape, &p, &target, &refs, 0.9);
        let fd = (up - down) / (2.0 * h);
        let err = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-4);
        assert!(err < 1e-5, "param {k}: analytic {} numeric {fd}", grad[k]);
    }
}
