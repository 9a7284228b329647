use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teamfp_core::beliefs::BeliefProfile;
use teamfp_core::dynamics::{team_fp_step, DynamicsConfig, DynamicsState, OpponentMode};
use teamfp_core::game::{
    coarsen_game, validate_zero_sum, zero_sum_pointwise, Matrix, MultiTeamGame, PayoffSource, TeamStructure,
};
use teamfp_core::gamegen::{random_mg, random_zsptg, DEFAULT_RANGE};
use teamfp_core::markov::{
    best_response_dp, mg_tng, policy_values, run_episode, MarkovTeamGame, MgConfig, MgLearnerState,
    ModelKnowledge, QInit,
};
use teamfp_core::metrics::{lyapunov, tng};

fn structure() -> impl Strategy<Value = TeamStructure> {
    prop::collection::vec(prop::collection::vec(1usize..=3, 1..=3), 2..=3)
        .prop_map(|counts| TeamStructure::new(counts).unwrap())
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn random_profile(s: &TeamStructure, rng: &mut ChaCha8Rng) -> BeliefProfile {
    let teams = (0..s.num_teams()).map(|m| simplex(rng, s.joint_count(m))).collect();
    BeliefProfile::from_vectors(s, teams).unwrap()
}

fn random_joint(s: &TeamStructure, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..s.num_teams()).map(|m| rng.gen_range(0..s.joint_count(m))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unilateral_deviation_changes_utility_and_potential_equally(s in structure(), seed in any::<u64>()) {
        let game = random_zsptg(&s, DEFAULT_RANGE, true, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let joint = random_joint(&s, &mut rng);
            let m = rng.gen_range(0..s.num_teams());
            let j = rng.gen_range(0..s.team_size(m));
            let x = rng.gen_range(0..s.action_count(m, j));
            let mut moved = joint.clone();
            moved[m] = s.with_agent_action(m, joint[m], j, x);
            let du = game.utility(m, j, &moved).unwrap() - game.utility(m, j, &joint).unwrap();
            let dphi = game.phi(m, &moved).unwrap() - game.phi(m, &joint).unwrap();
            prop_assert!((du - dphi).abs() <= 1e-9);
        }
    }

    #[test]
    fn coarsening_preserves_team_potentials(seed in any::<u64>()) {
        let s = TeamStructure::new(vec![vec![2, 3, 2], vec![2, 2]]).unwrap();
        let game = random_zsptg(&s, DEFAULT_RANGE, false, seed).unwrap();
        let coarse = coarsen_game(&game, &[vec![vec![2, 0], vec![1]], vec![vec![0, 1]]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let joint = random_joint(coarse.game.structure(), &mut rng);
            let original: Vec<usize> = joint.iter().enumerate().map(|(m, &x)| coarse.to_original[m][x]).collect();
            for m in 0..2 {
                let a = coarse.game.phi(m, &joint).unwrap();
                let b = game.phi(m, &original).unwrap();
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn pairwise_and_pointwise_zero_sum_checks_agree(s in structure(), seed in any::<u64>(), break_it in any::<bool>()) {
        let game = random_zsptg(&s, DEFAULT_RANGE, false, seed).unwrap();
        let game = if break_it {
            let mut p = game.potential(1, 0).unwrap().clone();
            p.add_to(0, 0, 0.5);
            let mut tables = vec![(1, 0, p)];
            for m in 0..s.num_teams() {
                for l in (0..s.num_teams()).filter(|&l| l != m && (m, l) != (1, 0)) {
                    tables.push((m, l, game.potential(m, l).unwrap().clone()));
                }
            }
            MultiTeamGame::new(s.clone(), tables).unwrap()
        } else {
            game
        };
        let pairwise = validate_zero_sum(&game).unwrap().is_ok();
        let pointwise = zero_sum_pointwise(&game, u128::MAX).unwrap().is_ok();
        prop_assert_eq!(pairwise, pointwise);
        prop_assert_eq!(pairwise, !break_it);
    }

    #[test]
    fn lyapunov_brackets_the_gap_in_zero_sum_games(s in structure(), seed in any::<u64>(), tau in 0.01f64..1.0) {
        let game = random_zsptg(&s, DEFAULT_RANGE, false, seed).unwrap();
        let profile = random_profile(&s, &mut ChaCha8Rng::seed_from_u64(seed));
        let gap = tng(&game, &profile).unwrap().total;
        let l = lyapunov(&game, &profile, tau).unwrap();
        let slack: f64 = s.joint_counts().iter().map(|&n| tau * (n as f64).ln()).sum();
        prop_assert!(gap >= -1e-12);
        prop_assert!(l >= gap - 1e-9);
        prop_assert!(l <= gap + slack + 1e-9);
    }

    #[test]
    fn markov_gap_is_nonnegative_and_dominates_random_strategies(seed in any::<u64>()) {
        let s = TeamStructure::uniform(2, 2, 2).unwrap();
        let mg = random_mg(&s, 3, 3, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strategies: Vec<BeliefProfile> = (0..mg.num_stage_pairs()).map(|_| random_profile(&s, &mut rng)).collect();
        let gap = mg_tng(&mg, &strategies).unwrap();
        prop_assert!(gap.per_team.iter().all(|&g| g >= -1e-9));
        for m in 0..2 {
            let best = best_response_dp(&mg, &strategies, m).unwrap().value;
            for _ in 0..10 {
                let mut other = strategies.clone();
                for p in other.iter_mut() {
                    p.set_team(m, simplex(&mut rng, s.joint_count(m)));
                }
                prop_assert!(policy_values(&mg, &other).unwrap()[m] <= best + 1e-9);
            }
        }
    }
}

#[test]
fn visit_counters_sum_to_episode_count() {
    let mg = random_mg(&TeamStructure::uniform(2, 1, 2).unwrap(), 3, 4, 1).unwrap();
    for knowledge in [ModelKnowledge::ModelBased, ModelKnowledge::ModelFree] {
        let config = MgConfig { knowledge, seed: 3, ..Default::default() };
        let mut st = MgLearnerState::new(&mg, &config).unwrap();
        for _ in 0..200 {
            run_episode(&mg, &mut st, &config);
        }
        for h in 0..mg.horizon() {
            let total: u64 = (0..mg.num_states()).map(|s| st.visits()[mg.stage_index(s, h)]).sum();
            assert_eq!(total, 200);
        }
        if knowledge == ModelKnowledge::ModelFree {
            let n = mg.joint_total();
            for idx in 0..mg.num_stage_pairs() {
                let per_action: u64 = st.action_visits()[idx * n..(idx + 1) * n].iter().sum();
                assert_eq!(per_action, st.visits()[idx]);
            }
        }
    }
}

#[test]
fn unvisited_pairs_keep_their_beliefs() {
    // State 1 is never entered: the initial distribution and every row point to state 0.
    let s = TeamStructure::uniform(2, 1, 2).unwrap();
    let stage = random_zsptg(&s, DEFAULT_RANGE, false, 4).unwrap();
    let kernel = vec![vec![vec![1.0, 0.0]; 4]; 2];
    let mg = MarkovTeamGame::new(2, vec![1.0, 0.0], kernel, vec![stage.clone(), stage]).unwrap();
    let config = MgConfig::default();
    let mut st = MgLearnerState::new(&mg, &config).unwrap();
    for _ in 0..50 {
        run_episode(&mg, &mut st, &config);
    }
    for h in 0..2 {
        let idx = mg.stage_index(1, h);
        assert_eq!(st.visits()[idx], 0);
        assert_eq!(st.beliefs()[idx], BeliefProfile::uniform(&s));
    }
}

#[test]
fn model_free_matches_model_based_on_the_played_entry_of_a_deterministic_kernel() {
    let s = TeamStructure::uniform(2, 1, 2).unwrap();
    let stage = random_zsptg(&s, DEFAULT_RANGE, false, 8).unwrap();
    // Every action moves state 0 to state 1 and state 1 to state 0.
    let kernel = vec![vec![vec![0.0, 1.0]; 4], vec![vec![1.0, 0.0]; 4]];
    let mg = MarkovTeamGame::new(3, vec![0.5, 0.5], kernel, vec![stage.clone(), stage]).unwrap();
    // Reward-initialized Q makes the continuation values nonzero from the first episode.
    let mb = MgConfig { knowledge: ModelKnowledge::ModelBased, q_init: QInit::Reward, seed: 11, ..Default::default() };
    let mf = MgConfig { knowledge: ModelKnowledge::ModelFree, ..mb.clone() };
    let mut a = MgLearnerState::new(&mg, &mb).unwrap();
    let mut b = MgLearnerState::new(&mg, &mf).unwrap();
    let ta = run_episode(&mg, &mut a, &mb);
    let tb = run_episode(&mg, &mut b, &mf);
    assert_eq!(ta, tb);
    let n = mg.joint_total();
    for (h, step) in ta.iter().enumerate() {
        let slot = mg.stage_index(step.state, h) * n + step.action;
        for i in 0..s.num_agents() {
            assert!((a.q(i)[slot] - b.q(i)[slot]).abs() <= 1e-12);
        }
    }
}

#[test]
fn dummy_payoffs_and_team_potential_drive_the_same_trajectory() {
    // Dummy terms do not depend on the agent's own action, so smoothed responses agree.
    let s = TeamStructure::uniform(3, 2, 2).unwrap();
    let game = random_zsptg(&s, DEFAULT_RANGE, true, 21).unwrap();
    let agent = DynamicsConfig { seed: 5, iterations: 2_000, ..Default::default() };
    let potential = DynamicsConfig { payoff_source: PayoffSource::Potential, ..agent.clone() };
    let mut a = DynamicsState::new(&game, &agent, &OpponentMode::SelfPlay).unwrap();
    let mut b = DynamicsState::new(&game, &potential, &OpponentMode::SelfPlay).unwrap();
    for _ in 0..2_000 {
        team_fp_step(&game, &mut a, &agent);
        team_fp_step(&game, &mut b, &potential);
        assert_eq!(a.last_actions(), b.last_actions());
    }
}

fn one_hot_profiles(s: &TeamStructure, choices: &[Vec<usize>]) -> Vec<BeliefProfile> {
    (0..choices[0].len())
        .map(|idx| {
            let teams = (0..s.num_teams())
                .map(|m| {
                    let mut e = vec![0.0; s.joint_count(m)];
                    e[choices[m][idx]] = 1.0;
                    e
                })
                .collect();
            BeliefProfile::from_vectors(s, teams).unwrap()
        })
        .collect()
}

#[test]
fn alternating_best_responses_reach_a_zero_gap_fixed_point() {
    // Separable stage potentials with action-independent transitions.
    let s = TeamStructure::uniform(2, 1, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let stages: Vec<MultiTeamGame> = (0..2)
        .map(|_| {
            let f: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let data = (0..9).map(|i| f[i / 3] - g[i % 3]).collect();
            let p = Matrix::new(3, 3, data).unwrap();
            MultiTeamGame::new(s.clone(), vec![(0, 1, p.clone()), (1, 0, p.transpose().neg())]).unwrap()
        })
        .collect();
    let kernel = vec![vec![vec![0.3, 0.7]; 9], vec![vec![0.6, 0.4]; 9]];
    let mg = MarkovTeamGame::new(3, vec![0.5, 0.5], kernel, stages).unwrap();
    let pairs = mg.num_stage_pairs();
    let mut choices = vec![vec![0; pairs]; 2];
    for _ in 0..20 {
        let mut changed = false;
        for m in 0..2 {
            let br = best_response_dp(&mg, &one_hot_profiles(&s, &choices), m).unwrap();
            changed |= br.strategy != choices[m];
            choices[m] = br.strategy;
        }
        if !changed {
            break;
        }
    }
    let gap = mg_tng(&mg, &one_hot_profiles(&s, &choices)).unwrap();
    assert!(gap.per_team.iter().all(|&g| g.abs() <= 1e-9), "{gap:?}");
}
