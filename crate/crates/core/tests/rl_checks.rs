mod common;

use common::{random_buffer, random_net};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtclab::codec::default_nvc_profile;
use rtclab::experiment::{run_training, ProfileSpec, TraceSpec, TrainSpec};
use rtclab::rl::{
    gradient_check, ppo_loss_and_grad, PpoHyper, TrainConfig, TrainState, STATE_LEN,
};
use rtclab::traces::TraceGenParams;

#[test]
fn gradient_check_on_random_buffers() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hp = PpoHyper::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let net = random_net(&mut rng);
        let buf = random_buffer(&net, &mut rng, 5);
        worst = worst.max(gradient_check(&net, &buf, &hp, 1e-5, 1e-6));
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn gradient_check_per_loss_term() {
    let base = PpoHyper::default();
    let terms = [
        ("policy", PpoHyper { value_coef: 0.0, entropy_coef: 0.0, ..base }),
        ("value", PpoHyper { value_coef: 1.0, entropy_coef: 0.0, ..base }),
        ("entropy", PpoHyper { value_coef: 0.0, entropy_coef: 1.0, ..base }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (name, hp) in terms {
        let net = random_net(&mut rng);
        let mut buf = random_buffer(&net, &mut rng, 5);
        if name != "policy" {
            buf.iter_mut().for_each(|s| s.advantage = 0.0);
        }
        let err = gradient_check(&net, &buf, &hp, 1e-5, 1e-6);
        assert!(err < 1e-4, "{name}: {err:e}");
    }
}

#[test]
fn zero_advantage_leaves_policy_loss_gradient_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_net(&mut rng);
    let mut buf = random_buffer(&net, &mut rng, 8);
    buf.iter_mut().for_each(|s| s.advantage = 0.0);
    let hp = PpoHyper {
        value_coef: 0.0,
        entropy_coef: 0.0,
        ..Default::default()
    };
    let idx: Vec<usize> = (0..buf.len()).collect();
    let (_, grad) = ppo_loss_and_grad(&net, &buf, &idx, &hp);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn checkpoint_reload_reproduces_forward_pass() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let st = TrainState::new(TrainConfig {
        seed: 41,
        ..Default::default()
    });
    st.save(&path).unwrap();
    let back = TrainState::load(&path).unwrap();
    assert_eq!(back, st);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mut obs = [0.0; STATE_LEN];
        obs.iter_mut().for_each(|x| *x = rng.gen_range(-3.0..3.0));
        let a = st.policy.forward(&obs).unwrap();
        let b = back.policy.forward(&obs).unwrap();
        assert_eq!((a.mean, a.value), (b.mean, b.value));
    }
}

#[test]
fn checkpoint_rejects_mismatched_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let mut st = TrainState::new(TrainConfig::default());
    st.architecture = "something-else".into();
    st.save(&path).unwrap();
    assert!(TrainState::load(&path).is_err());
}

fn spec(steps: u64) -> TrainSpec {
    let params = TraceGenParams {
        duration_s: 5.0,
        ..Default::default()
    };
    TrainSpec {
        traces: TraceSpec::PerEpisode { params: params.clone() },
        validation: TraceSpec::Generated {
            count: 1,
            seed: 3,
            params,
        },
        profiles: ProfileSpec::default(),
        validation_profiles: None,
        config: TrainConfig {
            total_steps: steps,
            session: rtclab::simcore::SessionConfig::with_duration(5.0),
            hyper: PpoHyper {
                rollout_steps: 400,
                ..Default::default()
            },
            ..Default::default()
        },
    }
}

#[test]
fn zero_step_training_writes_valid_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let st = run_training(&spec(0), dir.path(), false, false).unwrap();
    assert_eq!(st.steps, 0);
    assert!(st.curve.is_empty());
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.trim(), "steps,wall_seconds,validation_reward,mode_switches");
    assert_eq!(TrainState::load(&dir.path().join("checkpoint.json")).unwrap(), st);
    assert!(run_training(&spec(0), dir.path(), false, false).is_err(), "overwrite needs force");
}

#[test]
fn resumed_training_continues_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_training(&spec(800), dir.path(), false, false).unwrap();
    let second = run_training(&spec(2000), dir.path(), true, false).unwrap();
    assert!(second.steps >= 2000);
    assert_eq!(&second.curve[..first.curve.len()], &first.curve[..]);
    assert!(second.curve.windows(2).all(|w| w[0].steps < w[1].steps));
    assert!(second.curve.windows(2).all(|w| w[0].wall_seconds <= w[1].wall_seconds));
    assert_eq!(default_nvc_profile().label, second.episode_log[0].profile);
}

#[test]
fn smoke_run_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let t0 = std::time::Instant::now();
    let mut s = spec(1000);
    s.config.session = Default::default();
    s.config.hyper.rollout_steps = 2048;
    run_training(&s, dir.path(), false, false).unwrap();
    assert!(t0.elapsed().as_secs_f64() < 60.0);
}
