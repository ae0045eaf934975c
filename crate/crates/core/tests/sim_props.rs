mod common;

use proptest::prelude::*;
use rtclab::codec::{default_nvc_profile, default_traditional_profile, CodecSession};
use rtclab::controllers::{
    GccConfig, GccLike, Mode, SafeguardConfig, SafeguardState, RATE_MAX_KBPS, RATE_MIN_KBPS,
};
use rtclab::metrics::{p98, session_qoe};
use rtclab::simcore::{run_session, Micros, SessionConfig, SessionLog};
use rtclab::traces::{generate_trace, load_trace, TraceGenParams};

fn gcc_session(trace_seed: u64, traditional: bool, sim_seed: u64) -> SessionLog {
    let params = TraceGenParams {
        duration_s: 8.0,
        ..Default::default()
    };
    let trace = generate_trace(&params, trace_seed).unwrap();
    let profile = if traditional {
        default_traditional_profile()
    } else {
        default_nvc_profile()
    };
    let mut gcc = GccLike::new(GccConfig::default());
    run_session(
        &trace,
        &mut gcc,
        CodecSession::new(profile),
        &SessionConfig::with_duration(8.0),
        sim_seed,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // 64 cases of 16k arrivals each: well over a million link events.
    #[test]
    fn link_invariants_hold(seed in any::<u64>()) {
        let run = common::random_link_run(seed, 16_000).map_err(TestCaseError::fail)?;
        prop_assert!(run.events >= 16_000);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sessions_conserve_packets_and_respect_floor(trace_seed in any::<u64>(), traditional in any::<bool>()) {
        let log = gcc_session(trace_seed, traditional, 5);
        prop_assert!(log.conservation_holds());
        for p in &log.packets {
            if let Some(d) = p.deliver_us {
                prop_assert!(d - p.enqueue_us >= log.meta.owd_us);
            }
        }
        for d in &log.decisions {
            prop_assert!((RATE_MIN_KBPS..=RATE_MAX_KBPS).contains(&d.rate_kbps));
        }
    }

    #[test]
    fn sessions_are_deterministic(trace_seed in any::<u64>(), sim_seed in any::<u64>()) {
        prop_assert_eq!(gcc_session(trace_seed, false, sim_seed), gcc_session(trace_seed, false, sim_seed));
    }

    #[test]
    fn qoe_survives_log_round_trip(trace_seed in any::<u64>()) {
        let log = gcc_session(trace_seed, false, 3);
        let mut buf = Vec::new();
        log.write_ndjson(&mut buf).unwrap();
        let back = SessionLog::read_ndjson(buf.as_slice()).unwrap();
        prop_assert_eq!(session_qoe(&log).unwrap(), session_qoe(&back).unwrap());
    }

    #[test]
    fn generated_traces_round_trip(seed in any::<u64>()) {
        let t = generate_trace(&TraceGenParams::default(), seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        t.save(&path).unwrap();
        prop_assert_eq!(load_trace(&path).unwrap(), t);
    }
}

fn replay_switches(sensitivity: f64, jitter: &[f64]) -> usize {
    let mut s = SafeguardState::new(SafeguardConfig {
        sensitivity,
        ..Default::default()
    });
    jitter
        .iter()
        .enumerate()
        .filter(|&(i, &j)| s.step(i as Micros * 50_000, j).is_some())
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn higher_sensitivity_never_switches_less(
        jitter in prop::collection::vec(0.0f64..30.0, 1..400),
        lo in 0.2f64..5.0,
        factor in 1.0f64..4.0,
    ) {
        prop_assert!(replay_switches(lo * factor, &jitter) >= replay_switches(lo, &jitter));
    }

    #[test]
    fn transitions_alternate(jitter in prop::collection::vec(0.0f64..30.0, 1..400), sens in 0.2f64..5.0) {
        let mut s = SafeguardState::new(SafeguardConfig { sensitivity: sens, ..Default::default() });
        let mut mode = Mode::Rl;
        for (i, &j) in jitter.iter().enumerate() {
            if let Some(ev) = s.step(i as Micros * 50_000, j) {
                prop_assert_eq!(ev.from, mode);
                prop_assert_ne!(ev.to, mode);
                mode = ev.to;
            }
            prop_assert_eq!(s.mode(), mode);
        }
    }

    #[test]
    fn p98_matches_sort_oracle(values in prop::collection::vec(-1e6f64..1e6, 1..500)) {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = (98 * sorted.len() + 99) / 100;
        prop_assert_eq!(p98(&values).unwrap(), sorted[rank - 1]);
    }
}
