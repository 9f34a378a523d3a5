//! Random sessions and the property checks built on them.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twin_core::process::{parse_form, ProcessModel, SocketRef, StepStatus};
use twin_core::runtime::{records_of, replay, InteractionEvent, LogRecord, SessionState};
use twin_core::scenario::VarKind;
use twin_core::ScenarioDefinition;

/// For each ordered procedure, a later child is never Complete while an
/// earlier one is not.
pub fn ordered_gate_holds(
    model: &ProcessModel,
    status: impl Fn(&str) -> Option<StepStatus>,
) -> bool {
    model.steps().into_iter().all(|s| match s {
        twin_core::process::StepRef::Procedure(p) if p.ordered => p.steps.windows(2).all(|w| {
            status(w[1].id()) != Some(StepStatus::Complete)
                || status(w[0].id()) == Some(StepStatus::Complete)
        }),
        _ => true,
    })
}

pub fn complete_set(st: &SessionState) -> BTreeSet<String> {
    st.statuses()
        .values()
        .flat_map(|m| {
            m.complete_ids()
                .into_iter()
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Events aimed at the fixture, valid or not.
pub fn fixture_event(rng: &mut ChaCha8Rng) -> InteractionEvent {
    let sockets = [
        "psu1.out_pos",
        "psu1.out_neg",
        "motor1.term_a",
        "motor1.term_b",
        "ammeter1.term_in",
        "ammeter1.term_out",
    ];
    let sock = |rng: &mut ChaCha8Rng| {
        sockets[rng.random_range(0..sockets.len())]
            .parse::<SocketRef>()
            .unwrap()
    };
    match rng.random_range(0..6) {
        0 => InteractionEvent::PressButton {
            instance: "psu1".into(),
            interaction: "power_btn".into(),
        },
        1 => InteractionEvent::SetDial {
            instance: "psu1".into(),
            interaction: "volt_dial".into(),
            value: rng.random_range(0..26) as f64 * 0.5,
        },
        2 | 3 => InteractionEvent::ConnectCable {
            a: sock(rng),
            b: sock(rng),
        },
        4 => InteractionEvent::DisconnectCable {
            a: sock(rng),
            b: sock(rng),
        },
        _ => InteractionEvent::Place {
            instance: "speedo1".into(),
            position: [
                rng.random_range(-1.5..1.5),
                rng.random_range(0.5..1.5),
                rng.random_range(-1.0..1.0),
            ],
        },
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// The fixture with an unordered procedure of `n` steps, and one event
/// that satisfies each step.
pub fn unordered_scenario(n: usize) -> (ScenarioDefinition, Vec<InteractionEvent>) {
    let mut s = super::fixture();
    let steps = [
        (
            "connected(motor1.term_a, ammeter1.term_in)",
            "motor1 ammeter1",
            InteractionEvent::ConnectCable {
                a: "motor1.term_a".parse().unwrap(),
                b: "ammeter1.term_in".parse().unwrap(),
            },
        ),
        (
            "connected(psu1.out_neg, motor1.term_b)",
            "psu1 motor1",
            InteractionEvent::ConnectCable {
                a: "psu1.out_neg".parse().unwrap(),
                b: "motor1.term_b".parse().unwrap(),
            },
        ),
        (
            "state(psu1.power) == on",
            "psu1",
            InteractionEvent::PressButton {
                instance: "psu1".into(),
                interaction: "power_btn".into(),
            },
        ),
        (
            "state(psu1.voltage) == 12",
            "psu1",
            InteractionEvent::SetDial {
                instance: "psu1".into(),
                interaction: "volt_dial".into(),
                value: 12.0,
            },
        ),
        (
            "placed(speedo1, bench, 0.05)",
            "speedo1",
            InteractionEvent::Place {
                instance: "speedo1".into(),
                position: [0.3, 0.9, 0.2],
            },
        ),
    ];
    let mut form = String::from("PROCEDURE set \"Any order\" UNORDERED\n");
    for (i, (cond, eq, _)) in steps.iter().take(n).enumerate() {
        form.push_str(&format!(
            "  INSTRUCTION s{i} \"step {i}\"\n    EQUIPMENT {eq}\n    WHEN {cond}\n"
        ));
    }
    s.processes = vec![parse_form(&form).unwrap()];
    (s, steps.into_iter().take(n).map(|(_, _, e)| e).collect())
}

pub fn random_event(rng: &mut ChaCha8Rng, s: &ScenarioDefinition) -> InteractionEvent {
    let inst = &s.instances[rng.random_range(0..s.instances.len())];
    let class = s.class(&inst.class_id).unwrap();
    let any_socket = |rng: &mut ChaCha8Rng| {
        let i = &s.instances[rng.random_range(0..s.instances.len())];
        let c = s.class(&i.class_id).unwrap();
        let name = if c.interactions.is_empty() {
            "none".to_string()
        } else {
            c.interactions[rng.random_range(0..c.interactions.len())]
                .id
                .clone()
        };
        SocketRef::new(&i.id, name)
    };
    let point = if class.interactions.is_empty() {
        "none".to_string()
    } else {
        class.interactions[rng.random_range(0..class.interactions.len())]
            .id
            .clone()
    };
    match rng.random_range(0..5) {
        0 => InteractionEvent::PressButton {
            instance: inst.id.clone(),
            interaction: point,
        },
        1 => InteractionEvent::SetDial {
            instance: inst.id.clone(),
            interaction: point,
            value: rng.random_range(-20..40) as f64 * 0.5,
        },
        2 => InteractionEvent::ConnectCable {
            a: any_socket(rng),
            b: any_socket(rng),
        },
        3 => InteractionEvent::DisconnectCable {
            a: any_socket(rng),
            b: any_socket(rng),
        },
        _ => InteractionEvent::Place {
            instance: inst.id.clone(),
            position: [
                rng.random_range(-6.0..6.0),
                rng.random_range(-1.0..4.0),
                rng.random_range(-6.0..6.0),
            ],
        },
    }
}

/// Drives a random session; returns it with every scalar checked against
/// its range and the clock invariant checked after every step.
pub fn random_session(seed: u64, s: Arc<ScenarioDefinition>) -> SessionState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = SessionState::load(Arc::clone(&s)).unwrap();
    for _ in 0..rng.random_range(20..120) {
        if rng.random_range(0..2) == 0 {
            let _ = st.apply_event(random_event(&mut rng, &s));
        } else {
            for _ in 0..rng.random_range(1..10) {
                if st.tick().is_err() {
                    break;
                }
            }
        }
        assert_eq!(st.clock(), st.tick_index() as f64 * s.tick_seconds);
        for inst in &s.instances {
            let class = s.class(&inst.class_id).unwrap();
            for v in &class.state_vars {
                let value = st.value(&inst.id, &v.name).unwrap();
                assert!(v.kind.accepts(value), "{}.{} = {value:?}", inst.id, v.name);
                if let VarKind::Scalar { .. } = v.kind {
                    assert!(value.as_scalar().unwrap().is_finite());
                }
            }
        }
    }
    st
}

/// Drives the fixture through `runs` random interleavings of events and
/// ticks. Counts shrinking complete sets and ordered-gate breaks.
pub fn interleaving_violations(runs: u64) -> usize {
    let scenario = Arc::new(super::fixture());
    let model = scenario.processes[0].clone();
    let mut violations = 0;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = SessionState::load(Arc::clone(&scenario)).unwrap();
        let mut seen = complete_set(&st);
        for _ in 0..rng.random_range(10..60) {
            if rng.random_range(0..3) == 0 {
                let _ = st.apply_event(fixture_event(&mut rng));
            } else {
                for _ in 0..rng.random_range(1..20) {
                    st.tick().unwrap();
                }
            }
            let now = complete_set(&st);
            if !now.is_superset(&seen) {
                violations += 1;
            }
            if !ordered_gate_holds(&model, |id| st.step_status(id)) {
                violations += 1;
            }
            seen = now;
        }
    }
    violations
}

/// Applies every permutation of the satisfying events for unordered sets
/// of 1 to `max_n` steps. Counts runs that do not complete plus sizes
/// whose final statuses differ between permutations.
pub fn permutation_violations(max_n: usize) -> usize {
    let mut violations = 0;
    for n in 1..=max_n {
        let (s, events) = unordered_scenario(n);
        let s = Arc::new(s);
        let mut finals = HashSet::new();
        for perm in permutations(n) {
            let mut st = SessionState::load(Arc::clone(&s)).unwrap();
            st.tick().unwrap();
            for &i in &perm {
                st.apply_event(events[i].clone()).unwrap();
            }
            if !st.is_complete() {
                violations += 1;
            }
            finals.insert(serde_json::to_string(st.statuses()).unwrap());
        }
        if finals.len() != 1 {
            violations += 1;
        }
    }
    violations
}

/// Seeds whose session, replayed from its log text, ends with a
/// different hash or snapshot.
pub fn replay_mismatches(sessions: u64) -> Vec<u64> {
    let mut scenarios: Vec<Arc<ScenarioDefinition>> = vec![Arc::new(super::fixture())];
    scenarios.extend((0..9).map(|k| Arc::new(super::scenarios::random_scenario(1000 + k))));
    let mut bad = Vec::new();
    for seed in 0..sessions {
        let s = Arc::clone(&scenarios[seed as usize % scenarios.len()]);
        let live = random_session(seed, Arc::clone(&s));
        // through the on-disk text form
        let text: Vec<String> = records_of(&live)
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        let parsed: Vec<LogRecord> = text
            .iter()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let replayed = replay(SessionState::load(Arc::clone(&s)).unwrap(), &parsed).unwrap();
        if replayed.snapshot_hash() != live.snapshot_hash()
            || replayed.snapshot() != live.snapshot()
        {
            bad.push(seed);
        }
    }
    bad
}
