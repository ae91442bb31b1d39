use dora_explorer::rng;
use dora_explorer::stigmergy::{BroadcastBus, Message, StigmergyReplica};
use dora_explorer::world::CellCoord;
use proptest::prelude::*;
use rand::Rng;

fn replicas(n: usize) -> Vec<StigmergyReplica> {
    (0..n as u32).map(StigmergyReplica::new).collect()
}

fn always(_: usize, _: usize) -> bool {
    true
}

#[derive(Debug, Clone)]
struct Write {
    robot: usize,
    key: i32,
    value: f64,
    flush_after: bool,
}

fn schedule() -> impl Strategy<Value = (usize, Vec<Write>)> {
    (1usize..=10).prop_flat_map(|n| {
        let write = (0..n, 0i32..20, 0.0f64..1.0, proptest::bool::weighted(0.3)).prop_map(
            |(robot, key, value, flush_after)| Write {
                robot,
                key,
                value,
                flush_after,
            },
        );
        (Just(n), proptest::collection::vec(write, 0..60))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn replicas_agree_after_quiescent_flush((n, writes) in schedule(), seed in any::<u64>()) {
        let mut reps = replicas(n);
        let mut bus = BroadcastBus::new(0.0, 20, 4);
        let active = vec![true; n];
        let mut rng = rng::stream(seed, 0);
        for w in &writes {
            reps[w.robot].vput(CellCoord::new(w.key, 0), w.value, &mut bus);
            if w.flush_after {
                bus.flush(&mut reps, &active, &always, &mut rng);
            }
        }
        let report = bus.flush(&mut reps, &active, &always, &mut rng);
        prop_assert_eq!(report.truncated, 0);
        let dump = reps[0].to_csv();
        for r in &reps[1..] {
            prop_assert_eq!(r.to_csv(), dump.clone());
        }
    }
}

fn permutations(items: &[Message]) -> Vec<Vec<Message>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every write schedule of 3 writes by up to 3 robots over 2 keys, each
/// write either synced to everyone at once or left pending. The pending
/// messages, each duplicated, are then delivered in every order to a
/// bystander replica and to every writer.
#[test]
fn delivery_order_and_duplicates_do_not_matter() {
    let robots = 3usize;
    let keys = 2i32;
    let choices: Vec<(usize, i32, bool)> = (0..robots)
        .flat_map(|r| (0..keys).flat_map(move |k| [(r, k, false), (r, k, true)]))
        .collect();
    let mut schedules = 0;
    for a in &choices {
        for b in &choices {
            for c in &choices {
                let plan = [*a, *b, *c];
                let mut reps = replicas(robots + 1);
                let mut bus = BroadcastBus::new(0.0, 20, 4);
                let mut pending = Vec::new();
                let active = vec![true; robots + 1];
                let mut rng = rng::stream(0, 0);
                for (i, &(r, k, sync)) in plan.iter().enumerate() {
                    reps[r].vput(CellCoord::new(k, 0), 0.1 * (i + 1) as f64, &mut bus);
                    if sync {
                        bus.flush(&mut reps, &active, &always, &mut rng);
                    } else {
                        pending.extend(bus.take_pending());
                    }
                }
                let doubled: Vec<Message> = pending.iter().chain(pending.iter()).copied().collect();
                for (target, start) in reps.iter().enumerate() {
                    let mut outcome: Option<String> = None;
                    for order in permutations(&doubled) {
                        let mut rep = start.clone();
                        let mut scratch = BroadcastBus::new(0.0, 20, 4);
                        for m in &order {
                            rep.on_message(&m.entry, &mut scratch);
                        }
                        let dump = rep.to_csv();
                        match &outcome {
                            None => outcome = Some(dump),
                            Some(first) => {
                                assert_eq!(first, &dump, "plan {plan:?} target {target}")
                            }
                        }
                    }
                }
                schedules += 1;
            }
        }
    }
    assert_eq!(schedules, 12 * 12 * 12);
}

#[test]
fn same_message_twice_is_a_no_op() {
    let mut reps = replicas(2);
    let mut bus = BroadcastBus::new(0.0, 20, 4);
    reps[0].vput(CellCoord::new(1, 1), 0.7, &mut bus);
    let msg = bus.take_pending()[0];
    let mut scratch = BroadcastBus::new(0.0, 20, 4);
    reps[1].on_message(&msg.entry, &mut scratch);
    let once = reps[1].clone();
    reps[1].on_message(&msg.entry, &mut scratch);
    assert_eq!(reps[1].to_csv(), once.to_csv());
    assert_eq!(scratch.pending_len(), 0);
}

/// Lossy medium: writes go out once, then every robot keeps reading every
/// key. Read-triggered rebroadcasts repair whatever the medium dropped.
#[test]
fn reads_repair_lossy_writes() {
    let n = 8;
    let keys: Vec<CellCoord> = (0..12).map(|i| CellCoord::new(i % 4, i / 4)).collect();
    let active = vec![true; n];
    for seed in 0..20u64 {
        let mut rng = rng::stream(seed, 1);
        let mut reps = replicas(n);
        let mut bus = BroadcastBus::new(0.3, 20, 4);
        for _ in 0..40 {
            let w = rng.gen_range(0..n);
            let k = keys[rng.gen_range(0..keys.len())];
            reps[w].vput(k, rng.gen::<f64>(), &mut bus);
            bus.flush(&mut reps, &active, &always, &mut rng);
        }
        let diverged =
            |reps: &[StigmergyReplica]| reps.iter().any(|r| r.to_csv() != reps[0].to_csv());
        let mut rounds = 0;
        while diverged(&reps) {
            assert!(rounds < 50, "seed {seed} did not converge");
            for i in 0..n {
                for &k in &keys {
                    reps[i].vget(k, &mut bus);
                }
                bus.flush(&mut reps, &active, &always, &mut rng);
            }
            rounds += 1;
        }
        for &k in &keys {
            let newest = reps
                .iter()
                .filter_map(|r| r.table().get(&k))
                .map(|e| e.version())
                .max();
            assert!(reps
                .iter()
                .all(|r| r.table().get(&k).map(|e| e.version()) == newest));
        }
    }
}

#[test]
fn inactive_replicas_neither_send_nor_receive() {
    let mut reps = replicas(3);
    let mut bus = BroadcastBus::new(0.0, 20, 4);
    let mut rng = rng::stream(0, 0);
    reps[0].vput(CellCoord::new(0, 0), 0.5, &mut bus);
    reps[1].vput(CellCoord::new(1, 0), 0.5, &mut bus);
    let report = bus.flush(&mut reps, &[true, false, true], &always, &mut rng);
    assert_eq!(report.transmissions, 1);
    assert_eq!(report.delivered, 1);
    assert!(!reps[1].contains(CellCoord::new(0, 0)));
    assert!(!reps[2].contains(CellCoord::new(1, 0)));
    assert_eq!(reps[1].account().bytes_sent, 0);
}
