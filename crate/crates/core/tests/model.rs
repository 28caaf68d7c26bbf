use std::sync::Arc;

use piclab::bits::{bits, BitString};
use piclab::model::{
    assign_lots, is_oblivious, required_executions, run, run_all, run_relaxed, FnProgram, Mode,
    ProtocolDef, RoundPlan, Schedule, SimError, Tapes, View, DEFAULT_BUDGET,
};
use piclab::zoo::{self, order_leak_players::*};
use proptest::prelude::*;

fn tapes(private: &[&str], public: &str) -> Tapes {
    Tapes {
        private: private.iter().map(|s| bits(s)).collect(),
        public: bits(public),
    }
}

fn inputs(xs: &[&str]) -> Vec<BitString> {
    xs.iter().map(|s| bits(s)).collect()
}

/// Two one-bit players driven by a closure, no tapes.
fn custom(
    f: impl Fn(usize, usize, &View<'_>) -> RoundPlan + Send + Sync + 'static,
    max_rounds: usize,
) -> ProtocolDef {
    ProtocolDef {
        name: "custom".into(),
        k: 2,
        input_domains: vec![BitString::all_of_len(1).collect(); 2],
        output_domains: vec![BitString::all_of_len(1).collect(); 2],
        private_tape_bits: vec![0; 2],
        public_tape_bits: 0,
        max_local_rounds: max_rounds,
        mode: Mode::Restricted,
        program: Arc::new(FnProgram(move |i: usize, r: usize, v: &View<'_>| {
            Ok(f(i, r, v))
        })),
        family: None,
    }
}

#[test]
fn ring_parity_hand_chain() {
    let p = zoo::ring_parity(3, 1).unwrap().def;
    for pad in ["0", "1"] {
        let x = inputs(&["1", "0", "1"]);
        let e = run(&p, &x, &tapes(&[pad, "", ""], "")).unwrap();
        let m1 = x[0].xor(&bits(pad));
        let m2 = m1.xor(&x[1]);
        let m3 = m2.xor(&x[2]);
        let contents: Vec<_> = e.messages.iter().map(|m| m.content.clone()).collect();
        assert_eq!(contents, vec![m1, m2, m3.clone()]);
        assert_eq!(e.outputs[0], m3.xor(&bits(pad)));
        assert_eq!(e.outputs[0], bits("0"));
        assert_eq!(e.total_bits, 3);
    }
}

#[test]
fn and_opt_zero_input() {
    let p = zoo::and_opt().def;
    for y in ["0", "1"] {
        let e = run(&p, &inputs(&["0", y]), &Tapes::empty(2)).unwrap();
        assert_eq!(e.transcript(1), bits("0"));
        assert_eq!(e.outputs, inputs(&["0", "0"]));
    }
    let e = run(&p, &inputs(&["1", "1"]), &Tapes::empty(2)).unwrap();
    assert_eq!(e.transcript(1), bits("1"));
    assert_eq!(e.transcript(0), bits("1"));
    assert_eq!(e.outputs, inputs(&["1", "1"]));
}

#[test]
fn halting_without_output_is_rejected() {
    let p = custom(|_, _, _| RoundPlan::halt(), 4);
    let err = run(&p, &inputs(&["0", "0"]), &Tapes::empty(2)).unwrap_err();
    assert!(matches!(err, SimError::ModelViolation(_)), "{err}");
}

#[test]
fn endless_rounds_hit_the_limit() {
    let p = custom(|_, _, _| RoundPlan::wait_from(vec![]), 5);
    let err = run(&p, &inputs(&["0", "0"]), &Tapes::empty(2)).unwrap_err();
    assert_eq!(
        err,
        SimError::NonTermination {
            player: 0,
            limit: 5
        }
    );
}

#[test]
fn waiting_on_a_silent_peer_deadlocks() {
    let p = custom(
        |i, _, _| {
            if i == 0 {
                RoundPlan::wait_from(vec![1])
            } else {
                RoundPlan::halt().output(bits("0"))
            }
        },
        4,
    );
    let err = run(&p, &inputs(&["0", "0"]), &Tapes::empty(2)).unwrap_err();
    assert_eq!(
        err,
        SimError::Deadlock {
            player: 0,
            round: 1
        }
    );
}

#[test]
fn unread_messages_are_a_violation() {
    let p = custom(
        |i, _, _| {
            let plan = RoundPlan::halt().output(bits("0"));
            if i == 0 {
                plan.send(1, bits("1"))
            } else {
                plan
            }
        },
        4,
    );
    assert!(matches!(
        run(&p, &inputs(&["0", "0"]), &Tapes::empty(2)),
        Err(SimError::ModelViolation(_))
    ));
}

#[test]
fn plan_shape_violations() {
    let to_self = custom(
        |i, _, _| RoundPlan::halt().output(bits("0")).send(i, bits("1")),
        4,
    );
    let empty_msg = custom(
        |i, _, _| {
            RoundPlan::halt()
                .output(bits("0"))
                .send(1 - i, BitString::new())
        },
        4,
    );
    let twice = custom(
        |_, r, _| match r {
            1 => RoundPlan::wait_from(vec![]).output(bits("0")),
            _ => RoundPlan::halt().output(bits("1")),
        },
        4,
    );
    let empty_out = custom(|_, _, _| RoundPlan::halt().output(BitString::new()), 4);
    for p in [to_self, empty_msg, twice, empty_out] {
        assert!(matches!(
            run(&p, &inputs(&["0", "0"]), &Tapes::empty(2)),
            Err(SimError::ModelViolation(_))
        ));
    }
}

#[test]
fn non_prefix_free_positions_are_caught_by_run_all() {
    // Player 0 sends "1" or "10" depending on its input; player 1 reads it.
    let p = custom(
        |i, _, v| {
            if i == 0 {
                let m = if v.input.bits()[0] {
                    bits("10")
                } else {
                    bits("1")
                };
                RoundPlan::halt().output(bits("0")).send(1, m)
            } else if v.received.is_empty() {
                RoundPlan::wait_from(vec![0])
            } else {
                RoundPlan::halt().output(bits("0"))
            }
        },
        4,
    );
    // Each single run is fine on its own.
    run(&p, &inputs(&["1", "0"]), &Tapes::empty(2)).unwrap();
    match run_all(&p, DEFAULT_BUDGET) {
        Err(SimError::SelfDelimiting {
            sender: 0,
            receiver: 1,
            position: 0,
            first,
            second,
        }) => {
            assert_eq!((first, second), (bits("1"), bits("10")));
        }
        other => panic!("expected a self-delimiting error, got {other:?}"),
    }
}

#[test]
fn bad_inputs_and_tapes() {
    let p = zoo::ring_parity(3, 1).unwrap().def;
    assert!(matches!(
        run(&p, &inputs(&["1", "0"]), &tapes(&["0", "", ""], "")),
        Err(SimError::InvalidArgument(_))
    ));
    assert!(matches!(
        run(&p, &inputs(&["11", "0", "0"]), &tapes(&["0", "", ""], "")),
        Err(SimError::InvalidArgument(_))
    ));
    assert!(matches!(
        run(&p, &inputs(&["1", "0", "0"]), &Tapes::empty(3)),
        Err(SimError::InvalidArgument(_))
    ));
}

#[test]
fn run_all_counts() {
    let and = run_all(&zoo::and_opt().def, DEFAULT_BUDGET).unwrap();
    assert_eq!(and.executions.len(), 4);
    let ring = run_all(&zoo::ring_parity(3, 1).unwrap().def, DEFAULT_BUDGET).unwrap();
    assert_eq!(ring.executions.len(), 8 * 2);
    let star = run_all(&zoo::star_parity(3, 2).unwrap().def, DEFAULT_BUDGET).unwrap();
    assert_eq!(star.executions.len(), 64);
    assert!(star.executions.iter().all(|e| e.total_bits == 4));
}

#[test]
fn budget_is_enforced() {
    let p = zoo::ring_parity(3, 2).unwrap().def;
    assert_eq!(required_executions(&p), 64 * 4);
    assert_eq!(
        run_all(&p, 100).unwrap_err(),
        SimError::BudgetExceeded {
            required: 256,
            budget: 100
        }
    );
}

#[test]
fn lot_shapes() {
    let ring = zoo::ring_parity(3, 1).unwrap().def;
    let e = run(&ring, &inputs(&["1", "0", "1"]), &tapes(&["1", "", ""], "")).unwrap();
    assert_eq!(
        e.lot_structure(),
        vec![vec![(0, 1)], vec![(1, 2)], vec![(2, 0)]]
    );

    let star = zoo::star_parity(4, 1).unwrap().def;
    let e = run(&star, &inputs(&["0", "1", "0", "1"]), &Tapes::empty(4)).unwrap();
    assert_eq!(e.lot_structure(), vec![vec![(1, 0), (2, 0), (3, 0)]]);

    let and = zoo::and_opt().def;
    let e = run(&and, &inputs(&["1", "0"]), &Tapes::empty(2)).unwrap();
    assert_eq!(e.lot_structure(), vec![vec![(0, 1)], vec![(1, 0)]]);
}

#[test]
fn assign_lots_is_stable_on_completed_executions() {
    let p = zoo::relay_and().def;
    for e in &run_all(&p, DEFAULT_BUDGET).unwrap().executions {
        assert_eq!(&assign_lots(e).unwrap(), &e.messages);
    }
}

#[test]
fn obliviousness() {
    for p in [
        zoo::ring_parity(3, 1).unwrap().def,
        zoo::and_opt().def,
        zoo::relay_and().def,
    ] {
        let (ok, w) = is_oblivious(&p, DEFAULT_BUDGET).unwrap();
        assert!(ok && w.is_none(), "{}", p.name);
    }
    let q = zoo::q_index(3, 1).unwrap().def;
    let (ok, w) = is_oblivious(&q, DEFAULT_BUDGET).unwrap();
    assert!(!ok);
    let w = w.unwrap();
    assert_ne!(w.first_pattern, w.second_pattern);
    assert_ne!(w.first_inputs, w.second_inputs);
}

#[test]
fn order_leak_needs_the_relaxed_model() {
    let p = zoo::order_leak().def;
    let x = vec![
        bits("0"),
        BitString::new(),
        BitString::new(),
        BitString::new(),
    ];
    assert!(matches!(
        run(&p, &x, &Tapes::empty(4)),
        Err(SimError::ModelViolation(_))
    ));
    let and = zoo::and_opt().def;
    assert!(matches!(
        run_relaxed(
            &and,
            &inputs(&["0", "0"]),
            &Tapes::empty(2),
            &Schedule::OldestFirst
        ),
        Err(SimError::InvalidArgument(_))
    ));
}

#[test]
fn order_leak_reveals_the_bit_through_arrival_order() {
    let p = zoo::order_leak().def;
    let mut contents = Vec::new();
    for (x, first, out) in [("0", C, "0"), ("1", D, "1")] {
        let input = vec![
            bits(x),
            BitString::new(),
            BitString::new(),
            BitString::new(),
        ];
        let e = run_relaxed(&p, &input, &Tapes::empty(4), &Schedule::OldestFirst).unwrap();
        assert_eq!(e.received[B][0].0, first);
        assert_eq!(e.outputs[B], bits(out));
        assert!(e.messages.iter().all(|m| m.content == bits("0")));
        contents.push(e.full_transcript());
    }
    assert_eq!(contents[0], contents[1]);
}

fn check_invariants(p: &ProtocolDef, e: &piclab::model::Execution) {
    let k = p.k;
    // Bits sent equal bits read.
    let read: usize = (0..k).map(|i| e.transcript(i).len()).sum();
    assert_eq!(read, e.total_bits);
    assert_eq!(e.full_transcript().len(), e.total_bits);
    // Global index is the position, lots are non-decreasing, links are
    // lexicographic inside a lot.
    for (g, m) in e.messages.iter().enumerate() {
        assert_eq!(m.global_index, g);
    }
    for w in e.messages.windows(2) {
        assert!((w[0].lot, w[0].sender, w[0].receiver) < (w[1].lot, w[1].sender, w[1].receiver));
    }
    // FIFO: same-link messages keep their link order.
    for a in &e.messages {
        for b in &e.messages {
            if (a.sender, a.receiver) == (b.sender, b.receiver) && a.link_index < b.link_index {
                assert!(a.global_index < b.global_index);
            }
        }
    }
    // Causality: replaying the sender's program on the messages it read
    // before the sending round, all of which precede the message globally,
    // gives the same content.
    for m in &e.messages {
        let before: Vec<(usize, BitString)> = e
            .messages
            .iter()
            .filter(|h| h.receiver == m.sender && h.read_round < m.sent_round)
            .map(|h| {
                assert!(h.global_index < m.global_index);
                (h.sender, h.content.clone())
            })
            .collect();
        let n = before.len();
        let view = View {
            player: m.sender,
            input: &e.inputs[m.sender],
            private_tape: &e.tapes.private[m.sender],
            public_tape: &e.tapes.public,
            received: &e.received[m.sender][..n],
        };
        let plan = p.program.plan(m.sender, m.sent_round, &view).unwrap();
        let sent = plan.sends.iter().find(|(to, _)| *to == m.receiver).unwrap();
        assert_eq!(sent.1, m.content);
    }
}

#[test]
fn zoo_executions_satisfy_ordering_invariants() {
    let defs = [
        zoo::ring_parity(3, 1).unwrap().def,
        zoo::ring_parity(4, 1).unwrap().def,
        zoo::star_parity(3, 2).unwrap().def,
        zoo::and_opt().def,
        zoo::relay_and().def,
        zoo::q_index(4, 2).unwrap().def,
    ];
    for p in &defs {
        let table = run_all(p, DEFAULT_BUDGET).unwrap();
        let oblivious = table.oblivious_witness().is_none();
        let shape = table.executions[0].lot_structure();
        for e in &table.executions {
            check_invariants(p, e);
            if oblivious {
                assert_eq!(e.lot_structure(), shape, "{}", p.name);
            }
        }
    }
}

#[test]
fn transcript_orderings_carry_the_same_bits() {
    let p = zoo::relay_and().def;
    for e in &run_all(&p, DEFAULT_BUDGET).unwrap().executions {
        for i in 0..3 {
            let mut a = e.bidirectional(i).bits().to_vec();
            let mut b = e.bidirectional_by_round(i).bits().to_vec();
            let mut c = e.bidirectional_by_lot(i).bits().to_vec();
            a.sort();
            b.sort();
            c.sort();
            assert_eq!(a, b);
            assert_eq!(b, c);
            let links: usize = (0..3)
                .filter(|&j| j != i)
                .map(|j| e.link_log(j, i).len())
                .sum();
            assert_eq!(links, e.transcript(i).len());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_are_deterministic(k in 3usize..6, n in 1usize..4, seed in any::<u64>()) {
        let p = zoo::ring_parity(k, n).unwrap().def;
        let mut s = seed;
        let mut draw = |len: usize| {
            BitString::from_bits((0..len).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                s >> 63 == 1
            }))
        };
        let x: Vec<BitString> = (0..k).map(|_| draw(n)).collect();
        let mut private = vec![BitString::new(); k];
        private[0] = draw(n);
        let t = Tapes { private, public: BitString::new() };
        let a = run(&p, &x, &t).unwrap();
        let b = run(&p, &x, &t).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.outputs[0], &zoo::parity(&x));
        prop_assert_eq!(a.total_bits, k * n);
        check_invariants(&p, &a);
    }

    #[test]
    fn q_index_answers_every_query(k in 3usize..7, seed in any::<u64>()) {
        let q = 1 + (seed as usize) % (k - 1);
        let p = zoo::q_index(k, q).unwrap().def;
        let mut idx: Vec<usize> = (0..k - 1).collect();
        idx.rotate_left((seed >> 8) as usize % (k - 1));
        idx.truncate(q);
        let holders: Vec<BitString> = (0..k - 1).map(|j| BitString::from_bits([(seed >> (16 + j)) & 1 == 1])).collect();
        let mut x = holders.clone();
        x.push(zoo::q_index_input(k, &idx).unwrap());
        let e = run(&p, &x, &Tapes::empty(k)).unwrap();
        let want = BitString::concat(idx.iter().map(|&j| &holders[j]));
        prop_assert_eq!(&e.outputs[k - 1], &want);
        prop_assert_eq!(e.total_bits, 2 * q);
        check_invariants(&p, &e);
    }
}
