use piclab::bits::{bits, BitString};
use piclab::measures::{Analysis, InputDistribution};
use piclab::model::{is_oblivious, run, run_all, Tapes, DEFAULT_BUDGET};
use piclab::zoo::{self, ZooError, REGISTRY};

#[test]
fn registry_names_resolve() {
    for name in REGISTRY {
        let e = zoo::by_name(name, None, None, None).unwrap();
        assert_eq!(&e.name, name);
        assert!(!e.description.is_empty());
    }
    assert!(matches!(
        zoo::by_name("bgw", None, None, None),
        Err(ZooError::Unknown(_))
    ));
    let e = zoo::by_name("star-parity", Some(5), Some(2), None).unwrap();
    assert_eq!((e.def.k, e.params.n), (5, Some(2)));
}

#[test]
fn parameter_checks() {
    assert!(zoo::ring_parity(2, 1).is_err());
    assert!(zoo::ring_parity(3, 0).is_err());
    assert!(zoo::star_parity(1, 1).is_err());
    assert!(zoo::q_index(3, 0).is_err());
    assert!(zoo::q_index(3, 3).is_err());
    assert!(matches!(
        zoo::q_index_input(4, &[1, 1]),
        Err(ZooError::InvalidParameters(_))
    ));
    assert!(zoo::q_index_input(4, &[3]).is_err());
}

#[test]
fn restricted_entries_compute_their_functions() {
    let defs = [
        zoo::ring_parity(3, 1).unwrap().def,
        zoo::ring_parity(3, 2).unwrap().def,
        zoo::ring_parity(5, 1).unwrap().def,
        zoo::star_parity(2, 3).unwrap().def,
        zoo::star_parity(4, 1).unwrap().def,
        zoo::and_opt().def,
        zoo::q_index(3, 2).unwrap().def,
        zoo::q_index(4, 1).unwrap().def,
        zoo::relay_and().def,
    ];
    for p in &defs {
        let table = run_all(p, DEFAULT_BUDGET).unwrap();
        let fam = p.family.as_ref().unwrap();
        for e in &table.executions {
            assert_eq!(
                e.outputs,
                fam.eval(&e.inputs),
                "{} on {:?}",
                p.name,
                e.inputs
            );
            for (i, o) in e.outputs.iter().enumerate() {
                assert!(p.output_domains[i].contains(o));
            }
        }
        let a = Analysis::from_protocol(p, InputDistribution::uniform(p), DEFAULT_BUDGET).unwrap();
        a.check_zero_error().unwrap();
    }
}

#[test]
fn ring_parity_example_run() {
    // x = (1,0,1) with pad 1: running values 0, 0, 1 around the ring.
    let p = zoo::ring_parity(3, 1).unwrap().def;
    let x: Vec<BitString> = ["1", "0", "1"].iter().map(|s| bits(s)).collect();
    let t = Tapes {
        private: vec![bits("1"), BitString::new(), BitString::new()],
        public: BitString::new(),
    };
    let e = run(&p, &x, &t).unwrap();
    let m: Vec<_> = e.messages.iter().map(|m| m.content.clone()).collect();
    assert_eq!(m, vec![bits("0"), bits("0"), bits("1")]);
    assert_eq!(e.outputs[0], bits("0"));
    assert_eq!(&e.outputs[1..], &[bits("0"), bits("0")]);
}

#[test]
fn q_index_single_query() {
    // Player 3 asks holder 1, which holds bit 1.
    let p = zoo::q_index(4, 1).unwrap().def;
    let x = vec![
        bits("0"),
        bits("1"),
        bits("0"),
        zoo::q_index_input(4, &[1]).unwrap(),
    ];
    let e = run(&p, &x, &Tapes::empty(4)).unwrap();
    assert_eq!(e.outputs[3], bits("1"));
    assert_eq!(e.total_bits, 2);
    assert_eq!(e.messages[0].content, bits("0"));
}

#[test]
fn q_index_costs_exactly_two_bits_per_query() {
    for (k, q) in [(3, 1), (3, 2), (4, 2), (5, 3)] {
        let p = zoo::q_index(k, q).unwrap().def;
        let table = run_all(&p, DEFAULT_BUDGET).unwrap();
        assert!(table.executions.iter().all(|e| e.total_bits == 2 * q));
        let (ok, w) = is_oblivious(&p, DEFAULT_BUDGET).unwrap();
        assert!(!ok && w.is_some());
    }
}

#[test]
fn lifted_protocols_keep_their_behaviour() {
    let and = zoo::and_opt().def;
    let lifted = zoo::lift_players(&and, 4).unwrap();
    assert_eq!(lifted.k, 4);
    let table = run_all(&lifted, DEFAULT_BUDGET).unwrap();
    let fam = lifted.family.as_ref().unwrap();
    for e in &table.executions {
        assert_eq!(e.outputs, fam.eval(&e.inputs));
        assert_eq!(e.total_bits, 2);
    }
    assert!(zoo::lift_players(&and, 1).is_err());
}
