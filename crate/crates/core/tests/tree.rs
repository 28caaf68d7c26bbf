use std::path::PathBuf;

use num_traits::ToPrimitive;
use piclab::bits::bits;
use piclab::compression::{audit_obliviousized, obliviousize};
use piclab::info::{ratio, TOLERANCE};
use piclab::measures::{publicize, Analysis, InputDistribution};
use piclab::model::tree::{from_json_str, from_path, TreeError};
use piclab::model::{run, run_all, ProtocolDef, SimError, Tapes, DEFAULT_BUDGET};

fn fixture(name: &str) -> ProtocolDef {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name);
    from_path(&path).unwrap()
}

fn analysis(p: &ProtocolDef) -> Analysis {
    Analysis::from_protocol(p, InputDistribution::uniform(p), DEFAULT_BUDGET).unwrap()
}

#[test]
fn and_second_bit_only_speaks_when_needed() {
    let p = fixture("and_second_bit.json");
    assert_eq!(p.name, "and-second-bit");
    let a = analysis(&p);
    a.check_zero_error().unwrap();
    // Bob replies only when x = 1: half the inputs cost two bits.
    assert_eq!(a.acc(), ratio(3, 2));
    assert_eq!(a.cc(), 2);
    let e = run(&p, &[bits("0"), bits("1")], &Tapes::empty(2)).unwrap();
    assert_eq!(e.total_bits, 1);
    assert_eq!(e.outputs, vec![bits("0"), bits("0")]);
}

#[test]
fn masked_xor_is_correct_and_publicizes() {
    let p = fixture("masked_xor.json");
    assert_eq!(
        (p.private_tape_bits.clone(), p.public_tape_bits),
        (vec![1, 0], 1)
    );
    let a = analysis(&p);
    a.check_zero_error().unwrap();
    let table = run_all(&p, DEFAULT_BUDGET).unwrap();
    assert_eq!(table.executions.len(), 4 * 4);
    assert!(table.executions.iter().all(|e| e.total_bits == 3));

    let pic = a.pic().unwrap();
    let public = publicize(&p);
    let b = analysis(&public);
    assert!(!public.has_private_randomness());
    assert!((b.pic().unwrap() - pic).abs() <= TOLERANCE);
    assert!((b.ic().unwrap() - pic).abs() <= TOLERANCE);
    b.check_zero_error().unwrap();
}

#[test]
fn long_tail_is_truncated_by_the_phase_conversion() {
    let p = fixture("long_tail.json");
    let mu = InputDistribution::uniform(&p);
    let a = analysis(&p);
    // One bit always, seven more on input 11.
    assert_eq!(a.acc(), ratio(11, 4));
    assert_eq!(a.cc(), 8);
    let ob = obliviousize(&p, &mu, 0.9, DEFAULT_BUDGET).unwrap();
    assert_eq!(ob.phases, 7);
    assert_eq!(ob.truncation_mass, ratio(1, 4));
    let eps_bound = ob.acc.to_f64().unwrap() / ob.phases as f64;
    assert!(ob.truncation_mass.to_f64().unwrap() <= eps_bound);
    let audit = audit_obliviousized(&p, &ob, &mu, DEFAULT_BUDGET).unwrap();
    assert!(audit.oblivious);
    assert!(audit.agrees_when_complete);
    // Player 1 falls back to its default output on the truncated input.
    assert_eq!(audit.error.as_deref(), Some("1/4"));
}

#[test]
fn malformed_files_are_rejected() {
    assert!(matches!(from_json_str("{"), Err(TreeError::Json(_))));
    assert!(matches!(
        from_json_str(r#"{"k": 2, "input_bits": [1, 1], "tree": {"outputs": ["0"]}}"#),
        Err(TreeError::Invalid(_))
    ));
    assert!(matches!(
        from_json_str(r#"{"k": 2, "input_bits": [1], "tree": {"outputs": ["0", "0"]}}"#),
        Err(TreeError::Invalid(_))
    ));
    assert!(matches!(
        from_json_str(
            r#"{"k": 2, "input_bits": [1, 1], "extra": 1, "tree": {"outputs": ["0", "0"]}}"#
        ),
        Err(TreeError::Json(_))
    ));
    assert!(from_path(std::path::Path::new("/nonexistent/tree.json")).is_err());
}

#[test]
fn leaf_only_tree_runs_without_messages() {
    let p = from_json_str(
        r#"{"k": 2, "input_bits": [1, 1], "tree": {"outputs": ["1", {"0": "0", "1": "1"}]}}"#,
    )
    .unwrap();
    let table = run_all(&p, DEFAULT_BUDGET).unwrap();
    for e in &table.executions {
        assert_eq!(e.total_bits, 0);
        assert_eq!(e.outputs[0], bits("1"));
        assert_eq!(e.outputs[1], e.inputs[1]);
    }
}

#[test]
fn missing_table_entries_fail_at_run_time() {
    // Alice's message is only defined for x = 0.
    let text = r#"{
        "k": 2, "input_bits": [1, 1],
        "tree": {"sender": 0, "receiver": 1, "msg_bits": 1, "message": {"0": "0"},
                 "children": {"0": {"outputs": ["0", "0"]}}}
    }"#;
    let p = from_json_str(text).unwrap();
    run(&p, &[bits("0"), bits("0")], &Tapes::empty(2)).unwrap();
    assert!(matches!(
        run(&p, &[bits("1"), bits("0")], &Tapes::empty(2)),
        Err(SimError::Program { player: 0, .. })
    ));
}
