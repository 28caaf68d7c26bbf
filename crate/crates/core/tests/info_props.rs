use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use piclab::bits::bits;
use piclab::info::{
    apply_function, apply_with, binary_entropy, cond_entropy, entropy, mutual_info, ratio, sel,
    JointDistribution, Value, TOLERANCE,
};
use proptest::prelude::*;

const VARS: [&str; 4] = ["A", "B", "C", "D"];

fn names() -> Vec<String> {
    VARS.iter().map(|s| s.to_string()).collect()
}

/// Joint law over four variables with given alphabet sizes and positive
/// integer weights (zero entries are dropped).
fn from_weights(sizes: &[usize; 4], weights: &[u32]) -> JointDistribution {
    let total: u64 = weights.iter().map(|&w| u64::from(w)).sum();
    let mut items = Vec::new();
    let mut n = 0;
    for a in 0..sizes[0] {
        for b in 0..sizes[1] {
            for c in 0..sizes[2] {
                for d in 0..sizes[3] {
                    let w = weights[n];
                    n += 1;
                    let t = [a, b, c, d].map(|v| Value::Int(v as i64)).to_vec();
                    items.push((t, ratio(i64::from(w), total as i64)));
                }
            }
        }
    }
    JointDistribution::from_weighted(names(), items).unwrap()
}

fn arb_dist() -> impl Strategy<Value = JointDistribution> {
    prop::array::uniform4(1usize..=3).prop_flat_map(|sizes| {
        let n: usize = sizes.iter().product();
        prop::collection::vec(0u32..6, n)
            .prop_filter("some mass", |w| w.iter().any(|&x| x > 0))
            .prop_map(move |w| from_weights(&sizes, &w))
    })
}

/// Conditional table: for each of `rows` contexts a positive weight vector
/// over `size` values.
fn arb_cond(rows: usize, size: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(1u32..5, size), rows)
}

fn norm(row: &[u32], v: usize) -> BigRational {
    let s: u32 = row.iter().sum();
    ratio(i64::from(row[v]), i64::from(s))
}

/// A, C arbitrary; B and D independent given (A, C).
fn premise_ac() -> impl Strategy<Value = JointDistribution> {
    (arb_cond(1, 4), arb_cond(4, 2), arb_cond(4, 3)).prop_map(|(ac, b, d)| {
        let mut items = Vec::new();
        for a in 0..2 {
            for c in 0..2 {
                let ctx = a * 2 + c;
                for bv in 0..2 {
                    for dv in 0..3 {
                        let w = norm(&ac[0], ctx) * norm(&b[ctx], bv) * norm(&d[ctx], dv);
                        let t = [a, bv, c, dv].map(|v| Value::Int(v as i64)).to_vec();
                        items.push((t, w));
                    }
                }
            }
        }
        JointDistribution::from_weighted(names(), items).unwrap()
    })
}

/// C arbitrary; B and D independent given C; A depends on everything.
fn premise_c() -> impl Strategy<Value = JointDistribution> {
    (
        arb_cond(1, 2),
        arb_cond(2, 2),
        arb_cond(2, 2),
        arb_cond(8, 2),
    )
        .prop_map(|(c, b, d, a)| {
            let mut items = Vec::new();
            for cv in 0..2 {
                for bv in 0..2 {
                    for dv in 0..2 {
                        for av in 0..2 {
                            let ctx = cv * 4 + bv * 2 + dv;
                            let w = norm(&c[0], cv)
                                * norm(&b[cv], bv)
                                * norm(&d[cv], dv)
                                * norm(&a[ctx], av);
                            let t = [av, bv, cv, dv].map(|v| Value::Int(v as i64)).to_vec();
                            items.push((t, w));
                        }
                    }
                }
            }
            JointDistribution::from_weighted(names(), items).unwrap()
        })
}

/// Entropy of the marginal on `cols`, computed directly in f64.
fn oracle_entropy(d: &JointDistribution, cols: &[&str]) -> f64 {
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| d.variables().iter().position(|v| v == c).unwrap())
        .collect();
    let mut m: HashMap<Vec<Value>, f64> = HashMap::new();
    for (t, w) in d.outcomes() {
        let key = idx.iter().map(|&i| t[i].clone()).collect();
        *m.entry(key).or_default() += w.to_f64().unwrap();
    }
    m.values()
        .filter(|&&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

fn i(d: &JointDistribution, a: &[&str], b: &[&str], c: &[&str]) -> f64 {
    let given = (!c.is_empty()).then(|| sel(c));
    mutual_info(d, &sel(a), &sel(b), given.as_ref()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn entropy_matches_direct_evaluation(d in arb_dist()) {
        for cols in [&["A"][..], &["A", "B"], &["B", "C", "D"], &VARS] {
            let h = entropy(&d, &sel(cols)).unwrap();
            prop_assert!((h - oracle_entropy(&d, cols)).abs() <= TOLERANCE);
            prop_assert!(h >= 0.0);
        }
        let h = cond_entropy(&d, &sel(&["A"]), &sel(&["B"])).unwrap();
        let want = oracle_entropy(&d, &["A", "B"]) - oracle_entropy(&d, &["B"]);
        prop_assert!((h - want).abs() <= TOLERANCE);
    }

    #[test]
    fn chain_rule(d in arb_dist()) {
        let whole = i(&d, &["A", "B"], &["C"], &["D"]);
        let parts = i(&d, &["A"], &["C"], &["D"]) + i(&d, &["B"], &["C"], &["D", "A"]);
        prop_assert!((whole - parts).abs() <= TOLERANCE);
    }

    #[test]
    fn symmetry_and_non_negativity(d in arb_dist()) {
        let ab = i(&d, &["A"], &["B"], &["C"]);
        let ba = i(&d, &["B"], &["A"], &["C"]);
        prop_assert!((ab - ba).abs() <= TOLERANCE);
        prop_assert!(ab >= 0.0);
        prop_assert!(i(&d, &["A", "D"], &["B"], &[]) >= 0.0);
    }

    #[test]
    fn data_processing(d in arb_dist(), table in prop::collection::vec(0i64..3, 3)) {
        let f: HashMap<Vec<Value>, Value> = (0..3)
            .map(|v| (vec![Value::Int(v)], Value::Int(table[v as usize])))
            .collect();
        let e = apply_function(&d, &sel(&["B"]), &f, "F").unwrap();
        let through = i(&e, &["A"], &["F"], &["C"]);
        prop_assert!(through <= i(&e, &["A"], &["B"], &["C"]) + TOLERANCE);
        // Marginals of the original variables are untouched.
        prop_assert_eq!(e.marginal(&sel(&VARS)).unwrap(), d.marginal(&sel(&VARS)).unwrap());
    }

    #[test]
    fn conditioning_on_an_independent_side_variable_cannot_help(d in premise_ac()) {
        prop_assume!(i(&d, &["B"], &["D"], &["A", "C"]) <= 1e-12);
        prop_assert!(i(&d, &["A"], &["B"], &["C"]) >= i(&d, &["A"], &["B"], &["C", "D"]) - TOLERANCE);
    }

    #[test]
    fn conditioning_on_an_independent_side_variable_cannot_hurt(d in premise_c()) {
        prop_assume!(i(&d, &["B"], &["D"], &["C"]) <= 1e-12);
        prop_assert!(i(&d, &["A"], &["B"], &["C"]) <= i(&d, &["A"], &["B"], &["C", "D"]) + TOLERANCE);
    }

    #[test]
    fn premise_gated_on_arbitrary_laws(d in arb_dist()) {
        if i(&d, &["B"], &["D"], &["A", "C"]) <= 1e-12 {
            prop_assert!(i(&d, &["A"], &["B"], &["C"]) >= i(&d, &["A"], &["B"], &["C", "D"]) - TOLERANCE);
        }
        if i(&d, &["B"], &["D"], &["C"]) <= 1e-12 {
            prop_assert!(i(&d, &["A"], &["B"], &["C"]) <= i(&d, &["A"], &["B"], &["C", "D"]) + TOLERANCE);
        }
    }

    #[test]
    fn entropy_is_bounded_by_support_size(d in arb_dist()) {
        for cols in [&["A"][..], &["A", "C"], &VARS] {
            let support = d.marginal(&sel(cols)).unwrap().len() as f64;
            prop_assert!(entropy(&d, &sel(cols)).unwrap() <= support.log2() + TOLERANCE);
        }
    }

    #[test]
    fn prefix_free_support_bounds_entropy_by_expected_length(d in arb_dist()) {
        // Map each value of A to a codeword of a prefix-free code.
        let code = ["0", "10", "11"];
        let e = apply_with(&d, &sel(&["A"]), |v| match &v[0] {
            Value::Int(n) => Some(Value::Bits(bits(code[*n as usize]))),
            _ => None,
        }, "W").unwrap();
        let mean: f64 = e
            .marginal(&sel(&["W"]))
            .unwrap()
            .iter()
            .map(|(v, p)| match &v[0] {
                Value::Bits(b) => b.len() as f64 * p.to_f64().unwrap(),
                _ => unreachable!(),
            })
            .sum();
        prop_assert!(entropy(&e, &sel(&["W"])).unwrap() <= mean + TOLERANCE);
    }
}

#[test]
fn worked_values() {
    let bit = |p: BigRational| {
        JointDistribution::new(
            vec!["X".into()],
            vec![
                (vec![Value::Int(0)], p.clone()),
                (vec![Value::Int(1)], ratio(1, 1) - p),
            ],
        )
        .unwrap()
    };
    assert!((entropy(&bit(ratio(1, 2)), &sel(&["X"])).unwrap() - 1.0).abs() <= TOLERANCE);
    let third = (1.0 / 3.0) * 3f64.log2() + (2.0 / 3.0) * 1.5f64.log2();
    assert!((entropy(&bit(ratio(1, 3)), &sel(&["X"])).unwrap() - third).abs() <= TOLERANCE);

    // Z = X xor Y over two fair bits: I(X;Y|Z) = 1.
    let rows: Vec<_> = (0..4)
        .map(|n| {
            let (x, y) = (n / 2, n % 2);
            (
                vec![Value::Int(x), Value::Int(y), Value::Int(x ^ y)],
                ratio(1, 4),
            )
        })
        .collect();
    let d = JointDistribution::new(vec!["X".into(), "Y".into(), "Z".into()], rows).unwrap();
    assert!(
        (mutual_info(&d, &sel(&["X"]), &sel(&["Y"]), Some(&sel(&["Z"]))).unwrap() - 1.0).abs()
            <= TOLERANCE
    );
    assert!(
        mutual_info(&d, &sel(&["X"]), &sel(&["Y"]), None)
            .unwrap()
            .abs()
            <= TOLERANCE
    );

    let and = apply_with(
        &d,
        &sel(&["X", "Y"]),
        |v| match (&v[0], &v[1]) {
            (Value::Int(a), Value::Int(b)) => Some(Value::Int(a & b)),
            _ => None,
        },
        "AND",
    )
    .unwrap();
    assert!((entropy(&and, &sel(&["AND"])).unwrap() - binary_entropy(0.25)).abs() <= TOLERANCE);
    let mut partial: BTreeMap<i64, i64> = BTreeMap::new();
    partial.insert(0, 0);
    assert!(apply_with(
        &d,
        &sel(&["X"]),
        |v| match &v[0] {
            Value::Int(a) => partial.get(a).map(|&b| Value::Int(b)),
            _ => None,
        },
        "P"
    )
    .is_err());
}
