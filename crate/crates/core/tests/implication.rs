//! Subset canceling checked against the assertions' meaning on random states.

use qassert_core::circuit::{Assertion, AssertionKind, Gate, Instruction, Qubit};
use qassert_core::optimize::{implies, ImplicationRule, DEFAULT_TOLERANCE};
use qassert_core::sim::simulate;
use qassert_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

type State = Vec<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn normalize(mut v: State) -> State {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= n;
    }
    v
}

fn random_dense(rng: &mut impl Rng, dim: usize) -> State {
    normalize((0..dim).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

/// A single-qubit state, biased towards the special cases that make
/// implication interesting.
fn random_qubit(rng: &mut impl Rng) -> [Complex64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match rng.gen_range(0..7) {
        0 => [c(1.0, 0.0), c(0.0, 0.0)],
        1 => [c(0.0, 0.0), c(1.0, 0.0)],
        2 => [c(h, 0.0), c(h, 0.0)],
        3 => [c(h, 0.0), c(-h, 0.0)],
        4 => [c(h, 0.0), c(0.0, h)],
        _ => {
            let v = random_dense(rng, 2);
            [v[0], v[1]]
        }
    }
}

/// Amplitudes over `order` (first entry most significant) of a product of
/// per-qubit states.
fn product(per_qubit: &BTreeMap<usize, [Complex64; 2]>, order: &[usize]) -> State {
    let k = order.len();
    (0..1usize << k)
        .map(|i| {
            order
                .iter()
                .enumerate()
                .map(|(j, q)| per_qubit[q][(i >> (k - 1 - j)) & 1])
                .product()
        })
        .collect()
}

/// Embeds `psi` on `targets` and `phi` on the remaining qubits (ascending,
/// first most significant) into an `n`-qubit state with qubit k at bit k.
fn embed(psi: &[Complex64], targets: &[usize], phi: &[Complex64], n: usize) -> State {
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    (0..1usize << n)
        .map(|idx| {
            let t = targets.iter().fold(0, |acc, &q| (acc << 1) | ((idx >> q) & 1));
            let r = rest.iter().fold(0, |acc, &q| (acc << 1) | ((idx >> q) & 1));
            psi[t] * phi[r]
        })
        .collect()
}

fn shuffled(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        v.swap(i, rng.gen_range(0..=i));
    }
    v.truncate(k);
    v
}

fn assertion(targets: &[usize], kind: AssertionKind) -> Assertion {
    Assertion {
        id: 0,
        targets: targets.iter().map(|&q| Qubit(q)).collect(),
        labels: targets.iter().map(|q| format!("q{q}")).collect(),
        kind,
    }
}

/// The state an equality assertion demands, over its targets.
fn demanded(a: &Assertion) -> Option<State> {
    match &a.kind {
        AssertionKind::Superposition => None,
        AssertionKind::EqualityState(v) => Some(v.clone()),
        AssertionKind::EqualityCircuit { body, num_qubits } => {
            // the simulator stores local qubit j at bit j; targets are listed
            // most significant first
            let k = *num_qubits;
            let amps = simulate(body, k).unwrap().amplitudes().to_vec();
            Some(
                (0..1usize << k)
                    .map(|i| amps[(0..k).fold(0, |acc, j| acc | (((i >> (k - 1 - j)) & 1) << j))])
                    .collect(),
            )
        }
    }
}

/// Direct semantics: a superposition assertion holds when at least two
/// outcomes of its targets are possible; an equality assertion holds when the
/// targets are in the demanded pure state, up to global phase.
fn holds(a: &Assertion, state: &[Complex64], n: usize) -> bool {
    let targets: Vec<usize> = a.targets.iter().map(|q| q.0).collect();
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let k = targets.len();
    let split = |idx: usize| {
        let t = targets.iter().fold(0, |acc, &q| (acc << 1) | ((idx >> q) & 1));
        let r = rest.iter().fold(0, |acc, &q| (acc << 1) | ((idx >> q) & 1));
        (t, r)
    };
    match demanded(a) {
        None => {
            let mut m = vec![0.0; 1 << k];
            for (idx, amp) in state.iter().enumerate() {
                m[split(idx).0] += amp.norm_sqr();
            }
            m.iter().filter(|&&p| p > DEFAULT_TOLERANCE).count() >= 2
        }
        Some(psi) => {
            // fidelity <psi| rho |psi> of the reduced state
            let mut overlap = vec![c(0.0, 0.0); 1 << rest.len()];
            for (idx, amp) in state.iter().enumerate() {
                let (t, r) = split(idx);
                overlap[r] += psi[t].conj() * amp;
            }
            overlap.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1.0 - 1e-9
        }
    }
}

enum Shape {
    Product(BTreeMap<usize, [Complex64; 2]>),
    Dense,
}

struct Drawn {
    a: Assertion,
    shape: Shape,
}

fn draw_first(rng: &mut impl Rng, n: usize) -> Drawn {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let k = rng.gen_range(1..=n);
    let t = shuffled(rng, n, k);
    match rng.gen_range(0..5) {
        0 | 1 => Drawn {
            a: assertion(&t, AssertionKind::Superposition),
            shape: Shape::Dense,
        },
        2 | 3 => {
            let per: BTreeMap<usize, _> = t.iter().map(|&q| (q, random_qubit(rng))).collect();
            let amps = product(&per, &t);
            let kind = if rng.gen_bool(0.2) {
                // the same product prepared by a circuit: x / h per qubit
                let mut body = Vec::new();
                let mut per_c = BTreeMap::new();
                for (j, &q) in t.iter().enumerate() {
                    let (g, s): (Option<Gate>, [Complex64; 2]) = match rng.gen_range(0..3) {
                        0 => (None, [c(1.0, 0.0), c(0.0, 0.0)]),
                        1 => (Some(Gate::X), [c(0.0, 0.0), c(1.0, 0.0)]),
                        _ => (Some(Gate::H), [c(h, 0.0), c(h, 0.0)]),
                    };
                    if let Some(g) = g {
                        body.push(Instruction::gate(g, vec![Qubit(j)]).unwrap());
                    }
                    per_c.insert(q, s);
                }
                return Drawn {
                    a: assertion(&t, AssertionKind::EqualityCircuit { body, num_qubits: k }),
                    shape: Shape::Product(per_c),
                };
            } else {
                AssertionKind::EqualityState(amps)
            };
            Drawn {
                a: assertion(&t, kind),
                shape: Shape::Product(per),
            }
        }
        _ => Drawn {
            a: assertion(&t, AssertionKind::EqualityState(random_dense(rng, 1 << k))),
            shape: Shape::Dense,
        },
    }
}

/// Second assertion, often derived from the first so implication holds.
fn draw_second(rng: &mut impl Rng, first: &Drawn, n: usize) -> Assertion {
    let t1: Vec<usize> = first.a.targets.iter().map(|q| q.0).collect();
    match (rng.gen_range(0..4), &first.shape) {
        (0, _) => {
            // superposition over a random set overlapping the first
            let k = rng.gen_range(1..=n);
            let mut t = shuffled(rng, n, k);
            if !t.iter().any(|q| t1.contains(q)) {
                t.push(t1[0]);
                t.dedup();
            }
            assertion(&t, AssertionKind::Superposition)
        }
        (1, _) => {
            // superset of the first targets
            let mut t = t1.clone();
            for q in shuffled(rng, n, n) {
                if !t.contains(&q) && rng.gen_bool(0.5) {
                    t.push(q);
                }
            }
            for i in (1..t.len()).rev() {
                t.swap(i, rng.gen_range(0..=i));
            }
            assertion(&t, AssertionKind::Superposition)
        }
        (2, Shape::Product(per)) => {
            // a factor of the first state, reordered, with a global phase
            let k = rng.gen_range(1..=t1.len());
            let mut t = t1.clone();
            for i in (1..t.len()).rev() {
                t.swap(i, rng.gen_range(0..=i));
            }
            t.truncate(k);
            let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..6.3));
            let mut amps = product(per, &t);
            if rng.gen_bool(0.2) {
                // perturb so the factor no longer matches
                amps[0] += c(0.3, 0.0);
                amps = normalize(amps);
            }
            assertion(&t, AssertionKind::EqualityState(amps.into_iter().map(|a| a * phase).collect()))
        }
        _ => {
            let k = rng.gen_range(1..=n);
            let t = shuffled(rng, n, k);
            if rng.gen_bool(0.5) {
                assertion(&t, AssertionKind::Superposition)
            } else {
                let per: BTreeMap<usize, _> = t.iter().map(|&q| (q, random_qubit(rng))).collect();
                assertion(&t, AssertionKind::EqualityState(product(&per, &t)))
            }
        }
    }
}

/// States satisfying `first`, mixing generic and structured ones.
fn satisfying_states(rng: &mut impl Rng, first: &Drawn, n: usize, count: usize) -> Vec<State> {
    let t1: Vec<usize> = first.a.targets.iter().map(|q| q.0).collect();
    let rest = n - t1.len();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count {
        attempts += 1;
        let phi = if rng.gen_bool(0.5) {
            random_dense(rng, 1 << rest)
        } else {
            let per: BTreeMap<usize, _> = (0..rest).map(|q| (q, random_qubit(rng))).collect();
            product(&per, &(0..rest).collect::<Vec<_>>())
        };
        let state = match demanded(&first.a) {
            Some(psi) => embed(&psi, &t1, &phi, n),
            None => {
                if rng.gen_bool(0.5) {
                    random_dense(rng, 1 << n)
                } else {
                    let per: BTreeMap<usize, _> = (0..n).map(|q| (q, random_qubit(rng))).collect();
                    product(&per, &(0..n).rev().collect::<Vec<_>>())
                }
            }
        };
        if holds(&first.a, &state, n) {
            out.push(state);
        }
    }
    out
}

#[test]
fn canceling_is_sound_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab1e);
    let mut implied = 0;
    let mut by_rule: BTreeMap<String, usize> = BTreeMap::new();
    let mut drawn = 0;
    while implied < 500 {
        drawn += 1;
        assert!(drawn < 20_000, "too few implied pairs");
        let n = rng.gen_range(1..=3);
        let first = draw_first(&mut rng, n);
        let second = draw_second(&mut rng, &first, n);
        let v = implies(&first.a, &second, DEFAULT_TOLERANCE).unwrap();
        if v.rule == ImplicationRule::None || !v.implies {
            if matches!(first.a.kind, AssertionKind::Superposition) {
                assert!(v.rule == ImplicationRule::SupSup || v.rule == ImplicationRule::None);
            }
            continue;
        }
        implied += 1;
        *by_rule.entry(format!("{:?}", v.rule)).or_default() += 1;
        let states = satisfying_states(&mut rng, &first, n, 20);
        assert!(!states.is_empty());
        for s in states {
            assert!(
                holds(&second, &s, n),
                "unsound cancellation: {:?} implies {:?} but fails on {s:?}",
                first.a,
                second
            );
        }
    }
    for rule in ["SupSup", "EqSup", "EqEq"] {
        assert!(by_rule.get(rule).copied().unwrap_or(0) >= 50, "rule coverage {by_rule:?}");
    }
}

#[test]
fn superposition_never_implies_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=n);
        let t = shuffled(&mut rng, n, k);
        let a1 = assertion(&t, AssertionKind::Superposition);
        let a2 = assertion(&t, AssertionKind::EqualityState(random_dense(&mut rng, 1 << t.len())));
        assert!(!implies(&a1, &a2, DEFAULT_TOLERANCE).unwrap().implies);
    }
}

#[test]
fn second_figure_cases() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let sup = |t: &[usize]| assertion(t, AssertionKind::Superposition);
    let eq = |t: &[usize], v: Vec<Complex64>| assertion(t, AssertionKind::EqualityState(v));
    let cases = [
        (sup(&[0]), sup(&[0, 1]), true),
        (eq(&[0], vec![c(h, 0.0), c(h, 0.0)]), sup(&[0]), true),
        (
            eq(&[0, 1], vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            eq(&[0], vec![c(1.0, 0.0), c(0.0, 0.0)]),
            true,
        ),
        (eq(&[0], vec![c(0.0, 0.0), c(1.0, 0.0)]), sup(&[0, 1]), false),
    ];
    for (a1, a2, want) in cases {
        assert_eq!(implies(&a1, &a2, DEFAULT_TOLERANCE).unwrap().implies, want, "{a1:?} => {a2:?}");
    }
}
