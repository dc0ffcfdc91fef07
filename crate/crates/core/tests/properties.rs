mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::sample::subsequence;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adsem::atomic::{run_method, AtomicBinding, AtomicInstance};
use adsem::corpus;
use adsem::methods::{check_role_frames, check_two_phase, simulate, CallerMode, MethodsBinding, Outcome, PinController, Scenario};
use adsem::semantics::{
    buffer_law_holds, check_buffer_law, fifo_decompose, satisfies, stutter, StepFacts, StepView, Token, Verdict,
    VariationBinding,
};
use adsem::syntax::{
    parse, print, validate, ActivityDiagram, Guard, Node, NodeKind, Pin, PinType, Profile, Transition,
    DEFAULT_ROLE,
};
use adsem::system::{Attributes, Value};
use adsem::token_game::{
    as_binding, initial_config, lift, random_run, representative, successors, token_binding, ActionMode, ChoiceKind,
    Configuration, Run, StepMode, Underspecified,
};

use common::{mutate, MUTATIONS};

// ------------------------------------------------------------ generators

const KINDS: [NodeKind; 5] =
    [NodeKind::Initial, NodeKind::Final, NodeKind::Action, NodeKind::ForkJoin, NodeKind::DecisionMerge];

fn pin_type() -> impl Strategy<Value = PinType> {
    prop_oneof![
        Just(PinType::Control),
        Just(PinType::Top),
        Just(PinType::Data("Int".into())),
        Just(PinType::Data("Grade".into())),
    ]
}

fn free_text() -> impl Strategy<Value = String> {
    "[ -~]{0,12}"
}

fn node(i: usize) -> impl Strategy<Value = Node> {
    (
        0..KINDS.len(),
        prop_oneof![Just(DEFAULT_ROLE.to_string()), "R[0-2]"],
        prop::collection::vec(pin_type(), 0..3),
        prop::collection::vec((pin_type(), prop::option::of(free_text())), 0..3),
        prop_oneof![Just(String::new()), free_text()],
    )
        .prop_map(move |(k, role, ins, outs, effect)| {
            let kind = KINDS[k];
            let mut n = Node::new(kind, format!("n{i}"));
            n.role = role;
            n.effect = effect;
            if kind != NodeKind::Initial {
                n.in_pins = ins.into_iter().enumerate().map(|(j, ty)| Pin::input(format!("i{j}"), ty)).collect();
            }
            if kind != NodeKind::Final {
                n.out_pins = outs
                    .into_iter()
                    .enumerate()
                    .map(|(j, (ty, g))| Pin::output(format!("o{j}"), ty, g.map(Guard).unwrap_or_else(Guard::always)))
                    .collect();
            }
            n
        })
}

/// Arbitrary well-formed abstract syntax: typed pins, guards, roles,
/// effects, and each transition connecting declared pins.
fn any_diagram() -> impl Strategy<Value = ActivityDiagram> {
    (1usize..7)
        .prop_flat_map(|k| (0..k).map(node).collect::<Vec<_>>())
        .prop_flat_map(|nodes| {
            let ports: Vec<(String, String)> =
                nodes.iter().flat_map(|n| n.out_pins.iter().map(move |p| (n.name.clone(), p.name.clone()))).collect();
            let sinks: Vec<(String, String)> =
                nodes.iter().flat_map(|n| n.in_pins.iter().map(move |p| (n.name.clone(), p.name.clone()))).collect();
            let pairs: Vec<(usize, usize)> =
                (0..ports.len()).flat_map(|a| (0..sinks.len()).map(move |b| (a, b))).collect();
            let n = pairs.len();
            (Just(nodes), Just(ports), Just(sinks), subsequence(pairs, 0..=n.min(8)))
        })
        .prop_map(|(nodes, ports, sinks, chosen)| {
            let ts = chosen
                .into_iter()
                .map(|(a, b)| Transition::new(&ports[a].0, &ports[a].1, &sinks[b].0, &sinks[b].1))
                .collect();
            ActivityDiagram::new("Gen", nodes, ts).expect("generated diagrams are well formed")
        })
}

/// Executable diagrams: one initial and one final node, a few actions,
/// fork/joins and decision/merges, wired by control edges.
fn flow_diagram() -> impl Strategy<Value = ActivityDiagram> {
    (1usize..4, 0usize..2, 0usize..2)
        .prop_flat_map(|(a, f, d)| {
            let names: Vec<String> = std::iter::once("i".to_string())
                .chain(std::iter::once("f".to_string()))
                .chain((0..a).map(|k| format!("A{k}")))
                .chain((0..f).map(|k| format!("F{k}")))
                .chain((0..d).map(|k| format!("D{k}")))
                .collect();
            let count = names.len();
            // Sources exclude the final node (index 1), targets the initial one.
            let edge = (prop_oneof![Just(0usize), 2..count], 1..count);
            (Just((a, f, d)), Just(names), Just(2..count), prop::collection::vec(edge, 1..8))
        })
        .prop_flat_map(|(sizes, names, inner, edges)| (Just(sizes), Just(names), Just(edges), inner))
        .prop_map(|((a, f, d), names, edges, first)| {
            let mut text = String::from("activity Flow {\n  initial i;\n  final f;\n");
            for k in 0..a {
                text.push_str(&format!("  action A{k};\n"));
            }
            for k in 0..f {
                text.push_str(&format!("  forkjoin F{k};\n"));
            }
            for k in 0..d {
                text.push_str(&format!("  decisionmerge D{k};\n"));
            }
            text.push_str(&format!("  i -> {};\n", names[first]));
            for (s, t) in edges {
                text.push_str(&format!("  {} -> {};\n", names[s], names[t]));
            }
            text.push_str("}\n");
            parse(&text).unwrap_or_else(|d| panic!("{text}\n{d:?}"))
        })
}

fn config(ad: &ActivityDiagram, lens: &[usize], flags: &[bool]) -> Configuration {
    let mut c = Configuration::empty(ad);
    for t in ad.transition_ids() {
        c.buffers[t.0] = vec![representative(ad, t); lens[t.0 % lens.len()]];
    }
    for n in ad.nodes_of_kind(NodeKind::Action) {
        c.exec[n.0] = flags[n.0 % flags.len()];
    }
    c
}

fn modes() -> impl Strategy<Value = (StepMode, ActionMode)> {
    (
        prop_oneof![Just(StepMode::Interleaving), Just(StepMode::Concurrent)],
        prop_oneof![Just(ActionMode::Instant), Just(ActionMode::TwoPhase)],
    )
}

fn token(i: i64) -> Token {
    Token::data("T", Value::Int(i))
}

// ------------------------------------------------------------ syntax

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_then_parse_is_identity(ad in any_diagram()) {
        let text = print(&ad);
        let back = parse(&text).map_err(|d| TestCaseError::fail(format!("{text}\n{d:?}")))?;
        prop_assert_eq!(&back, &ad);
        prop_assert_eq!(print(&back), text);
    }

    #[test]
    fn in_and_out_transitions_partition(ad in any_diagram()) {
        let mut ins = vec![0usize; ad.transitions().len()];
        let mut outs = vec![0usize; ad.transitions().len()];
        for n in ad.node_ids() {
            for &t in ad.incoming(n) {
                prop_assert_eq!(ad.dst_id(t), n);
                ins[t.0] += 1;
            }
            for &t in ad.outgoing(n) {
                prop_assert_eq!(ad.src_id(t), n);
                outs[t.0] += 1;
            }
        }
        prop_assert!(ins.iter().chain(&outs).all(|&k| k == 1));
    }

    #[test]
    fn validation_is_pure(ad in any_diagram()) {
        let before = ad.clone();
        for profile in [Profile::General, Profile::Variant1] {
            let a = validate(&ad, profile);
            prop_assert_eq!(validate(&ad, profile), a);
        }
        prop_assert_eq!(ad, before);
    }
}

// ------------------------------------------------------------ buffers

proptest! {
    #[test]
    fn fifo_law(before in prop::collection::vec(0i64..4, 0..5), k in 0usize..5, prod in prop::collection::vec(4i64..8, 0..3)) {
        let k = k.min(before.len());
        let before: Vec<Token> = before.into_iter().map(token).collect();
        let prod: Vec<Token> = prod.into_iter().map(token).collect();
        let after: Vec<Token> = before[k..].iter().chain(&prod).cloned().collect();
        let tr = fifo_decompose(&before, &after, Some((k, prod.len())));
        prop_assert_eq!(&tr.cons, &before[..k].to_vec());
        prop_assert_eq!(&tr.prod, &prod);
        prop_assert!(buffer_law_holds(&before, &after, &tr));
        // Without a hint the decomposition still explains the change.
        let minimal = fifo_decompose(&before, &after, None);
        prop_assert!(buffer_law_holds(&before, &after, &minimal));
        prop_assert_eq!(before.len() + minimal.prod.len(), after.len() + minimal.cons.len());
    }
}

// ------------------------------------------------------------ token game

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn successors_conserve_tokens(
        ad in flow_diagram(),
        lens in prop::collection::vec(0usize..3, 1..6),
        flags in prop::collection::vec(any::<bool>(), 1..4),
        (mode, actions) in modes(),
    ) {
        let flags: Vec<bool> = if actions == ActionMode::Instant { vec![false] } else { flags };
        let c = config(&ad, &lens, &flags);
        for (choices, next) in successors(&ad, &c, mode, &Underspecified, actions) {
            let nt = ad.transitions().len();
            let (mut gone, mut added) = (vec![0usize; nt], vec![0usize; nt]);
            let mut movers = BTreeSet::new();
            for ch in &choices {
                prop_assert!(movers.insert(ch.node.clone()), "node chose twice");
                let (cons, prod) = ch.transfers(&ad).unwrap();
                let n = ad.node_id(&ch.node).unwrap();
                match &ch.kind {
                    ChoiceKind::ForkJoin => {
                        prop_assert_eq!(cons.len(), ad.incoming(n).len());
                        prop_assert_eq!(prod.len(), ad.outgoing(n).len());
                    }
                    ChoiceKind::Decision { .. } => prop_assert!(cons.len() == 1 && prod.len() == 1),
                    _ => {}
                }
                for t in cons { gone[t.0] += 1; }
                for t in prod { added[t.0] += 1; }
            }
            for t in 0..nt {
                let (before, after) = (&c.buffers[t], &next.buffers[t]);
                prop_assert_eq!(after.len() + gone[t], before.len() + added[t]);
                // Consumption takes from the front; survivors keep their order.
                prop_assert_eq!(&after[..before.len() - gone[t]], &before[gone[t]..]);
            }
            if mode == StepMode::Interleaving {
                prop_assert_eq!(choices.len(), 1);
            }
            if actions == ActionMode::Instant {
                prop_assert!(next.exec.iter().all(|&e| !e));
                prop_assert!(choices.iter().all(|ch| !matches!(ch.kind, ChoiceKind::Start | ChoiceKind::Finish)));
            } else {
                prop_assert!(choices.iter().all(|ch| ch.kind != ChoiceKind::Instant));
            }
        }
    }

    #[test]
    fn interleaving_steps_are_concurrent_steps(
        ad in flow_diagram(),
        lens in prop::collection::vec(0usize..3, 1..6),
        actions in prop_oneof![Just(ActionMode::Instant), Just(ActionMode::TwoPhase)],
    ) {
        let c = config(&ad, &lens, &[false]);
        let one: BTreeSet<String> = successors(&ad, &c, StepMode::Interleaving, &Underspecified, actions)
            .into_iter().map(|(_, n)| n.describe(&ad)).collect();
        let many: BTreeSet<String> = successors(&ad, &c, StepMode::Concurrent, &Underspecified, actions)
            .into_iter().map(|(_, n)| n.describe(&ad)).collect();
        prop_assert!(one.is_subset(&many));
    }

    #[test]
    fn generated_runs_are_accepted(ad in flow_diagram(), seed in any::<u64>(), (mode, actions) in modes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = initial_config(&ad).unwrap();
        let run = random_run(&ad, init, mode, &Underspecified, actions, 25, &mut rng);
        let (b, trace) = as_binding(&ad, &Underspecified, &run).unwrap();
        let v = satisfies(&trace, &b).unwrap();
        prop_assert!(v.accepted(), "{}", v);
    }

    #[test]
    fn every_node_stutters_on_an_unchanged_state(
        ad in flow_diagram(),
        lens in prop::collection::vec(0usize..3, 1..6),
        flags in prop::collection::vec(any::<bool>(), 1..4),
    ) {
        let c = config(&ad, &lens, &flags);
        let s = lift(&ad, &Run::single(c)).unwrap().states.remove(0);
        let b = token_binding(&ad, &Underspecified);
        for n in ad.node_ids() {
            prop_assert!(stutter(&b, n, &s, &s).unwrap());
        }
    }

    #[test]
    fn instant_and_fork_join_steps_coincide(
        ad in flow_diagram(),
        cons in prop::collection::vec(0usize..3, 1..6),
        prod in prop::collection::vec(0usize..3, 1..6),
    ) {
        let nt = ad.transitions().len();
        let nn = ad.nodes().len();
        let facts = StepFacts {
            exec_pre: vec![false; nn],
            exec_post: vec![false; nn],
            cons: (0..nt).map(|t| cons[t % cons.len()]).collect(),
            prod: (0..nt).map(|t| prod[t % prod.len()]).collect(),
        };
        let view = StepView { ad: &ad, facts: &facts, guard_post: |_| Ok(true) };
        for n in ad.node_ids() {
            prop_assert_eq!(view.step_inst(n), view.step_fork_join(n));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Once a prefix is violated, no continuation repairs it.
    #[test]
    fn violation_survives_extension(seed in any::<u64>(), kind in 0..MUTATIONS.len(), extra in 1usize..4, (mode, actions) in modes()) {
        let ad = corpus::grade_thesis();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = random_run(&ad, initial_config(&ad).unwrap(), mode, &Underspecified, actions, 60, &mut rng);
        let Some(mut bad) = mutate(&ad, &run, MUTATIONS[kind], &mut rng) else {
            return Ok(());
        };
        let (b, trace) = as_binding(&ad, &Underspecified, &bad).unwrap();
        let v = satisfies(&trace, &b).unwrap();
        prop_assert!(matches!(v, Verdict::Violated { .. }), "{}", v);
        for k in 0..extra {
            let c = run.configs[(seed as usize + k) % run.configs.len()].clone();
            bad.configs.push(c);
            bad.steps.push(vec![]);
        }
        let (b, longer) = as_binding(&ad, &Underspecified, &bad).unwrap();
        prop_assert_eq!(satisfies(&longer, &b).unwrap(), v);
    }
}

// ------------------------------------------------------------ variants

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pin_controller_ignores_delivery_order(pins in prop::collection::btree_set("[a-z]{1,4}", 1..5), seed in any::<u64>()) {
        let pins: Vec<String> = pins.into_iter().collect();
        let mut order = pins.clone();
        use rand::seq::SliceRandom;
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut ctl = PinController::new(pins.iter().cloned());
        for (k, p) in order.iter().enumerate() {
            let fired = ctl.deliver(p, Value::Str(p.to_uppercase())).unwrap();
            if k + 1 < order.len() {
                prop_assert!(fired.is_none());
            } else {
                let want: BTreeMap<String, Value> = pins.iter().map(|p| (p.clone(), Value::Str(p.to_uppercase()))).collect();
                prop_assert_eq!(fired, Some(want));
            }
        }
    }

    #[test]
    fn atomic_runs_are_deterministic_and_single_token(n in 0i64..12) {
        let ad = corpus::fac();
        let inst = AtomicInstance::new(&ad);
        let store: Attributes = [("n".to_string(), Value::Int(n))].into_iter().collect();
        let a = run_method(&ad, &inst, &store, &Attributes::new(), 1000).unwrap();
        let b = run_method(&ad, &inst, &store, &Attributes::new(), 1000).unwrap();
        prop_assert_eq!(&a.trace, &b.trace);
        let bind = AtomicBinding { ad: &ad, inst: &inst };
        let pcs: BTreeSet<_> = inst.pc_map.values().cloned().collect();
        for s in &a.trace.states {
            let tokens: usize = ad.transition_ids().map(|t| bind.buf_state(t, s).unwrap().len()).sum();
            prop_assert_eq!(tokens, 1);
            let top = s.top_frame(&inst.callee, &inst.thread).expect("the method is running");
            prop_assert!(pcs.contains(&top.pc));
            prop_assert_eq!(top.mname.as_str(), inst.meth.as_str());
        }
    }

    #[test]
    fn method_simulations_conform(seed in any::<u64>(), sub_variant in any::<bool>(), command in any::<bool>()) {
        let ad = corpus::grade_thesis();
        let caller = if command { CallerMode::Command } else { CallerMode::Role };
        let sc = Scenario { sub_variant, caller, ..Scenario::seeded(seed) };
        let inst = sc.instance(&ad);
        let sim = simulate(&ad, &inst, &sc, 1_000).unwrap();
        prop_assert_eq!(sim.outcome, Outcome::Final);
        let b = MethodsBinding { ad: &ad, inst: &inst };
        prop_assert_eq!(satisfies(&sim.trace, &b).unwrap(), Verdict::Satisfied { initial: 0 });
        prop_assert_eq!(check_two_phase(&b, &sim.trace).unwrap(), None);
        if sub_variant {
            prop_assert!(check_role_frames(&ad, &inst, &inst.universe(&ad), &sim.trace).is_ok());
        }
        for w in sim.trace.states.windows(2) {
            for t in ad.transition_ids() {
                prop_assert!(check_buffer_law(&b, t, &w[0], &w[1]).unwrap());
            }
        }
    }
}
