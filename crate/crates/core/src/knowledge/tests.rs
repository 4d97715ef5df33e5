use super::*;
use crate::llm::InstructionGroup;
use crate::ui::testing::{element, state};
use crate::ui::Affordances;
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

const APP: &str = "com.example.app";

fn knowledge() -> Knowledge {
    Knowledge::new(APP, KnowledgeConfig::default())
}

fn calculator(id: &str) -> UiState {
    let mut elements: Vec<UiElement> = (0..10)
        .map(|i| element(i, "Button", &format!("digit_{i}"), &i.to_string(), Affordances::TOUCH))
        .collect();
    elements.push(element(10, "Button", "op_add", "+", Affordances::TOUCH));
    elements.push(element(11, "Button", "equals", "=", Affordances::TOUCH));
    state(id, "Calculator", elements)
}

fn touch(s: &UiState, element_id: u32) -> UiAction {
    UiAction::on(s, element_id, ActionType::Touch)
}

/// Grouper answering from a fixed list, one instruction per call.
struct Fixed(Vec<GroupingInstruction>);

impl ElementGrouper for Fixed {
    fn group_elements(&mut self, _state: &UiState, _candidates: &[u32]) -> GroupingInstruction {
        if self.0.is_empty() {
            GroupingInstruction::default()
        } else {
            self.0.remove(0)
        }
    }
}

#[test]
fn classify_on_empty_knowledge() {
    assert!(knowledge().classify_state(&calculator("u1")).is_none());
}

#[test]
fn classify_merges_list_text_changes() {
    let mut k = knowledge();
    let list = |id: &str, names: &[&str]| {
        let els = names
            .iter()
            .enumerate()
            .map(|(i, n)| element(i as u32, "TextView", "contact", n, Affordances::TOUCH))
            .collect();
        state(id, "Contacts", els)
    };
    let first = list("u1", &["Alice", "Bob"]);
    k.update(None, &first, &mut SingletonGrouper).unwrap();
    let again = list("u2", &["Carol", "Dave", "Eve"]);
    assert_eq!(k.classify_state(&again).map(|s| s.id), Some(AbsStateId(0)));
    // classification is read-only
    assert_eq!(k.state(AbsStateId(0)).member_state_ids, ["u1"]);
}

#[test]
fn disjoint_screens_stay_apart() {
    let a = state("u1", "Main", vec![element(0, "Button", "x", "", Affordances::TOUCH)]);
    let b = state("u2", "Main", vec![element(0, "Button", "y", "", Affordances::TOUCH)]);
    let mut ka = knowledge();
    ka.update(None, &a, &mut SingletonGrouper).unwrap();
    assert!(ka.classify_state(&b).is_none());
    let mut kb = knowledge();
    kb.update(None, &b, &mut SingletonGrouper).unwrap();
    assert!(kb.classify_state(&a).is_none());
    assert_eq!(ka.classify_state(&a).unwrap().id, AbsStateId(0));
}

#[test]
fn digit_buttons_become_one_action() {
    let mut k = knowledge();
    let s = calculator("u1");
    let instr = GroupingInstruction {
        groups: vec![InstructionGroup {
            members: (0..10).collect(),
            function: "enter a digit".into(),
        }],
    };
    let id = k.register_abstract_state(&s, &instr).unwrap();
    let st = k.state(id);
    assert_eq!(st.actions.len(), 3);
    let digits = k.action(st.actions[0]);
    assert_eq!(digits.action_type, ActionType::Touch);
    assert_eq!(k.group(digits.group_id).slots.len(), 10);
    assert_eq!(digits.function, "enter a digit");
    assert!(k.unexplored_actions(Some(id)).iter().all(|a| a.flag.is_unexplored()));
}

#[test]
fn ungrouped_become_singletons() {
    let mut k = knowledge();
    let s = state("u1", "M", (0..3).map(|i| element(i, "Button", "", "", Affordances::TOUCH)).collect());
    let id = k.register_abstract_state(&s, &GroupingInstruction::default()).unwrap();
    assert_eq!(k.state(id).actions.len(), 3);
    for a in k.unexplored_actions(Some(id)) {
        assert_eq!(k.group(a.group_id).slots.len(), 1);
    }
}

#[test]
fn editable_field_gets_one_input_action() {
    let mut k = knowledge();
    let aff = Affordances {
        editable: true,
        touchable: true,
        ..Default::default()
    };
    let s = state("u1", "Form", vec![element(0, "EditText", "email", "", aff)]);
    let id = k.register_abstract_state(&s, &GroupingInstruction::default()).unwrap();
    let acts = k.unexplored_actions(Some(id));
    assert_eq!(acts.len(), 1);
    assert_eq!(acts[0].action_type, ActionType::Input);
    assert_eq!(acts[0].flag.names(), ["unexplored"]);
}

#[test]
fn mixed_group_split_by_action_kinds() {
    let mut k = knowledge();
    let lt = Affordances {
        touchable: true,
        long_touchable: true,
        ..Default::default()
    };
    let s = state("u1", "M", vec![
        element(0, "Button", "a", "", Affordances::TOUCH),
        element(1, "Button", "a", "", lt),
        element(2, "Button", "a", "", Affordances::TOUCH),
    ]);
    let instr = GroupingInstruction {
        groups: vec![InstructionGroup {
            members: vec![0, 1, 2],
            function: "f".into(),
        }],
    };
    let id = k.register_abstract_state(&s, &instr).unwrap();
    // {0, 2} touch; {1} touch + long touch
    assert_eq!(k.state(id).groups.len(), 2);
    assert_eq!(k.state(id).actions.len(), 3);
    k.check_invariants().unwrap();
}

#[test]
fn duplicate_registration_conflicts() {
    let mut k = knowledge();
    k.register_abstract_state(&calculator("u1"), &GroupingInstruction::default()).unwrap();
    assert!(matches!(
        k.register_abstract_state(&calculator("u2"), &GroupingInstruction::default()),
        Err(KnowledgeError::DuplicateSignature(AbsStateId(0)))
    ));
}

#[test]
fn initialization() {
    let mut k = knowledge();
    let s = calculator("u1");
    let out = k.update(None, &s, &mut SingletonGrouper).unwrap();
    assert!(out.new_state);
    assert_eq!(k.states().len(), 1);
    assert_eq!(k.graph().node_count(), 1);
    assert_eq!(k.trace().len(), 1);
    assert_eq!(k.unexplored_actions(None).len(), 12);
    assert_eq!(k.initial_state(), Some(AbsStateId(0)));
}

#[test]
fn checkbox_toggle_is_ineffective_self_loop() {
    let mut k = knowledge();
    let cb = element(0, "CheckBox", "wifi", "Wi-Fi", Affordances::TOUCH);
    let s1 = state("u1", "Settings", vec![cb.clone()]);
    let mut checked = cb;
    checked.checked = true;
    let s2 = state("u2", "Settings", vec![checked]);
    k.update(None, &s1, &mut SingletonGrouper).unwrap();
    let out = k.update(Some((&s1, &touch(&s1, 0))), &s2, &mut SingletonGrouper).unwrap();
    assert!(out.ineffective);
    let a = k.action(out.action.unwrap());
    assert_eq!(a.flag.names(), ["explored", "ineffective"]);
    let edge = out.edge.unwrap();
    assert_eq!(edge.src, edge.dst);
    assert!(k.graph().contains_edge(&edge));
}

#[test]
fn unmatched_action_is_consistency_error() {
    let mut k = knowledge();
    let s1 = calculator("u1");
    k.update(None, &s1, &mut SingletonGrouper).unwrap();
    let bogus = touch(&s1, 99);
    let s2 = calculator("u2");
    assert!(matches!(
        k.update(Some((&s1, &bogus)), &s2, &mut SingletonGrouper),
        Err(KnowledgeError::Consistency(_))
    ));
    // nothing recorded
    assert_eq!(k.trace().len(), 1);
    let never_seen = calculator("u77");
    assert!(matches!(
        k.update(Some((&never_seen, &touch(&never_seen, 0))), &s2, &mut SingletonGrouper),
        Err(KnowledgeError::Consistency(_))
    ));
}

#[test]
fn unexplored_across_states() {
    let mut k = knowledge();
    let a = state("u1", "A", vec![element(0, "Button", "go_b", "", Affordances::TOUCH)]);
    let b = state("u2", "B", vec![element(0, "Button", "go_c", "", Affordances::TOUCH)]);
    let c = state("u3", "C", vec![element(0, "Button", "go_a", "", Affordances::TOUCH)]);
    k.update(None, &a, &mut SingletonGrouper).unwrap();
    k.update(Some((&a, &touch(&a, 0))), &b, &mut SingletonGrouper).unwrap();
    k.update(Some((&b, &touch(&b, 0))), &c, &mut SingletonGrouper).unwrap();
    // a0 and a1 explored, only a2 (on C) remains; explore it to return to A
    let remaining: Vec<_> = k.unexplored_actions(None).iter().map(|a| a.id).collect();
    assert_eq!(remaining, [AbsActionId(2)]);
    assert!(k.unexplored_actions(Some(AbsStateId(0))).is_empty());

    let mut k2 = knowledge();
    let wide = state("u1", "A", vec![
        element(0, "Button", "x", "", Affordances::TOUCH),
        element(1, "Button", "y", "", Affordances::TOUCH),
        element(2, "Button", "go", "", Affordances::TOUCH),
    ]);
    let other = state("u2", "B", vec![
        element(0, "Button", "p", "", Affordances::TOUCH),
        element(1, "Button", "q", "", Affordances::TOUCH),
    ]);
    k2.update(None, &wide, &mut SingletonGrouper).unwrap();
    k2.update(Some((&wide, &touch(&wide, 2))), &other, &mut SingletonGrouper).unwrap();
    // restricted to B (current): both; app-wide: a0, a1 on A plus a3, a4 on B
    assert_eq!(k2.unexplored_actions(Some(AbsStateId(1))).len(), 2);
    let all: Vec<_> = k2.unexplored_actions(None).iter().map(|a| a.id.0).collect();
    assert_eq!(all, [0, 1, 3, 4]);
    let on_a: Vec<_> = k2
        .unexplored_actions(None)
        .iter()
        .filter(|a| a.abs_state_id == AbsStateId(0))
        .map(|a| a.id.0)
        .collect();
    assert_eq!(on_a, [0, 1]);
}

#[test]
fn edge_failure_threshold() {
    let mut k = knowledge();
    let a = state("u1", "A", vec![element(0, "Button", "go", "", Affordances::TOUCH)]);
    let b = state("u2", "B", vec![element(0, "Button", "back", "", Affordances::TOUCH)]);
    k.update(None, &a, &mut SingletonGrouper).unwrap();
    let edge = k.update(Some((&a, &touch(&a, 0))), &b, &mut SingletonGrouper).unwrap().edge.unwrap();
    assert!(!k.record_edge_failure(&edge).unwrap());
    assert!(k.graph().contains_edge(&edge));
    let flag_before = k.action(edge.action).flag;
    assert!(k.record_edge_failure(&edge).unwrap());
    assert!(!k.graph().contains_edge(&edge));
    assert_eq!(k.action(edge.action).flag, flag_before);
    assert!(matches!(k.record_edge_failure(&edge), Err(KnowledgeError::EdgeNotFound(_))));

    // a removed edge is not re-added by later traversals
    let a2 = state("u3", "A", a.elements.clone());
    k.update(Some((&b, &touch(&b, 0))), &a2, &mut SingletonGrouper).unwrap();
    let b2 = state("u4", "B", b.elements.clone());
    let out = k.update(Some((&a2, &touch(&a2, 0))), &b2, &mut SingletonGrouper).unwrap();
    assert_eq!(out.edge, None);
    assert!(!k.graph().contains_edge(&edge));
}

#[test]
fn out_of_app_states_are_traced_only() {
    let mut k = knowledge();
    let a = state("u1", "A", vec![element(0, "Button", "share", "", Affordances::TOUCH)]);
    let mut outside = state("u2", "Browser", vec![element(0, "View", "web", "", Affordances::TOUCH)]);
    outside.source_app = "com.android.browser".into();
    let a2 = state("u3", "A", a.elements.clone());
    k.update(None, &a, &mut SingletonGrouper).unwrap();
    let out = k.update(Some((&a, &touch(&a, 0))), &outside, &mut SingletonGrouper).unwrap();
    assert_eq!(out.abs_state, None);
    assert_eq!(out.edge, None);
    assert_eq!(k.action(out.action.unwrap()).flag.names(), ["explored"]);
    let back = k.update(Some((&outside, &UiAction::back())), &a2, &mut SingletonGrouper).unwrap();
    assert_eq!(back.abs_state, Some(AbsStateId(0)));
    assert_eq!(back.action, None);
    assert_eq!(k.states().len(), 1);
    assert_eq!(k.trace().len(), 3);
    assert_eq!(k.graph().edge_count(), 0);
    k.check_invariants().unwrap();
}

#[test]
fn enabled_later_adds_action() {
    let mut k = knowledge();
    let mut off = element(0, "Button", "submit", "", Affordances::TOUCH);
    off.enabled = false;
    let s1 = state("u1", "Form", vec![off.clone(), element(1, "Button", "x", "", Affordances::TOUCH)]);
    k.update(None, &s1, &mut SingletonGrouper).unwrap();
    assert_eq!(k.actions().len(), 1);
    let mut on = off;
    on.enabled = true;
    let s2 = state("u2", "Form", vec![on, element(1, "Button", "x", "", Affordances::TOUCH)]);
    let out = k.update(Some((&s1, &touch(&s1, 1))), &s2, &mut SingletonGrouper).unwrap();
    assert!(!out.new_state);
    assert_eq!(k.actions().len(), 2);
    assert!(k.action(AbsActionId(1)).flag.is_unexplored());
    assert_eq!(k.match_action(&s2, &touch(&s2, 0)), Some(AbsActionId(1)));
    k.check_invariants().unwrap();
}

#[test]
fn grouped_rows_match_by_key_at_new_paths() {
    let mut k = knowledge();
    let rows = |id: &str, n: u32| {
        state(id, "Feed", (0..n).map(|i| element(i, "TextView", "row", &format!("t{i}"), Affordances::TOUCH)).collect())
    };
    let s1 = rows("u1", 3);
    let mut g = Fixed(vec![GroupingInstruction {
        groups: vec![InstructionGroup {
            members: vec![0, 1, 2],
            function: "open item".into(),
        }],
    }]);
    k.update(None, &s1, &mut g).unwrap();
    assert_eq!(k.actions().len(), 1);
    let s2 = rows("u2", 7);
    k.update(Some((&s1, &touch(&s1, 1))), &s2, &mut g).unwrap();
    assert_eq!(k.match_action(&s2, &touch(&s2, 6)), Some(AbsActionId(0)));
    assert_eq!(k.actions().len(), 1);
}

fn linear3() -> (Knowledge, Vec<UiState>) {
    let mut k = knowledge();
    let a = state("u1", "First", vec![element(0, "Button", "next", "", Affordances::TOUCH)]);
    let b = state("u2", "Second", vec![element(0, "Button", "next", "", Affordances::TOUCH)]);
    let c = state("u3", "Third", vec![element(0, "TextView", "end", "done", Affordances::default())]);
    k.update(None, &a, &mut SingletonGrouper).unwrap();
    k.update(Some((&a, &touch(&a, 0))), &b, &mut SingletonGrouper).unwrap();
    k.update(Some((&b, &touch(&b, 0))), &c, &mut SingletonGrouper).unwrap();
    (k, vec![a, b, c])
}

#[test]
fn export_single_node() {
    let mut k = knowledge();
    k.update(None, &calculator("u1"), &mut SingletonGrouper).unwrap();
    let g = k.export_graph();
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
    assert_eq!(g.nodes[0].activity, "Calculator");
    assert_eq!(g.nodes[0].visits, 1);
}

#[test]
fn export_linear_and_deterministic() {
    let (k, _) = linear3();
    let g = k.export_graph();
    assert_eq!(g.nodes.len(), 3);
    assert_eq!(g.edges.len(), 2);
    assert_eq!(g.edges[0].src, "s0");
    assert_eq!(g.edges[0].dst, "s1");
    assert_eq!(g.edges[0].action_type, "touch");
    assert_eq!(g.edges[0].flags, ["explored"]);
    assert_eq!(g.to_json(), k.export_graph().to_json());
    let dot = g.to_dot();
    assert!(dot.contains("s0 -> s1"));
    let parsed: GraphExport = serde_json::from_str(&g.to_json()).unwrap();
    assert_eq!(parsed, g);
}

#[test]
fn document_round_trip() {
    let (k, states) = linear3();
    let doc = k.to_document();
    let back = Knowledge::from_document(&doc).unwrap();
    assert_eq!(back.to_document(), doc);
    assert_eq!(back.abstract_of("u2"), Some(AbsStateId(1)));
    assert_eq!(back.classify_state(&states[2]).unwrap().id, AbsStateId(2));
    assert!(Knowledge::from_document("{").is_err());
}

// ---------------------------------------------------------------------------
// Replay against a straight-line oracle.

/// A screen of the hand-written mock: activity and (class, resource id,
/// touchable) triples. Texts vary per observation.
type Screen = (&'static str, &'static [(&'static str, &'static str, bool)]);

const MOCK: &[Screen] = &[
    ("Home", &[("Button", "open_list", true), ("Button", "noop", true), ("TextView", "title", false)]),
    ("List", &[("TextView", "row", true), ("Button", "home", true)]),
    ("Detail", &[("Button", "back_list", true), ("CheckBox", "fav", true)]),
];

fn observe(screen: usize, n: usize) -> UiState {
    let (activity, els) = MOCK[screen];
    let elements = els
        .iter()
        .enumerate()
        .map(|(i, (class, rid, t))| {
            let aff = if *t { Affordances::TOUCH } else { Affordances::default() };
            let mut e = element(i as u32, class, rid, &format!("{rid}-{n}"), aff);
            e.checked = n.is_multiple_of(2);
            e
        })
        .collect();
    state(&format!("u{n}"), activity, elements)
}

/// (screen, element index tapped, resulting screen)
const TRACE: &[(usize, usize, usize)] = &[
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 2),
    (2, 1, 2),
    (2, 0, 1),
    (1, 1, 0),
    (0, 0, 1),
    (1, 0, 2),
    (2, 1, 2),
    (2, 0, 1),
];

type OracleAction = (usize, &'static str, &'static str);

#[derive(Debug, PartialEq)]
struct OracleResult {
    states: usize,
    flags: BTreeMap<OracleAction, (bool, bool)>,
    edges: BTreeSet<(usize, OracleAction, usize)>,
}

/// Independent replay: abstract states are numbered by first appearance
/// of (activity, sorted (class, rid, touchable) set).
fn oracle() -> OracleResult {
    let mut sigs: Vec<(String, BTreeSet<(String, String, bool)>)> = Vec::new();
    let mut abs_of = |screen: usize| -> usize {
        let (activity, els) = MOCK[screen];
        let sig = (
            activity.to_string(),
            els.iter().map(|(c, r, t)| (c.to_string(), r.to_string(), *t)).collect(),
        );
        match sigs.iter().position(|s| *s == sig) {
            Some(i) => i,
            None => {
                sigs.push(sig);
                sigs.len() - 1
            }
        }
    };
    let mut flags = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let first = abs_of(TRACE[0].0);
    let register = |abs: usize, screen: usize, flags: &mut BTreeMap<OracleAction, (bool, bool)>| {
        for (c, r, t) in MOCK[screen].1 {
            if *t {
                flags.entry((abs, *c, *r)).or_insert((false, false));
            }
        }
    };
    register(first, TRACE[0].0, &mut flags);
    for &(from, el, to) in TRACE {
        let src = abs_of(from);
        let dst = abs_of(to);
        register(dst, to, &mut flags);
        let (c, r, _) = MOCK[from].1[el];
        let f = flags.get_mut(&(src, c, r)).unwrap();
        f.0 = true;
        if src == dst {
            f.1 = true;
        }
        edges.insert((src, (src, c, r), dst));
    }
    OracleResult {
        states: sigs.len(),
        flags,
        edges,
    }
}

#[test]
fn replay_matches_oracle() {
    let mut k = knowledge();
    let mut n = 0;
    let mut current = observe(TRACE[0].0, n);
    k.update(None, &current, &mut SingletonGrouper).unwrap();
    for &(from, el, to) in TRACE {
        assert_eq!(current.activity, MOCK[from].0);
        n += 1;
        let next = observe(to, n);
        let action = touch(&current, el as u32);
        k.update(Some((&current, &action)), &next, &mut SingletonGrouper).unwrap();
        k.check_invariants().unwrap();
        current = next;
    }

    let describe = |aid: AbsActionId| -> OracleAction {
        let a = k.action(aid);
        let slot = &k.group(a.group_id).slots[0];
        let class = MOCK.iter().flat_map(|s| s.1.iter()).find(|e| e.1 == slot.key.resource_id).unwrap();
        (a.abs_state_id.index(), class.0, class.1)
    };
    let flags = k
        .actions()
        .iter()
        .map(|a| (describe(a.id), (a.flag.is_explored(), a.flag.is_ineffective())))
        .collect();
    let edges = k
        .graph()
        .edges()
        .map(|(e, _)| (e.src.index(), describe(e.action), e.dst.index()))
        .collect();
    let got = OracleResult {
        states: k.states().len(),
        flags,
        edges,
    };
    assert_eq!(got, oracle());
    assert_eq!(k.trace().len(), TRACE.len() + 1);
    assert_eq!(k.observed_state_count(), TRACE.len() + 1);
}

// ---------------------------------------------------------------------------
// Properties over random walks of the mock above.

proptest! {
    #[test]
    fn flags_monotone_and_partition_holds(walk in prop::collection::vec((0usize..3, 0usize..3), 1..40)) {
        let mut k = knowledge();
        let mut screen = 0;
        let mut current = observe(screen, 0);
        k.update(None, &current, &mut SingletonGrouper).unwrap();
        let mut ranks: BTreeMap<AbsActionId, u8> = BTreeMap::new();
        for (n, (el, to)) in walk.into_iter().enumerate() {
            let touchable: Vec<usize> = MOCK[screen].1.iter().enumerate().filter(|(_, e)| e.2).map(|(i, _)| i).collect();
            let el = touchable[el % touchable.len()];
            let next = observe(to, n + 1);
            let action = touch(&current, el as u32);
            k.update(Some((&current, &action)), &next, &mut SingletonGrouper).unwrap();
            prop_assert!(k.check_invariants().is_ok(), "{:?}", k.check_invariants());
            for a in k.actions() {
                let before = ranks.insert(a.id, a.flag.rank()).unwrap_or(0);
                prop_assert!(a.flag.rank() >= before);
            }
            // graph edges are backed by trace steps
            for (e, _) in k.graph().edges() {
                let backed = k.trace().iter().any(|t| {
                    t.from.as_ref().and_then(|f| k.abstract_of(f)) == Some(e.src)
                        && k.abstract_of(&t.to.state_id) == Some(e.dst)
                });
                prop_assert!(backed);
            }
            prop_assert!(k.states().len() <= MOCK.len());
            screen = to;
            current = next;
        }
    }
}
