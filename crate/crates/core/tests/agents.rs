mod common;

use std::collections::HashMap;

use common::node;
use pathwise::agents::*;
use pathwise::graph::ParentMeta;
use pathwise::llm::Role;
use pathwise_problems::{Framework, Problem};
use pathwise_sandbox::{sandbox_check, Fitness};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROLES: [(Role, &str); 5] = [
    (Role::Init, "init"),
    (Role::Policy, "policy"),
    (Role::WorldModel, "world_model"),
    (Role::PolicyCritic, "policy_critic"),
    (Role::WmCritic, "wm_critic"),
];

fn golden_values() -> Vec<(String, String)> {
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden/values.json")).unwrap();
    let map: HashMap<String, String> = serde_json::from_str(&text).unwrap();
    map.into_iter().collect()
}

#[test]
fn templates_match_golden_fixtures() {
    let owned = golden_values();
    let values: Vec<(&str, &str)> = owned.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    for (role, name) in ROLES {
        let t = template(role);
        let rendered =
            format!("=== system\n{}=== user\n{}", render(t.system, &values).unwrap(), render(t.user, &values).unwrap());
        let golden =
            std::fs::read_to_string(format!("{}/tests/fixtures/golden/{name}.txt", env!("CARGO_MANIFEST_DIR")))
                .unwrap();
        assert_eq!(rendered, golden, "template {name}");
    }
}

#[test]
fn render_is_single_pass_and_strict() {
    assert_eq!(render("a {x} b", &[("x", "{y}")]).unwrap(), "a {y} b");
    assert_eq!(render("{x}{x}", &[("x", "1")]).unwrap(), "11");
    assert_eq!(render("a {missing}", &[]).unwrap_err(), AgentError::MissingPlaceholder("missing".into()));
    assert_eq!(render("json {\"a\": 1} {} ok", &[]).unwrap(), "json {\"a\": 1} {} ok");
}

#[test]
fn phrase_inventories() {
    assert_eq!(phrases(Role::Policy).unwrap().len(), 18);
    assert_eq!(phrases(Role::WorldModel).unwrap().len(), 9);
    assert_eq!(phrases(Role::Policy).unwrap()[0], "Favor unusual parent combinations.");
    assert!(phrases(Role::Init).is_err());
}

fn ctx() -> TaskContext {
    let mut c = TaskContext::new(Framework::Constructive, Problem::Tsp, "rhai").unwrap();
    c.problem_description = "PROBLEM".into();
    c.function_description = "FUNCTION".into();
    c
}

#[test]
fn node_block_layout() {
    let mut n = node("entail_0_1", -6.5);
    n.kappa = "Blend the two.".into();
    n.pm = vec![
        ParentMeta { description: "greedy".into(), fitness: Fitness::new(-7.0) },
        ParentMeta { description: "broken".into(), fitness: Fitness::SENTINEL },
    ];
    let expected = "ID: entail_0_1\nDescription: desc entail_0_1\nHeuristics used to derive this candidate:\n\
- greedy (objective value: 7)\n- broken (objective value: inf)\nDerivation logic:\nBlend the two.\nCode:\n// entail_0_1\nObjective value: 6.5";
    assert_eq!(node_block(&n), expected);
    let root = node("init_3", 0.0);
    assert!(node_block(&root).contains("candidate:\nNone\nDerivation logic:\nNone\n"));
    assert!(node_block(&root).ends_with("Objective value: 0"));
}

#[test]
fn policy_prompt_fidelity() {
    let nodes = [node("b", -2.0), node("a", -1.0), node("d", -4.0), node("c", -3.0)];
    let view: Vec<_> = nodes.iter().collect();
    let p = policy_prompt(&ctx(), &view, "", None).unwrap();
    // Oracle: blocks joined by blank lines, in view order.
    let blocks = nodes.iter().map(node_block).collect::<Vec<_>>().join("\n\n");
    let expected = template(Role::Policy)
        .user
        .replace("{problem_description}", "PROBLEM")
        .replace("{function_description}", "FUNCTION")
        .replace("{k}", "4")
        .replace("{heuristics}", &blocks)
        .replace("{reflection}", "")
        .replace("{exploratory_phrase}", "");
    assert_eq!(p.user, expected);
    assert!(p.user.contains("Reflection:\n\n\nTask:"));
    let order: Vec<usize> =
        ["ID: b\n", "ID: a\n", "ID: d\n", "ID: c\n"].iter().map(|s| p.user.find(s).unwrap()).collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));

    let phrase = phrases(Role::Policy).unwrap()[4];
    let p = policy_prompt(&ctx(), &view, "hint", Some(phrase)).unwrap();
    assert_eq!(p.user.matches(phrase).count(), 1);
    assert_eq!(p.system, template(Role::Policy).system);
}

#[test]
fn world_model_prompt_shows_parent_code() {
    let a = node("a", -1.5);
    let p = world_model_prompt(&ctx(), &[&a], "Do X.", "", Some("Be bold.")).unwrap();
    assert!(p.user.contains("ID: a\ndesc a\n```rhai\n// a\n```\nObjective value: 1.5"));
    assert!(p.user.contains("Directive:\nDo X.\nBe bold.\n"));
    assert!(p.user.contains("improved function select_next_node_v2 that"));
    assert!(p.user.contains("with Rhai code block:```rhai ...```"));
}

#[test]
fn init_prompt_uses_full_signature() {
    let p = init_prompt(&ctx()).unwrap();
    assert!(p.user.starts_with("Write a select_next_node function for PROBLEM\n\nFUNCTION\n"));
    assert!(p.user.contains(
        "Function signature:\nfn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix)\n"
    ));
}

#[test]
fn every_pair_has_a_context() {
    for sig in pathwise_problems::frameworks::signatures() {
        let c = TaskContext::new(sig.framework, sig.problem, "rhai").unwrap();
        assert!(!c.problem_description.contains("unsupported"));
        assert!(c.function_description.contains("Rhai"));
        init_prompt(&c).unwrap();
    }
}

fn valid() -> Vec<String> {
    (1..=6).map(|k| k.to_string()).collect()
}

#[test]
fn policy_reply_examples() {
    let p = parse_policy_reply("PARENTS: [2, 5]\nDIRECTIVE: Merge distance decay with capacity lookahead.", &valid())
        .unwrap();
    assert_eq!(p.parents, vec!["2", "5"]);
    assert_eq!(p.directive, "Merge distance decay with capacity lookahead.");
    assert_eq!(parse_policy_reply("PARENTS: []\nDIRECTIVE: x", &valid()).unwrap_err(), PolicyParseError::EmptyParents);
    assert_eq!(
        parse_policy_reply("PARENTS: [9]\nDIRECTIVE: x", &valid()).unwrap_err(),
        PolicyParseError::UnknownId("9".into())
    );
    assert_eq!(parse_policy_reply("I pick 2 and 5.", &valid()).unwrap_err(), PolicyParseError::Malformed("PARENTS"));
    assert_eq!(parse_policy_reply("PARENTS: [2]", &valid()).unwrap_err(), PolicyParseError::Malformed("DIRECTIVE"));
    assert_eq!(
        parse_policy_reply("PARENTS: [2]\nDIRECTIVE:   ", &valid()).unwrap_err(),
        PolicyParseError::Malformed("DIRECTIVE")
    );
}

#[test]
fn policy_reply_tolerates_formatting() {
    let p =
        parse_policy_reply("**PARENTS:** [\"3\", '1', 3]\n**DIRECTIVE:** Combine\n  both ideas.\n", &valid()).unwrap();
    assert_eq!(p.parents, vec!["3", "1"]);
    assert_eq!(p.directive, "Combine both ideas.");
    let ids = vec!["init_2".to_string(), "entail_0_1".to_string()];
    let p = parse_policy_reply("parents: entail_0_1, init_2\ndirective: swap", &ids).unwrap();
    assert_eq!(p.parents, vec!["entail_0_1", "init_2"]);
}

const SOURCE: &str = "fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {\n    unvisited_nodes.map(|j| -distance_matrix[current_node][j])\n}\n";

#[test]
fn code_reply_examples() {
    let text = format!(
        "```Description: Greedy `nearest` choice.```\n\n```rhai\n{SOURCE}```\n\n```rhai\nfn other() {{ 1 }}\n```\n"
    );
    let r = parse_code_reply(&text).unwrap();
    assert_eq!(r.source, SOURCE);
    assert_eq!(r.description.as_deref(), Some("Greedy nearest choice."));
    let report = sandbox_check(&r.source, None);
    assert!(report.clean(), "{}", report.summary());

    assert_eq!(parse_code_reply("Description: x\nno code").unwrap_err(), CodeParseError::MissingFence);
    assert_eq!(parse_code_reply("```rhai\n\n```").unwrap_err(), CodeParseError::EmptyCode);
    let r = parse_code_reply(&format!("```\n{SOURCE}```")).unwrap();
    assert_eq!(r.description, None);

    let init =
        format!("```rhai\n{SOURCE}```\nDescription: d\n\nDerivation Rationale: Short hops first\nkeep tours tight.\n");
    let r = parse_code_reply(&init).unwrap();
    assert_eq!(r.description.as_deref(), Some("d"));
    assert_eq!(r.rationale.as_deref(), Some("Short hops first keep tours tight."));
}

#[test]
fn entry_normalization() {
    let s = "fn heuristics_v2(d) { helper(d) }\nfn heuristics_vx(d) { d }";
    assert_eq!(normalize_entry(s, "heuristics"), "fn heuristics(d) { helper(d) }\nfn heuristics_vx(d) { d }");
}

#[test]
fn action_reward_examples() {
    let f = Fitness::new;
    assert!((action_reward(&[f(-6.2), f(-6.4)]) - -6.3).abs() < 1e-12);
    assert_eq!(action_reward(&[f(-5.0)]), -5.0);
    let mixed = action_reward(&[Fitness::SENTINEL, f(-5.0)]);
    assert!(mixed.is_finite());
    assert!(mixed < action_reward(&[f(-1e300), f(-1e300)]));
    assert_eq!(action_reward(&[Fitness::SENTINEL, Fitness::SENTINEL]), f64::MIN);
}

#[test]
fn critic_order_examples() {
    assert_eq!(critic_order(&[-7.0, -5.0]), vec![1, 0]);
    assert_eq!(critic_order(&[-5.0, -5.0, -1.0]), vec![2, 0, 1]);
}

fn summary(parents: &[&str], fits: &[f64]) -> ActionSummary {
    ActionSummary {
        parents: parents.iter().map(|s| s.to_string()).collect(),
        directive: format!("directive {}", parents.join("+")),
        rollouts: fits
            .iter()
            .enumerate()
            .map(|(j, &x)| RolloutSummary { description: format!("r{j}"), fitness: Fitness::new(x) })
            .collect(),
    }
}

#[test]
fn policy_critic_lists_actions_best_first() {
    let actions = vec![summary(&["a"], &[-7.0, -7.0]), summary(&["b", "c"], &[-5.0, -5.0])];
    let view_nodes = [node("a", -1.0)];
    let view: Vec<_> = view_nodes.iter().collect();
    let p = policy_critic_prompt(&ctx(), &view, &actions).unwrap();
    let expected = "Action 0\nParent IDs: [b, c]\nDirective:  directive b+c\nRollouts:\n  rollout_0: r0 (objective value: 5)\n  rollout_1: r1 (objective value: 5)\n\n\
Action 1\nParent IDs: [a]\nDirective:  directive a\nRollouts:\n  rollout_0: r0 (objective value: 7)\n  rollout_1: r1 (objective value: 7)";
    assert!(p.user.contains(expected), "{}", p.user);
}

#[test]
fn wm_critic_prompt_shows_failed_code() {
    let worse = CriticSample { description: "bad", fitness: Fitness::SENTINEL, source: "garbage(" };
    let better = CriticSample { description: "good", fitness: Fitness::new(-6.0), source: SOURCE };
    let p = wm_critic_prompt(&ctx(), worse, better).unwrap();
    assert!(p.user.contains("Worse code:\nDescription: bad\nObjective value: inf\nCode:\n```rhai\ngarbage(\n```"));
    assert!(p.user.starts_with("Below are two select_next_node functions for PROBLEM"));
}

#[test]
fn best_worst_fixture() {
    // (0,0) -6, (0,1) -5, (1,0) -7, (1,1) -6.5 flattened in (i, j) order.
    let f: Vec<Fitness> = [-6.0, -5.0, -7.0, -6.5].into_iter().map(Fitness::new).collect();
    assert_eq!(best_and_worst(&f), Some((1, 2)));
    assert_eq!(best_and_worst(&f[..2]), Some((1, 0)));
    let same = vec![Fitness::new(-1.0); 3];
    assert_eq!(best_and_worst(&same), Some((0, 1)));
    assert_eq!(best_and_worst(&[]), None);
}

proptest! {
    #[test]
    fn best_worst_matches_scan(vals in proptest::collection::vec(prop_oneof![(-20i32..0).prop_map(f64::from), Just(f64::NEG_INFINITY)], 2..10)) {
        let f: Vec<Fitness> = vals.iter().map(|&v| Fitness::new(v)).collect();
        let (b, w) = best_and_worst(&f).unwrap();
        let key = |v: f64| if v.is_finite() { v } else { f64::MIN };
        let max = vals.iter().copied().map(key).fold(f64::MIN, f64::max);
        let min = vals.iter().copied().map(key).fold(f64::MAX, f64::min);
        let first_max = vals.iter().position(|&v| key(v) == max).unwrap();
        prop_assert_eq!(b, first_max);
        if max != min {
            prop_assert_eq!(w, vals.iter().position(|&v| key(v) == min).unwrap());
        } else {
            prop_assert_ne!(w, b);
        }
    }

    #[test]
    fn critic_order_is_descending(rewards in proptest::collection::vec(-50i32..0, 1..8)) {
        let r: Vec<f64> = rewards.iter().map(|&x| f64::from(x)).collect();
        let order = critic_order(&r);
        for w in order.windows(2) {
            prop_assert!(r[w[0]] > r[w[1]] || (r[w[0]] == r[w[1]] && w[0] < w[1]));
        }
    }
}

#[test]
fn shuffle_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let items = [0u8, 1, 2, 3];
    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    let draws = 10_000;
    for _ in 0..draws {
        *counts.entry(shuffle_state(&items, &mut rng)).or_default() += 1;
    }
    assert_eq!(counts.len(), 24);
    let expected = draws as f64 / 24.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 23 degrees of freedom: the 0.999 quantile is 49.7.
    assert!(chi2 < 49.7, "chi2 {chi2}");
    for &c in counts.values() {
        assert!((c as f64 / draws as f64 - 1.0 / 24.0).abs() < 0.01);
    }
    assert_eq!(shuffle_state(&["x"], &mut rng), vec!["x"]);
    let a = shuffle_state(&items, &mut ChaCha8Rng::seed_from_u64(3));
    let b = shuffle_state(&items, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(a, b);
}

#[test]
fn phrase_sampling_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        assert_eq!(maybe_sample_phrase(Role::Policy, 0.0, &mut rng).unwrap(), None);
        let p = maybe_sample_phrase(Role::WorldModel, 1.0, &mut rng).unwrap().unwrap();
        assert!(phrases(Role::WorldModel).unwrap().contains(&p));
    }
    let hits = (0..10_000).filter(|_| maybe_sample_phrase(Role::Policy, 0.5, &mut rng).unwrap().is_some()).count();
    assert!((hits as f64 / 1e4 - 0.5).abs() < 0.02, "{hits}");
    assert!(maybe_sample_phrase(Role::PolicyCritic, 0.5, &mut rng).is_err());
    assert!(maybe_sample_phrase(Role::Policy, 1.5, &mut rng).is_err());
    let _: f64 = rng.gen();
}

#[test]
fn reflection_word_warning() {
    let long = vec!["word"; 80].join(" ");
    let (text, warning) = parse_reflection(&format!("  {long}\n"), POLICY_WORD_LIMIT, Role::PolicyCritic);
    assert_eq!(text, long);
    assert!(warning.unwrap().contains("80 words"));
    assert!(parse_reflection("short hint", WM_WORD_LIMIT, Role::WmCritic).1.is_none());
}
