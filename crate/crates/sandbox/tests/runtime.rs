use std::time::Instant;

use pathwise_problems::frameworks::{
    aco_run, constructive_solve, framework_defaults, signature_for, ClassicKnowledge, Deadline, FrameworkParams,
    Heuristic, KnowledgeInput, NearestNeighbor,
};
use pathwise_problems::instance::KpInstance;
use pathwise_problems::parallel::Execution;
use pathwise_problems::{gen_instance, Framework, Instance, InstanceData, Overrides, Problem};
use pathwise_sandbox::*;
use proptest::prelude::*;

fn tsp(count: u64, n: usize) -> Vec<Instance> {
    (0..count).map(|s| gen_instance(Problem::Tsp, n, 7 + s, &Overrides::default()).unwrap()).collect()
}

fn program(framework: Framework, problem: Problem, source: &str) -> HeuristicProgram {
    HeuristicProgram::new(source, framework, problem, "test")
}

fn cfg(framework: Framework, problem: Problem, time_limit: f64) -> EvalConfig {
    EvalConfig::new(framework_defaults(framework, problem).unwrap(), time_limit)
}

#[test]
fn check_pure_arithmetic_is_clean() {
    let sig = signature_for(Framework::Aco, Problem::Tsp).unwrap();
    let report = sandbox_check("fn helper(x) { x * 2.0 + 1 }\nfn heuristics(d) { let a = helper(3.0); d }", Some(sig));
    assert!(report.clean(), "{}", report.summary());
}

#[test]
fn check_reports_each_category() {
    let cases = [
        ("fn f() { let h = open_file(\"x.txt\"); }", Category::Io),
        ("fn f() { read_file(\"/etc/passwd\") }", Category::Io),
        ("fn f() { system(\"ls\") }", Category::Process),
        ("fn f() { http_get(\"http://x\") }", Category::Network),
        ("fn f() { eval(\"1 + 1\") }", Category::Eval),
        ("fn f() { let p = Fn(\"g\"); p.call() } fn g() { 1 }", Category::Eval),
        ("import \"os\" as os; fn f() { 1 }", Category::Import),
        ("fn f(n) { if n <= 0 { 0 } else { f(n - 1) } }", Category::Recursion),
        ("fn a(n) { b(n) } fn b(n) { c(n) } fn c(n) { a(n) }", Category::Recursion),
        ("fn f(v) { v.map(|x| f(x)) }", Category::Recursion),
    ];
    for (src, category) in cases {
        let report = sandbox_check(src, None);
        assert!(report.parse_error.is_none(), "{src}: {:?}", report.parse_error);
        assert!(report.has(category), "{src}: expected {category}, got {}", report.summary());
    }
    assert!(!sandbox_check("fn f() { fs::read(\"x\") }", None).clean());
}

#[test]
fn check_allows_script_defined_names_and_non_cyclic_calls() {
    let report = sandbox_check("fn open(x) { x + 1 } fn g(x) { open(x) * open(x) } fn h(x) { g(x) + g(1) }", None);
    assert!(report.clean(), "{}", report.summary());
}

#[test]
fn check_allows_capturing_closures_but_not_explicit_curry() {
    let closure = "fn f(v, k) { v.map(|x| x * k) }";
    assert!(sandbox_check(closure, None).clean(), "{}", sandbox_check(closure, None).summary());
    let explicit = "fn g(a, b) { a + b } fn f() { let p = Fn(\"g\"); p.curry(1) }";
    assert!(sandbox_check(explicit, None).has(Category::Eval));
}

#[test]
fn check_parse_error_has_location() {
    let report = sandbox_check("fn f(x) {\n  let y = ;\n}", None);
    let err = report.parse_error.clone().expect("parse error");
    assert_eq!(err.line, Some(2));
    assert!(err.column.is_some());
    assert!(!report.clean());
}

#[test]
fn check_signature_entry() {
    let sig = signature_for(Framework::Constructive, Problem::Tsp).unwrap();
    assert!(sandbox_check("fn other(a, b, c, d) { [] }", Some(sig)).has(Category::Signature));
    assert!(sandbox_check("fn select_next_node(a, b) { [] }", Some(sig)).has(Category::Signature));
    assert!(sandbox_check("fn select_next_node(a, b, c, d) { [] }", Some(sig)).clean());
}

#[test]
fn script_nearest_neighbor_matches_native() {
    let data = tsp(12, 40);
    let nn = classic_program(Framework::Constructive, Problem::Tsp).unwrap();
    let report = evaluate(&nn, &data, &cfg(Framework::Constructive, Problem::Tsp, 60.0));
    assert_eq!(report.status, EvalStatus::Ok, "{:?}", report.message);
    for (inst, obj) in data.iter().zip(&report.objectives) {
        let native = constructive_solve(inst, &mut NearestNeighbor, None, Deadline::none()).unwrap().objective;
        assert_eq!(native.to_bits(), obj.to_bits());
    }
    let mean: f64 = report.objectives.iter().sum::<f64>() / data.len() as f64;
    assert!((report.fitness.value().unwrap() + mean).abs() < 1e-9);
}

#[test]
fn script_aco_matches_native_knowledge() {
    for problem in [Problem::Tsp, Problem::Op, Problem::Cvrp, Problem::Mkp, Problem::BppOffline] {
        let data: Vec<Instance> =
            (0..3).map(|s| gen_instance(problem, 50, 11 + s, &Overrides::default()).unwrap()).collect();
        let mut params = framework_defaults(Framework::Aco, problem).unwrap();
        if let FrameworkParams::Aco(p) = &mut params {
            p.n_iterations = 5;
            p.n_ants = 5;
        }
        let config = EvalConfig::new(params.clone(), 60.0);
        let report = evaluate(&classic_program(Framework::Aco, problem).unwrap(), &data, &config);
        assert_eq!(report.status, EvalStatus::Ok, "{problem}: {:?}", report.message);
        let FrameworkParams::Aco(p) = &params else { unreachable!() };
        for (inst, obj) in data.iter().zip(&report.objectives) {
            let eta =
                ClassicKnowledge { framework: Framework::Aco }.knowledge(&KnowledgeInput::from_instance(inst)).unwrap();
            let native = aco_run(inst, &eta, p, inst.seed, Deadline::none()).unwrap().solution.objective;
            assert_eq!(native.to_bits(), obj.to_bits(), "{problem}");
        }
        if problem.is_maximization() {
            assert!(report.fitness.value().unwrap() > 0.0);
        }
    }
}

#[test]
fn shipped_classics_evaluate_ok() {
    for (framework, problem, n) in [
        (Framework::Constructive, Problem::Kp, 30),
        (Framework::Constructive, Problem::BppOnline, 200),
        (Framework::Gls, Problem::Tsp, 20),
    ] {
        let data = vec![gen_instance(problem, n, 3, &Overrides::default()).unwrap()];
        let mut params = framework_defaults(framework, problem).unwrap();
        if let FrameworkParams::Gls(p) = &mut params {
            p.n_iterations = 20;
        }
        let report = evaluate(&classic_program(framework, problem).unwrap(), &data, &EvalConfig::new(params, 60.0));
        assert_eq!(report.status, EvalStatus::Ok, "{framework}/{problem}: {:?}", report.message);
    }
}

fn kp_fixture() -> Instance {
    Instance {
        n: 5,
        seed: 0,
        overrides: Overrides::default(),
        data: InstanceData::Kp(KpInstance {
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            weights: vec![0.5, 0.25, 0.375, 0.125, 0.0625],
            capacity: 1.0,
        }),
    }
}

#[test]
fn constant_scores_follow_index_order() {
    // Hand trace: take 0 (left 0.5), take 1 (left 0.25), skip 2 (0.375),
    // take 3 (left 0.125), take 4 (left 0.0625). Value 1 + 2 + 4 + 5 = 12.
    let inst = kp_fixture();
    let constant = program(
        Framework::Constructive,
        Problem::Kp,
        "fn select_next_item(remaining_capacity, weights, values, candidates) { let s = []; for c in candidates { s.push(1.0); } s }",
    );
    let report = evaluate(&constant, &[inst], &cfg(Framework::Constructive, Problem::Kp, 60.0));
    assert_eq!(report.status, EvalStatus::Ok, "{:?}", report.message);
    assert_eq!(report.objectives, vec![12.0]);
    assert_eq!(report.fitness.value(), Some(12.0));
}

#[test]
fn busy_loop_times_out_near_limit() {
    let data = tsp(2, 10);
    let busy = program(
        Framework::Constructive,
        Problem::Tsp,
        "fn select_next_node(a, b, c, d) { let x = 0; loop { x += 1; } }",
    );
    let started = Instant::now();
    let report = evaluate(&busy, &data, &cfg(Framework::Constructive, Problem::Tsp, 1.0));
    let wall = started.elapsed().as_secs_f64();
    assert_eq!(report.status, EvalStatus::Timeout);
    assert!(report.fitness.is_sentinel());
    assert!((0.9..2.0).contains(&wall), "wall {wall}");
}

#[test]
fn failures_map_to_statuses() {
    let data = tsp(2, 8);
    let c = cfg(Framework::Constructive, Problem::Tsp, 60.0);
    let cases = [
        ("fn select_next_node(a, b, c, d) { [] }", EvalStatus::InvalidOutput),
        (
            "fn select_next_node(a, b, c, d) { let s = []; for x in c { s.push(0.0 / 0.0); } s }",
            EvalStatus::InvalidOutput,
        ),
        ("fn select_next_node(a, b, c, d) { let s = []; for x in c { s.push(\"x\"); } s }", EvalStatus::InvalidOutput),
        ("fn select_next_node(a, b, c, d) { 5 }", EvalStatus::InvalidOutput),
        ("fn select_next_node(a, b, c, d) { d[1000][0] }", EvalStatus::RuntimeError),
        ("fn select_next_node(a, b, c, d) { throw \"boom\"; }", EvalStatus::RuntimeError),
        ("fn select_next_node(a, b, c, d) { let s = ; }", EvalStatus::ParseError),
        ("fn select_next_node(a, b, c, d) { read_file(\"x\") }", EvalStatus::ParseError),
        ("fn select_next_node(a, b, c, d) { select_next_node(a, b, c, d) }", EvalStatus::ParseError),
    ];
    for (src, status) in cases {
        let report = evaluate(&program(Framework::Constructive, Problem::Tsp, src), &data, &c);
        assert_eq!(report.status, status, "{src}: {:?}", report.message);
        assert!(report.fitness.is_sentinel());
        assert!(report.objectives.is_empty());
    }
    let wrong_pair = evaluate(&classic_program(Framework::Constructive, Problem::Kp).unwrap(), &data, &c);
    assert_eq!(wrong_pair.status, EvalStatus::RuntimeError);
}

#[test]
fn aco_shape_and_sign_are_validated() {
    let data = tsp(1, 6);
    let c = cfg(Framework::Aco, Problem::Tsp, 60.0);
    for src in [
        "fn heuristics(d) { [1.0, 2.0] }",
        "fn heuristics(d) { let o = []; for i in 0..d.len() { let r = []; for j in 0..d.len() { r.push(-1.0); } o.push(r); } o }",
        "fn heuristics(d) { let o = []; for i in 0..d.len() { o.push([1.0]); } o }",
    ] {
        let report = evaluate(&program(Framework::Aco, Problem::Tsp, src), &data, &c);
        assert_eq!(report.status, EvalStatus::InvalidOutput, "{src}: {:?}", report.message);
    }
}

#[test]
fn evaluation_is_deterministic_and_ordered() {
    let data = tsp(4, 25);
    let c = cfg(Framework::Constructive, Problem::Tsp, 60.0);
    let programs = vec![
        classic_program(Framework::Constructive, Problem::Tsp).unwrap(),
        program(
            Framework::Constructive,
            Problem::Tsp,
            "fn select_next_node(a, b, c, d) { let s = []; for x in c { s.push(-x); } s }",
        ),
        program(Framework::Constructive, Problem::Tsp, "fn select_next_node(a, b, c, d) { [] }"),
        program(
            Framework::Constructive,
            Problem::Tsp,
            "fn select_next_node(a, b, c, d) { let s = []; for x in c { s.push(d[a][x]); } s }",
        ),
    ];
    let parallel = evaluate_many(&programs, &data, &c, Execution::Parallel(4));
    let sequential = evaluate_many(&programs, &data, &c, Execution::Sequential);
    for ((p, a), b) in programs.iter().zip(&parallel).zip(&sequential) {
        assert!(a.same_outcome(b));
        assert!(a.same_outcome(&evaluate(p, &data, &c)));
    }
    // Farthest-first is worse than nearest-first, so its fitness is strictly lower.
    assert!(parallel[3].fitness < parallel[0].fitness);
    assert!(parallel[2].fitness < parallel[3].fitness);
}

#[test]
fn fitness_order_and_serialization() {
    let s = Fitness::SENTINEL;
    for v in [-1e300, -5.0, 0.0, 7.5, f64::MIN, f64::MAX] {
        assert!(s < Fitness::new(v));
    }
    assert_eq!(Fitness::new(f64::NAN), s);
    assert_eq!(s.stand_in(), f64::MIN);
    assert_eq!(serde_json::to_string(&s).unwrap(), "null");
    assert_eq!(serde_json::from_str::<Fitness>("null").unwrap(), s);
    assert_eq!(serde_json::from_str::<Fitness>("-6.5").unwrap(), Fitness::new(-6.5));
    let report = FitnessReport::failure(EvalStatus::Timeout, "slow", 1.0);
    let line = report.to_line();
    assert!(line.contains("\"fitness\":null") && line.contains("\"status\":\"timeout\""));
    let back: FitnessReport = serde_json::from_str(&line).unwrap();
    assert!(back.same_outcome(&report));
}

#[test]
fn two_instance_mean() {
    // costs 4 and 6 -> fitness -5: two 2-node TSP instances with a known closed length.
    let mk = |side: f64| {
        let mut inst = gen_instance(Problem::Tsp, 2, 1, &Overrides::default()).unwrap();
        let InstanceData::Tsp(t) = &mut inst.data else { unreachable!() };
        t.coords = vec![[0.0, 0.0], [side, 0.0]];
        t.dist = pathwise_problems::Matrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { side });
        inst
    };
    let data = vec![mk(2.0), mk(3.0)];
    let report = evaluate(
        &classic_program(Framework::Constructive, Problem::Tsp).unwrap(),
        &data,
        &cfg(Framework::Constructive, Problem::Tsp, 60.0),
    );
    assert_eq!(report.objectives, vec![4.0, 6.0]);
    assert_eq!(report.fitness.value(), Some(-5.0));
}

#[test]
fn program_file_round_trip() {
    let p = HeuristicProgram::new("fn heuristics(d) {\n  d\n}\n", Framework::Gls, Problem::Tsp, "edge length\n guide");
    let text = p.to_file_text();
    assert!(text.starts_with("// pathwise-heuristic: gls/tsp\n// description: edge length guide\n"));
    let back = HeuristicProgram::from_file_text(&text, None).unwrap();
    assert_eq!(back.source, p.source);
    assert_eq!(back.description, "edge length guide");
    assert!(HeuristicProgram::from_file_text("fn f() {}", None).is_err());
    assert_eq!(
        HeuristicProgram::from_file_text("fn f() {}", Some((Framework::Aco, Problem::Op))).unwrap().problem,
        Problem::Op
    );
}

#[test]
fn matrix_helpers_in_scripts() {
    let data = tsp(1, 5);
    let src = "fn heuristics(d) {
        let n = d.rows();
        let total = 0.0;
        for row in d { total += sum(row); }
        let m = zeros(n, d.cols());
        for i in 0..n { for j in 0..n { m[i][j] = d[i][j] / total + 1; } }
        let arr = d[0].to_array();
        if arr.len() != n { throw \"bad\"; }
        m
    }";
    let report = evaluate(&program(Framework::Aco, Problem::Tsp, src), &data, &cfg(Framework::Aco, Problem::Tsp, 60.0));
    assert_eq!(report.status, EvalStatus::Ok, "{:?}", report.message);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn fitness_order_matches_cost_order(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        // Minimization: fitness = -cost, so lower cost <=> higher fitness.
        prop_assert_eq!(a < b, Fitness::new(-a) > Fitness::new(-b));
        prop_assert!(Fitness::SENTINEL < Fitness::new(-a));
    }
}
