use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use pathwise_problems::frameworks::HeuristicSignature;
use rhai::{ASTNode, Engine, Expr, Position, Stmt, AST};
use serde::{Deserialize, Serialize};

use crate::engine::{build_engine, Watchdog};

/// Kind of disallowed construct found by [`sandbox_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Io,
    Process,
    Network,
    Eval,
    Import,
    Recursion,
    Signature,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Process => "process",
            Category::Network => "network",
            Category::Eval => "eval",
            Category::Import => "import",
            Category::Recursion => "recursion",
            Category::Signature => "signature",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Function names rejected per category unless the script defines them itself.
pub const DENYLIST: &[(Category, &[&str])] = &[
    (
        Category::Io,
        &[
            "open",
            "open_file",
            "file",
            "read_file",
            "write_file",
            "read_to_string",
            "create_file",
            "remove_file",
            "delete_file",
            "append_file",
            "read_dir",
            "load_file",
            "save_file",
            "read_line",
            "stdin",
            "stdout",
        ],
    ),
    (
        Category::Process,
        &[
            "system", "exec", "spawn", "command", "process", "exit", "shell", "popen", "fork", "kill", "env", "getenv",
            "set_env", "sleep",
        ],
    ),
    (
        Category::Network,
        &[
            "http",
            "http_get",
            "http_post",
            "fetch",
            "socket",
            "connect",
            "request",
            "download",
            "url",
            "tcp",
            "udp",
            "curl",
        ],
    ),
    (Category::Eval, &["eval", "Fn", "call", "curry"]),
];

/// Parse failure with a 1-based source location when known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{} (line {l}, column {c})", self.message),
            (Some(l), None) => write!(f, "{} (line {l})", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

/// One disallowed construct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub category: Category,
    pub detail: String,
}

/// Result of a static check; a program is accepted when it is [`clean`](Self::clean).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub parse_error: Option<ParseFailure>,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn clean(&self) -> bool {
        self.parse_error.is_none() && self.violations.is_empty()
    }

    pub fn has(&self, category: Category) -> bool {
        self.violations.iter().any(|v| v.category == category)
    }

    /// One-line summary of every problem found.
    pub fn summary(&self) -> String {
        let mut parts: Vec<String> = self.parse_error.iter().map(|p| format!("parse error: {p}")).collect();
        parts.extend(self.violations.iter().map(|v| format!("{}: {}", v.category, v.detail)));
        parts.join("; ")
    }
}

fn check_engine() -> Engine {
    build_engine(&Watchdog::default(), true)
}

type Loc = (usize, usize);

struct Call {
    name: String,
    arity: usize,
    qualified: bool,
    at: Option<Loc>,
}

fn loc(pos: Position) -> Option<Loc> {
    Some((pos.line()?, pos.position().unwrap_or(0)))
}

fn call_of(node: &ASTNode) -> Option<Call> {
    let (call, pos) = match node {
        ASTNode::Expr(Expr::FnCall(call, pos) | Expr::MethodCall(call, pos)) => (call, *pos),
        ASTNode::Stmt(Stmt::FnCall(call, pos)) => (call, *pos),
        _ => return None,
    };
    Some(Call {
        name: call.name.to_string(),
        arity: call.args.len(),
        qualified: !call.namespace.is_empty(),
        at: loc(pos),
    })
}

fn collect_calls(ast: &AST) -> (Vec<Call>, bool) {
    let mut calls = Vec::new();
    let mut imports = false;
    ast.walk(&mut |path: &[ASTNode]| {
        if let Some(node) = path.last() {
            calls.extend(call_of(node));
            if matches!(node, ASTNode::Stmt(Stmt::Import(..)) | ASTNode::Stmt(Stmt::Export(..))) {
                imports = true;
            }
        }
        true
    });
    (calls, imports)
}

/// Finds one cycle in the script call graph, returned as the function names along it.
fn find_cycle(graph: &BTreeMap<(String, usize), BTreeSet<(String, usize)>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    fn visit(
        node: &(String, usize),
        graph: &BTreeMap<(String, usize), BTreeSet<(String, usize)>>,
        marks: &mut BTreeMap<(String, usize), Mark>,
        stack: &mut Vec<(String, usize)>,
    ) -> Option<Vec<String>> {
        match marks.get(node) {
            Some(Mark::Done) => return None,
            Some(Mark::Open) => {
                let start = stack.iter().position(|n| n == node).unwrap_or(0);
                let mut cycle: Vec<String> = stack[start..].iter().map(|n| n.0.clone()).collect();
                cycle.push(node.0.clone());
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(node.clone(), Mark::Open);
        stack.push(node.clone());
        for next in graph.get(node).into_iter().flatten() {
            if let Some(cycle) = visit(next, graph, marks, stack) {
                return Some(cycle);
            }
        }
        stack.pop();
        marks.insert(node.clone(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    graph.keys().find_map(|node| visit(node, graph, &mut marks, &mut Vec::new()))
}

/// Whether `word` occurs in `source` as a whole identifier.
fn mentions(source: &str, word: &str) -> bool {
    let ident = |c: char| c.is_alphanumeric() || c == '_';
    source.match_indices(word).any(|(i, _)| {
        let before = source[..i].chars().next_back().is_none_or(|c| !ident(c));
        let after = source[i + word.len()..].chars().next().is_none_or(|c| !ident(c));
        before && after
    })
}

/// Parses `source` without executing it and reports constructs outside the
/// allowlist. With a signature, the entry function must also exist with the
/// expected parameter count.
pub fn sandbox_check(source: &str, signature: Option<&HeuristicSignature>) -> CheckReport {
    let engine = check_engine();
    let ast = match engine.compile(source) {
        Ok(ast) => ast,
        Err(e) => {
            return CheckReport {
                parse_error: Some(ParseFailure {
                    message: e.err_type().to_string(),
                    line: e.position().line(),
                    column: e.position().position(),
                }),
                violations: Vec::new(),
            }
        }
    };
    let mut violations = Vec::new();
    let defined: BTreeSet<(String, usize)> =
        ast.iter_functions().map(|f| (f.name.to_string(), f.params.len())).collect();
    let defined_names: BTreeSet<&str> = defined.iter().map(|(n, _)| n.as_str()).collect();

    let (calls, imports) = collect_calls(&ast);
    if imports {
        violations.push(Violation { category: Category::Import, detail: "module import or export".into() });
    }
    let mut seen = BTreeSet::new();
    for call in &calls {
        if !seen.insert((call.name.clone(), call.qualified)) {
            continue;
        }
        // Capturing closures compile to a `curry` call the author never wrote.
        if call.name == "curry" && !call.qualified && !mentions(source, "curry") {
            continue;
        }
        let denied = DENYLIST.iter().find(|(_, names)| names.contains(&call.name.as_str())).map(|(c, _)| *c);
        match denied {
            Some(category) if call.qualified || !defined_names.contains(call.name.as_str()) => {
                violations.push(Violation { category, detail: format!("call to `{}`", call.name) })
            }
            _ if call.qualified => violations
                .push(Violation { category: Category::Import, detail: format!("namespaced call to `{}`", call.name) }),
            _ => {}
        }
    }

    // Named functions do not nest, so each call belongs to the named function
    // whose body span contains it; calls inside closures count for the enclosing function.
    let spans: Vec<((String, usize), Loc, Loc)> = ast
        .iter_fn_def()
        .filter(|f| !f.name.starts_with("anon$"))
        .filter_map(|f| {
            Some(((f.name.to_string(), f.params.len()), loc(f.body.start_position())?, loc(f.body.end_position())?))
        })
        .collect();
    let mut graph: BTreeMap<(String, usize), BTreeSet<(String, usize)>> = BTreeMap::new();
    for call in calls.iter().filter(|c| !c.qualified && defined.contains(&(c.name.clone(), c.arity))) {
        let Some(at) = call.at else { continue };
        if let Some((caller, _, _)) = spans.iter().find(|(_, lo, hi)| *lo <= at && at <= *hi) {
            graph.entry(caller.clone()).or_default().insert((call.name.clone(), call.arity));
        }
    }
    if let Some(cycle) = find_cycle(&graph) {
        violations
            .push(Violation { category: Category::Recursion, detail: format!("call cycle {}", cycle.join(" -> ")) });
    }

    if let Some(sig) = signature {
        let arities: Vec<usize> = defined.iter().filter(|(n, _)| n == sig.function_name).map(|(_, a)| *a).collect();
        if arities.is_empty() {
            violations.push(Violation {
                category: Category::Signature,
                detail: format!("missing entry function `{}`", sig.call_form()),
            });
        } else if !arities.contains(&sig.params.len()) {
            violations.push(Violation {
                category: Category::Signature,
                detail: format!(
                    "`{}` must take {} parameters, found {:?}",
                    sig.function_name,
                    sig.params.len(),
                    arities
                ),
            });
        }
    }
    CheckReport { parse_error: None, violations }
}
