use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use pathwise_problems::frameworks::Deadline;
use pathwise_problems::Matrix;
use rhai::module_resolvers::DummyModuleResolver;
use rhai::{Array, Dynamic, Engine, EvalAltResult, Position, FLOAT, INT};

/// Maximum nested function call depth inside a script.
pub const MAX_CALL_LEVELS: usize = 48;
/// Maximum total elements across all (nested) arrays a script value may hold.
pub const MAX_ARRAY_SIZE: usize = 4_200_000;
/// Maximum string length in bytes.
pub const MAX_STRING_SIZE: usize = 1 << 20;
/// Maximum expression nesting depth (global, inside functions).
pub const MAX_EXPR_DEPTHS: (usize, usize) = (128, 96);

const NO_DEADLINE: u64 = u64::MAX;

/// Resettable wall-clock deadline shared with the engine's progress hook.
#[derive(Debug, Clone)]
pub struct Watchdog {
    base: Instant,
    limit_nanos: Arc<AtomicU64>,
}

impl Default for Watchdog {
    fn default() -> Self {
        Self { base: Instant::now(), limit_nanos: Arc::new(AtomicU64::new(NO_DEADLINE)) }
    }
}

impl Watchdog {
    pub fn arm(&self, deadline: Deadline) {
        let nanos = match deadline.instant() {
            Some(at) => at.saturating_duration_since(self.base).as_nanos().min(u128::from(NO_DEADLINE - 1)) as u64,
            None => NO_DEADLINE,
        };
        self.limit_nanos.store(nanos, Ordering::Relaxed);
    }

    pub fn disarm(&self) {
        self.limit_nanos.store(NO_DEADLINE, Ordering::Relaxed);
    }

    pub fn expired(&self) -> bool {
        let limit = self.limit_nanos.load(Ordering::Relaxed);
        limit != NO_DEADLINE && self.base.elapsed().as_nanos() >= u128::from(limit)
    }
}

/// Read-only matrix handed to scripts; `m[i][j]` indexes, `m.len()` is the row count.
#[derive(Debug, Clone)]
pub struct Mat(pub Arc<Matrix>);

/// One row of a [`Mat`].
#[derive(Debug, Clone)]
pub struct Row {
    mat: Arc<Matrix>,
    row: usize,
}

/// Iterator over the values of a [`Row`].
pub struct RowIter {
    row: Row,
    next: usize,
}

impl Iterator for RowIter {
    type Item = FLOAT;

    fn next(&mut self) -> Option<FLOAT> {
        (self.next < self.row.mat.cols()).then(|| {
            self.next += 1;
            self.row.mat.get(self.row.row, self.next - 1)
        })
    }
}

impl IntoIterator for Row {
    type Item = FLOAT;
    type IntoIter = RowIter;

    fn into_iter(self) -> RowIter {
        RowIter { row: self, next: 0 }
    }
}

impl IntoIterator for Mat {
    type Item = Row;
    type IntoIter = std::vec::IntoIter<Row>;

    fn into_iter(self) -> Self::IntoIter {
        (0..self.0.rows()).map(|row| Row { mat: self.0.clone(), row }).collect::<Vec<_>>().into_iter()
    }
}

impl Row {
    fn to_array(&self) -> Array {
        self.mat.row(self.row).iter().map(|&v| Dynamic::from_float(v)).collect()
    }
}

fn bounds(len: usize, index: INT) -> Result<usize, Box<EvalAltResult>> {
    usize::try_from(index)
        .ok()
        .filter(|&i| i < len)
        .ok_or_else(|| EvalAltResult::ErrorArrayBounds(len, index, Position::NONE).into())
}

fn number(value: &Dynamic) -> Result<FLOAT, Box<EvalAltResult>> {
    value
        .as_float()
        .or_else(|_| value.as_int().map(|v| v as FLOAT))
        .map_err(|t| format!("expected a number, found {t}").into())
}

fn register_types(engine: &mut Engine) {
    engine
        .register_type_with_name::<Mat>("Matrix")
        .register_type_with_name::<Row>("Row")
        .register_iterator::<Mat>()
        .register_iterator::<Row>()
        .register_indexer_get(|m: &mut Mat, i: INT| -> Result<Row, Box<EvalAltResult>> {
            Ok(Row { mat: m.0.clone(), row: bounds(m.0.rows(), i)? })
        })
        .register_indexer_get(|r: &mut Row, j: INT| -> Result<FLOAT, Box<EvalAltResult>> {
            Ok(r.mat.get(r.row, bounds(r.mat.cols(), j)?))
        })
        .register_fn("len", |m: &mut Mat| m.0.rows() as INT)
        .register_fn("rows", |m: &mut Mat| m.0.rows() as INT)
        .register_fn("cols", |m: &mut Mat| m.0.cols() as INT)
        .register_fn("len", |r: &mut Row| r.mat.cols() as INT)
        .register_fn("to_array", |r: &mut Row| r.to_array())
        .register_fn("to_array", |m: &mut Mat| -> Array {
            (0..m.0.rows()).map(|row| Dynamic::from_array(Row { mat: m.0.clone(), row }.to_array())).collect()
        })
        .register_fn("to_string", |m: &mut Mat| format!("Matrix({}x{})", m.0.rows(), m.0.cols()))
        .register_fn("to_string", |r: &mut Row| format!("{:?}", r.mat.row(r.row)))
        .register_fn("zeros", |n: INT| -> Result<Array, Box<EvalAltResult>> {
            let n = usize::try_from(n).map_err(|_| "zeros: negative length")?;
            Ok(vec![Dynamic::from_float(0.0); n])
        })
        .register_fn("zeros", |r: INT, c: INT| -> Result<Array, Box<EvalAltResult>> {
            let r = usize::try_from(r).map_err(|_| "zeros: negative length")?;
            let c = usize::try_from(c).map_err(|_| "zeros: negative length")?;
            Ok(vec![Dynamic::from_array(vec![Dynamic::from_float(0.0); c]); r])
        })
        .register_fn("sum", |a: &mut Array| -> Result<FLOAT, Box<EvalAltResult>> { a.iter().map(number).sum() })
        .register_fn("sum", |r: &mut Row| -> FLOAT { r.mat.row(r.row).iter().sum() })
        .register_fn("to_float", |v: FLOAT| v)
        .register_fn("inf", || FLOAT::INFINITY);
}

/// Builds a sandboxed engine: no modules, no output, bounded data and
/// recursion, and a wall-clock deadline polled every 256 operations.
///
/// `eval` is disabled as a symbol when `allow_eval_symbol` is false; static
/// checking uses an engine that keeps the symbol so such programs parse and
/// are reported with the `eval` category instead.
pub fn build_engine(watchdog: &Watchdog, allow_eval_symbol: bool) -> Engine {
    let mut engine = Engine::new();
    engine
        .set_module_resolver(DummyModuleResolver::new())
        .set_max_call_levels(MAX_CALL_LEVELS)
        .set_max_expr_depths(MAX_EXPR_DEPTHS.0, MAX_EXPR_DEPTHS.1)
        .set_max_array_size(MAX_ARRAY_SIZE)
        .set_max_string_size(MAX_STRING_SIZE)
        .set_max_map_size(100_000)
        .set_max_modules(0)
        .set_strict_variables(true)
        .on_print(|_| {})
        .on_debug(|_, _, _| {});
    if !allow_eval_symbol {
        engine.disable_symbol("eval");
    }
    let dog = watchdog.clone();
    engine.on_progress(move |ops| (ops & 0xFF == 0 && dog.expired()).then_some(Dynamic::UNIT));
    register_types(&mut engine);
    engine
}
