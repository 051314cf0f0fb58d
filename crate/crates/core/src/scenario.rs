//! Declarative scenario files and the batch task runner.
//!
//! A scenario is a line-oriented config with `[section]` headers and
//! `key = value` pairs: one `[domain]`, one `[exponent]`, one `[weight]`,
//! optional `[solver]` and `[options]`, any number of `[set NAME]` and
//! `[task NAME]` sections.  `#` starts a comment.  Named sets are built in
//! file order and may combine earlier sets with the algebra `A & B`,
//! `A | B`, `A - B`, `!A` and parentheses.
//!
//! Running a scenario executes every task in file order and writes
//! `results.csv` (fixed header `task,kind,value,value2,converged,iterations,
//! wall_ms`, unused cells empty, numbers at 10 significant digits) plus one
//! JSON report per diagnostic task and one SVG per requested heatmap.  All
//! artifacts are written atomically and, wall-clock column aside, are a
//! deterministic function of the scenario text.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::capacity::{CapacityCache, SolverOptions};
use crate::fieldexpr::{parse_expr, Cmp, Expr};
use crate::fine::{finely_open_diagnostic, spine_scenario};
use crate::grid::{
    rasterize_ball, rasterize_halfspace, rasterize_rect, Grid, GridSet, Sense,
};
use crate::properties::{
    check_annulus_comparability, check_ball_measure_comparability, check_capacity_axioms,
    check_capacity_limits, check_wiener_equivalence, PropertyReport,
};
use crate::render::{emit_heatmap, write_atomic};
use crate::spaces::{ExponentField, WeightField};
use crate::wiener::{wiener_integral, wiener_sum};
use crate::{Error, Result};

// ── scenario data model ──────────────────────────────────────────────────

/// Grid description: dimension, per-axis extent, per-axis node count.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub dim: usize,
    pub extent: Vec<(f64, f64)>,
    pub n: Vec<usize>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Grid<f64>> {
        Grid::new(self.dim, &self.extent, &self.n)
    }
}

/// How a named set is produced.
#[derive(Clone, Debug)]
pub enum SetRule {
    Ball { center: Vec<f64>, radius: f64 },
    Rect { lo: Vec<f64>, hi: Vec<f64> },
    Halfspace { axis: usize, sense: Sense, value: f64 },
    /// Pointwise comparison of two expressions, e.g. `abs(x1) < exp(-1/x2)`.
    Predicate { lhs: Expr, cmp: Cmp, rhs: Expr, text: String },
    /// Combination of previously defined sets.
    Algebra { ast: AlgExpr, text: String },
}

#[derive(Clone, Debug)]
pub struct SetDef {
    pub name: String,
    pub line: usize,
    pub rule: SetRule,
}

/// Which diagnostic a `wiener` task runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WienerVariant {
    Sum,
    Integral,
}

/// What a task computes.
#[derive(Clone, Debug)]
pub enum TaskRule {
    Capacity { compact: String, domain: String, heatmap: bool },
    Wiener { variant: WienerVariant, set: String, point: Vec<f64>, levels: u32, nodes_per_octave: u32 },
    FineOpen { set: String, samples: Vec<Vec<f64>>, levels: u32 },
    Axioms { trials: u32, seed: Option<u64> },
    Spine { dim: usize, resolution: usize },
}

#[derive(Clone, Debug)]
pub struct TaskDef {
    pub name: String,
    pub line: usize,
    pub rule: TaskRule,
}

/// A parsed, validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub domain: DomainSpec,
    pub exponent: String,
    pub weight: String,
    pub solver: SolverOptions,
    pub seed: u64,
    pub sets: Vec<SetDef>,
    pub tasks: Vec<TaskDef>,
}

/// Set-algebra expression over names of previously defined sets.
#[derive(Clone, Debug)]
pub enum AlgExpr {
    Name(String),
    Not(Box<AlgExpr>),
    And(Box<AlgExpr>, Box<AlgExpr>),
    Or(Box<AlgExpr>, Box<AlgExpr>),
    Diff(Box<AlgExpr>, Box<AlgExpr>),
}

impl AlgExpr {
    fn names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            AlgExpr::Name(n) => out.push(n),
            AlgExpr::Not(a) => a.names(out),
            AlgExpr::And(a, b) | AlgExpr::Or(a, b) | AlgExpr::Diff(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }

    fn eval(&self, sets: &BTreeMap<String, GridSet<f64>>) -> Result<GridSet<f64>> {
        match self {
            AlgExpr::Name(n) => Ok(sets
                .get(n)
                .unwrap_or_else(|| panic!("validated name '{n}' missing at build time"))
                .clone()),
            AlgExpr::Not(a) => Ok(a.eval(sets)?.complement()),
            AlgExpr::And(a, b) => a.eval(sets)?.intersection(&b.eval(sets)?),
            AlgExpr::Or(a, b) => a.eval(sets)?.union(&b.eval(sets)?),
            AlgExpr::Diff(a, b) => a.eval(sets)?.difference(&b.eval(sets)?),
        }
    }
}

// ── set-algebra parser ───────────────────────────────────────────────────

struct AlgParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> AlgParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn or_expr(&mut self) -> std::result::Result<AlgExpr, String> {
        let mut e = self.and_expr()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            e = AlgExpr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> std::result::Result<AlgExpr, String> {
        let mut e = self.unary()?;
        loop {
            match self.peek() {
                Some(b'&') => {
                    self.pos += 1;
                    e = AlgExpr::And(Box::new(e), Box::new(self.unary()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    e = AlgExpr::Diff(Box::new(e), Box::new(self.unary()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<AlgExpr, String> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(AlgExpr::Not(Box::new(self.unary()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.or_expr()?;
                if self.peek() != Some(b')') {
                    return Err("missing ')' in set algebra".into());
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric()
                        || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Ok(AlgExpr::Name(
                    std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string(),
                ))
            }
            _ => Err("expected set name, '!' or '(' in set algebra".into()),
        }
    }
}

/// Parses a set-algebra expression (`A & B`, `A | B`, `A - B`, `!A`).
pub fn parse_algebra(text: &str) -> std::result::Result<AlgExpr, String> {
    let mut p = AlgParser { bytes: text.as_bytes(), pos: 0 };
    let e = p.or_expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(format!("trailing input in set algebra at byte {}", p.pos));
    }
    Ok(e)
}

// ── scenario text parser ─────────────────────────────────────────────────

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Scenario { line, msg: msg.into() }
}

struct KeyMap {
    entries: Vec<(usize, String, String)>,
    used: BTreeSet<String>,
}

impl KeyMap {
    fn new() -> Self {
        KeyMap { entries: Vec::new(), used: BTreeSet::new() }
    }

    fn insert(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        if self.entries.iter().any(|(_, k, _)| k == key) {
            return Err(err(line, format!("duplicate key '{key}'")));
        }
        self.entries.push((line, key.to_string(), value.to_string()));
        Ok(())
    }

    fn get(&mut self, key: &str) -> Option<(usize, &str)> {
        self.used.insert(key.to_string());
        self.entries.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()))
    }

    fn require(&mut self, section_line: usize, key: &str) -> Result<(usize, String)> {
        match self.get(key) {
            Some((l, v)) => Ok((l, v.to_string())),
            None => Err(err(section_line, format!("missing key '{key}'"))),
        }
    }

    fn reject_unknown(&self) -> Result<()> {
        for (l, k, _) in &self.entries {
            if !self.used.contains(k) {
                return Err(err(*l, format!("unknown key '{k}'")));
            }
        }
        Ok(())
    }
}

fn parse_floats(line: usize, key: &str, v: &str, want: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != want {
        return Err(err(line, format!("'{key}' needs {want} numbers, got {}", parts.len())));
    }
    parts
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| err(line, format!("'{key}': bad number '{s}'"))))
        .collect()
}

fn parse_one<F: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<F> {
    v.trim().parse::<F>().map_err(|_| err(line, format!("'{key}': bad value '{v}'")))
}

fn parse_sense(line: usize, v: &str) -> Result<Sense> {
    Ok(match v.trim() {
        "lt" | "<" => Sense::Lt,
        "le" | "<=" => Sense::Le,
        "gt" | ">" => Sense::Gt,
        "ge" | ">=" => Sense::Ge,
        other => return Err(err(line, format!("unknown sense '{other}' (lt|le|gt|ge)"))),
    })
}

/// Splits a predicate `lhs <cmp> rhs` on the first comparison operator.
fn parse_predicate(line: usize, text: &str) -> Result<(Expr, Cmp, Expr)> {
    let bytes = text.as_bytes();
    for i in 0..bytes.len() {
        if bytes[i] == b'<' || bytes[i] == b'>' {
            let (op, rest) = if bytes.get(i + 1) == Some(&b'=') {
                (&text[i..i + 2], &text[i + 2..])
            } else {
                (&text[i..i + 1], &text[i + 1..])
            };
            let cmp = Cmp::parse(op).expect("‹ or › prefixed operator");
            let lhs = parse_expr(&text[..i]).map_err(|e| err(line, format!("left side: {e}")))?;
            let rhs = parse_expr(rest).map_err(|e| err(line, format!("right side: {e}")))?;
            return Ok((lhs, cmp, rhs));
        }
    }
    Err(err(line, "predicate needs a comparison (<, <=, >, >=)"))
}

fn parse_points(line: usize, key: &str, v: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    v.split(';')
        .map(|chunk| parse_floats(line, key, chunk.trim(), dim))
        .collect::<Result<Vec<_>>>()
}

enum Section {
    Domain,
    Exponent,
    Weight,
    Solver,
    Options,
    Set(String),
    Task(String),
}

/// Parses and validates scenario text; every error carries its line number.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    // pass 1: group key/value lines under their sections
    let mut sections: Vec<(usize, Section, KeyMap)> = Vec::new();
    let mut current: Option<(usize, Section, KeyMap)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let s = stripped.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(inner) = s.strip_prefix('[') {
            let Some(header) = inner.strip_suffix(']') else {
                return Err(err(line, "unterminated section header"));
            };
            let header = header.trim();
            let sec = match header {
                "domain" => Section::Domain,
                "exponent" => Section::Exponent,
                "weight" => Section::Weight,
                "solver" => Section::Solver,
                "options" => Section::Options,
                other => {
                    if let Some(name) = other.strip_prefix("set ") {
                        validate_name(line, name.trim())?;
                        Section::Set(name.trim().to_string())
                    } else if let Some(name) = other.strip_prefix("task ") {
                        validate_name(line, name.trim())?;
                        Section::Task(name.trim().to_string())
                    } else {
                        return Err(err(line, format!("unknown section '[{other}]'")));
                    }
                }
            };
            if let Some(done) = current.take() {
                sections.push(done);
            }
            current = Some((line, sec, KeyMap::new()));
            continue;
        }
        let Some((key, value)) = s.split_once('=') else {
            return Err(err(line, "expected 'key = value' or '[section]'"));
        };
        match &mut current {
            Some((_, _, map)) => map.insert(line, key.trim(), value.trim())?,
            None => return Err(err(line, "key/value before any section header")),
        }
    }
    if let Some(done) = current.take() {
        sections.push(done);
    }

    // pass 2: interpret sections
    let mut domain: Option<DomainSpec> = None;
    let mut exponent: Option<String> = None;
    let mut weight: Option<String> = None;
    let mut solver = SolverOptions::default();
    let mut seed = 0u64;
    let mut sets: Vec<SetDef> = Vec::new();
    let mut tasks: Vec<TaskDef> = Vec::new();

    for (sec_line, sec, mut map) in sections {
        match sec {
            Section::Domain => {
                if domain.is_some() {
                    return Err(err(sec_line, "duplicate [domain] section"));
                }
                let (dl, dv) = map.require(sec_line, "dim")?;
                let dim: usize = parse_one(dl, "dim", &dv)?;
                if !(1..=3).contains(&dim) {
                    return Err(err(dl, format!("dim must be 1..=3, got {dim}")));
                }
                let (el, ev) = map.require(sec_line, "extent")?;
                let flat = parse_floats(el, "extent", &ev, 2 * dim)?;
                let extent: Vec<(f64, f64)> =
                    flat.chunks(2).map(|c| (c[0], c[1])).collect();
                for (lo, hi) in &extent {
                    if !(lo < hi) {
                        return Err(err(el, format!("extent pair {lo} {hi} is not increasing")));
                    }
                }
                let (nl, nv) = map.require(sec_line, "n")?;
                let n: Vec<usize> = parse_floats(nl, "n", &nv, dim)?
                    .into_iter()
                    .map(|x| x as usize)
                    .collect();
                map.reject_unknown()?;
                domain = Some(DomainSpec { dim, extent, n });
            }
            Section::Exponent | Section::Weight => {
                let what = if matches!(sec, Section::Exponent) { "exponent" } else { "weight" };
                let (el, ev) = map.require(sec_line, "expr")?;
                parse_expr(&ev).map_err(|e| err(el, format!("{what} expression: {e}")))?;
                map.reject_unknown()?;
                if what == "exponent" {
                    if exponent.is_some() {
                        return Err(err(sec_line, "duplicate [exponent] section"));
                    }
                    exponent = Some(ev);
                } else {
                    if weight.is_some() {
                        return Err(err(sec_line, "duplicate [weight] section"));
                    }
                    weight = Some(ev);
                }
            }
            Section::Solver => {
                if let Some((l, v)) = map.get("max_iters") {
                    solver.max_iters = parse_one(l, "max_iters", v)?;
                }
                if let Some((l, v)) = map.get("rel_energy_tol") {
                    solver.rel_energy_tol = parse_one(l, "rel_energy_tol", v)?;
                }
                if let Some((l, v)) = map.get("residual_tol") {
                    solver.residual_tol = if v == "none" {
                        None
                    } else {
                        Some(parse_one(l, "residual_tol", v)?)
                    };
                }
                map.reject_unknown()?;
            }
            Section::Options => {
                if let Some((l, v)) = map.get("seed") {
                    seed = parse_one(l, "seed", v)?;
                }
                map.reject_unknown()?;
            }
            Section::Set(name) => {
                if sets.iter().any(|s| s.name == name) {
                    return Err(err(sec_line, format!("duplicate set '{name}'")));
                }
                let dim = match &domain {
                    Some(d) => d.dim,
                    None => return Err(err(sec_line, "[domain] must come before sets")),
                };
                let (kl, kv) = map.require(sec_line, "kind")?;
                let rule = match kv.as_str() {
                    "ball" => {
                        let (cl, cv) = map.require(sec_line, "center")?;
                        let (rl, rv) = map.require(sec_line, "radius")?;
                        let radius: f64 = parse_one(rl, "radius", &rv)?;
                        if !(radius > 0.0) {
                            return Err(err(rl, "radius must be positive"));
                        }
                        SetRule::Ball { center: parse_floats(cl, "center", &cv, dim)?, radius }
                    }
                    "rect" => {
                        let (ll, lv) = map.require(sec_line, "lo")?;
                        let (hl, hv) = map.require(sec_line, "hi")?;
                        SetRule::Rect {
                            lo: parse_floats(ll, "lo", &lv, dim)?,
                            hi: parse_floats(hl, "hi", &hv, dim)?,
                        }
                    }
                    "halfspace" => {
                        let (al, av) = map.require(sec_line, "axis")?;
                        let axis: usize = parse_one(al, "axis", &av)?;
                        if axis == 0 || axis > dim {
                            return Err(err(al, format!("axis must be 1..={dim}")));
                        }
                        let (sl, sv) = map.require(sec_line, "sense")?;
                        let (vl, vv) = map.require(sec_line, "value")?;
                        SetRule::Halfspace {
                            axis,
                            sense: parse_sense(sl, &sv)?,
                            value: parse_one(vl, "value", &vv)?,
                        }
                    }
                    "expr" => {
                        let (wl, wv) = map.require(sec_line, "where")?;
                        let (lhs, cmp, rhs) = parse_predicate(wl, &wv)?;
                        for e in [&lhs, &rhs] {
                            if e.max_var() > dim {
                                return Err(err(
                                    wl,
                                    format!(
                                        "predicate uses x{} on a {dim}D domain",
                                        e.max_var()
                                    ),
                                ));
                            }
                        }
                        SetRule::Predicate { lhs, cmp, rhs, text: wv }
                    }
                    "algebra" => {
                        let (al, av) = map.require(sec_line, "expr")?;
                        let ast = parse_algebra(&av).map_err(|m| err(al, m))?;
                        let mut names = Vec::new();
                        ast.names(&mut names);
                        for n in names {
                            if !sets.iter().any(|s| s.name == n) {
                                return Err(err(
                                    al,
                                    format!("set '{n}' is not defined above this line"),
                                ));
                            }
                        }
                        SetRule::Algebra { ast, text: av }
                    }
                    other => {
                        return Err(err(
                            kl,
                            format!("unknown set kind '{other}' (ball|rect|halfspace|expr|algebra)"),
                        ))
                    }
                };
                map.reject_unknown()?;
                sets.push(SetDef { name, line: sec_line, rule });
            }
            Section::Task(name) => {
                if tasks.iter().any(|t| t.name == name) {
                    return Err(err(sec_line, format!("duplicate task '{name}'")));
                }
                let dim = match &domain {
                    Some(d) => d.dim,
                    None => return Err(err(sec_line, "[domain] must come before tasks")),
                };
                let require_set = |l: usize, n: &str| -> Result<String> {
                    if sets.iter().any(|s| s.name == n) {
                        Ok(n.to_string())
                    } else {
                        Err(err(l, format!("undefined set '{n}'")))
                    }
                };
                let (kl, kv) = map.require(sec_line, "kind")?;
                let rule = match kv.as_str() {
                    "capacity" => {
                        let (cl, cv) = map.require(sec_line, "compact")?;
                        let (dl, dv) = map.require(sec_line, "domain")?;
                        let heatmap = match map.get("heatmap") {
                            Some((hl, hv)) => parse_one::<bool>(hl, "heatmap", hv)?,
                            None => false,
                        };
                        TaskRule::Capacity {
                            compact: require_set(cl, &cv)?,
                            domain: require_set(dl, &dv)?,
                            heatmap,
                        }
                    }
                    "wiener" => {
                        let variant = match map.get("variant") {
                            Some((vl, vv)) => match vv {
                                "sum" => WienerVariant::Sum,
                                "integral" => WienerVariant::Integral,
                                other => {
                                    return Err(err(
                                        vl,
                                        format!("unknown variant '{other}' (sum|integral)"),
                                    ))
                                }
                            },
                            None => WienerVariant::Sum,
                        };
                        let (sl, sv) = map.require(sec_line, "set")?;
                        let (pl, pv) = map.require(sec_line, "point")?;
                        let levels = match map.get("levels") {
                            Some((ll, lv)) => parse_one::<u32>(ll, "levels", lv)?,
                            None => 4,
                        };
                        let nodes_per_octave = match map.get("nodes_per_octave") {
                            Some((nl, nv)) => parse_one::<u32>(nl, "nodes_per_octave", nv)?,
                            None => 2,
                        };
                        if levels < 1 || nodes_per_octave < 1 {
                            return Err(err(kl, "levels and nodes_per_octave must be ≥ 1"));
                        }
                        TaskRule::Wiener {
                            variant,
                            set: require_set(sl, &sv)?,
                            point: parse_floats(pl, "point", &pv, dim)?,
                            levels,
                            nodes_per_octave,
                        }
                    }
                    "fine" => {
                        let (sl, sv) = map.require(sec_line, "set")?;
                        let (pl, pv) = map.require(sec_line, "samples")?;
                        let levels = match map.get("levels") {
                            Some((ll, lv)) => parse_one::<u32>(ll, "levels", lv)?,
                            None => 4,
                        };
                        TaskRule::FineOpen {
                            set: require_set(sl, &sv)?,
                            samples: parse_points(pl, "samples", &pv, dim)?,
                            levels,
                        }
                    }
                    "properties" => {
                        let trials = match map.get("trials") {
                            Some((tl, tv)) => parse_one::<u32>(tl, "trials", tv)?,
                            None => 5,
                        };
                        if trials < 1 {
                            return Err(err(kl, "trials must be ≥ 1"));
                        }
                        let seed = match map.get("seed") {
                            Some((sl, sv)) => Some(parse_one::<u64>(sl, "seed", sv)?),
                            None => None,
                        };
                        TaskRule::Axioms { trials, seed }
                    }
                    "spine" => {
                        let sp_dim = match map.get("dim") {
                            Some((dl, dv)) => parse_one::<usize>(dl, "dim", dv)?,
                            None => 2,
                        };
                        let resolution = match map.get("n") {
                            Some((nl, nv)) => parse_one::<usize>(nl, "n", nv)?,
                            None => 257,
                        };
                        if !(2..=3).contains(&sp_dim) {
                            return Err(err(kl, "spine dim must be 2 or 3"));
                        }
                        TaskRule::Spine { dim: sp_dim, resolution }
                    }
                    other => {
                        return Err(err(
                            kl,
                            format!(
                                "unknown task kind '{other}' \
                                 (capacity|wiener|fine|properties|spine)"
                            ),
                        ))
                    }
                };
                map.reject_unknown()?;
                tasks.push(TaskDef { name, line: sec_line, rule });
            }
        }
    }

    let domain = domain.ok_or_else(|| err(1, "missing [domain] section"))?;
    let exponent = exponent.ok_or_else(|| err(1, "missing [exponent] section"))?;
    let weight = weight.ok_or_else(|| err(1, "missing [weight] section"))?;
    Ok(Scenario { domain, exponent, weight, solver, seed, sets, tasks })
}

fn validate_name(line: usize, name: &str) -> Result<()> {
    let mut chars = name.chars();
    let head_ok = chars.next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false);
    if !head_ok || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(err(line, format!("invalid name '{name}'")));
    }
    Ok(())
}

impl Scenario {
    /// Loads and validates a scenario file.
    pub fn from_path(path: &Path) -> Result<Scenario> {
        parse_scenario(&fs::read_to_string(path)?)
    }

    /// Ready-made scenario texts shipped with the tool.
    pub fn builtin(name: &str) -> Option<&'static str> {
        match name {
            "annulus2d" => Some(ANNULUS2D),
            _ => None,
        }
    }
}

/// Condenser capacity of the unit disk inside the disk of radius 2, with a
/// heatmap of the minimizer; the flat-exponent reference case.
const ANNULUS2D: &str = "\
# Capacity of the closed unit disk relative to the open disk of radius 2.
[domain]
dim = 2
extent = -2 2 -2 2
n = 257 257

[exponent]
expr = 2

[weight]
expr = 1

[set K]
kind = ball
center = 0 0
radius = 1

[set OMEGA]
kind = ball
center = 0 0
radius = 2

[task annulus]
kind = capacity
compact = K
domain = OMEGA
heatmap = true
";

// ── set construction ─────────────────────────────────────────────────────

/// Rasterizes every named set in file order.
pub fn build_sets(
    sc: &Scenario,
    grid: &Grid<f64>,
) -> Result<BTreeMap<String, GridSet<f64>>> {
    let mut out: BTreeMap<String, GridSet<f64>> = BTreeMap::new();
    for def in &sc.sets {
        let set = match &def.rule {
            SetRule::Ball { center, radius } => rasterize_ball(center, *radius, grid)
                .map_err(|e| err(def.line, format!("set '{}': {e}", def.name)))?,
            SetRule::Rect { lo, hi } => rasterize_rect(lo, hi, grid)
                .map_err(|e| err(def.line, format!("set '{}': {e}", def.name)))?,
            SetRule::Halfspace { axis, sense, value } => {
                rasterize_halfspace(*axis, *sense, *value, grid)
                    .map_err(|e| err(def.line, format!("set '{}': {e}", def.name)))?
            }
            SetRule::Predicate { lhs, cmp, rhs, .. } => {
                crate::fieldexpr::eval_predicate(lhs, *cmp, rhs, grid)
                    .map_err(|e| err(def.line, format!("set '{}': {e}", def.name)))?
            }
            SetRule::Algebra { ast, .. } => ast
                .eval(&out)
                .map_err(|e| err(def.line, format!("set '{}': {e}", def.name)))?,
        };
        out.insert(def.name.clone(), set);
    }
    Ok(out)
}

// ── runner ───────────────────────────────────────────────────────────────

/// One `results.csv` row.
#[derive(Clone, Debug, Serialize)]
pub struct TaskRow {
    pub task: String,
    pub kind: String,
    pub value: Option<f64>,
    pub value2: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<u64>,
    pub wall_ms: u128,
}

/// Outcome of a scenario run.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<TaskRow>,
    /// Tasks that errored or did not converge.
    pub failed_tasks: Vec<String>,
    /// Property tasks whose check reported failure.
    pub failed_properties: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub csv_path: PathBuf,
}

impl RunSummary {
    /// True when every task ran, converged, and every property task passed.
    pub fn ok(&self) -> bool {
        self.failed_tasks.is_empty() && self.failed_properties.is_empty()
    }
}

/// Formats a float at 10 significant digits for the CSV.
fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.9e}")
    }
}

fn csv_cell_f(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

/// Serializes `value` as pretty-printed JSON and writes it atomically
/// (temporary file plus rename, so readers never observe a partial file).
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_atomic(path, body.as_bytes())
}

/// Executes every task and writes `results.csv` plus per-task artifacts into
/// `out_dir` (created if needed).
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let mut summary = RunSummary {
        rows: Vec::new(),
        failed_tasks: Vec::new(),
        failed_properties: Vec::new(),
        artifacts: Vec::new(),
        csv_path: out_dir.join("results.csv"),
    };
    run_tasks(sc, out_dir, "", &mut summary)?;

    let mut csv = String::from("task,kind,value,value2,converged,iterations,wall_ms\n");
    for r in &summary.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.task,
            r.kind,
            csv_cell_f(r.value),
            csv_cell_f(r.value2),
            r.converged.map(|b| b.to_string()).unwrap_or_default(),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            r.wall_ms
        ));
    }
    write_atomic(&summary.csv_path, csv.as_bytes())?;
    Ok(summary)
}

fn run_tasks(
    sc: &Scenario,
    out_dir: &Path,
    prefix: &str,
    summary: &mut RunSummary,
) -> Result<()> {
    let grid = sc.domain.build()?;
    let p = ExponentField::from_expr(grid, &sc.exponent)?;
    let w = WeightField::from_expr(grid, &sc.weight)?;
    let sets = build_sets(sc, &grid)?;
    let cache = CapacityCache::new();

    for task in &sc.tasks {
        let label = format!("{prefix}{}", task.name);
        let started = Instant::now();
        let result = run_one(task, &label, sc, &grid, &p, &w, &sets, &cache, out_dir, summary);
        match result {
            Ok(Some(mut row)) => {
                row.wall_ms = started.elapsed().as_millis();
                summary.rows.push(row);
            }
            Ok(None) => {} // spine: sub-rows already recorded
            Err(e) => {
                eprintln!("task {label} failed: {e}");
                summary.rows.push(TaskRow {
                    task: label.clone(),
                    kind: "error".into(),
                    value: None,
                    value2: None,
                    converged: Some(false),
                    iterations: None,
                    wall_ms: started.elapsed().as_millis(),
                });
                summary.failed_tasks.push(label);
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    task: &TaskDef,
    label: &str,
    sc: &Scenario,
    _grid: &Grid<f64>,
    p: &ExponentField<f64>,
    w: &WeightField<f64>,
    sets: &BTreeMap<String, GridSet<f64>>,
    cache: &CapacityCache<f64>,
    out_dir: &Path,
    summary: &mut RunSummary,
) -> Result<Option<TaskRow>> {
    let set_of = |name: &str| -> &GridSet<f64> {
        sets.get(name).expect("set names validated at load time")
    };
    match &task.rule {
        TaskRule::Capacity { compact, domain, heatmap } => {
            let res = cache.minimize(set_of(compact), set_of(domain), p, w, &sc.solver)?;
            if *heatmap {
                let path = out_dir.join(format!("{label}.svg"));
                emit_heatmap(&res.minimizer, &path)?;
                summary.artifacts.push(path);
            }
            if !res.converged {
                summary.failed_tasks.push(label.to_string());
            }
            Ok(Some(TaskRow {
                task: label.to_string(),
                kind: "capacity".into(),
                value: Some(res.value),
                value2: None,
                converged: Some(res.converged),
                iterations: Some(res.iterations as u64),
                wall_ms: 0,
            }))
        }
        TaskRule::Wiener { variant, set, point, levels, nodes_per_octave } => {
            let (kind, report) = match variant {
                WienerVariant::Sum => (
                    "wiener_sum",
                    wiener_sum(set_of(set), point, p, w, *levels, &sc.solver, cache)?,
                ),
                WienerVariant::Integral => (
                    "wiener_integral",
                    wiener_integral(
                        set_of(set),
                        point,
                        p,
                        w,
                        *nodes_per_octave,
                        &sc.solver,
                        cache,
                    )?,
                ),
            };
            let path = out_dir.join(format!("{label}.json"));
            write_json(&path, &report)?;
            summary.artifacts.push(path);
            Ok(Some(TaskRow {
                task: label.to_string(),
                kind: kind.into(),
                value: Some(report.total),
                value2: report.quadrature_value,
                converged: None,
                iterations: None,
                wall_ms: 0,
            }))
        }
        TaskRule::FineOpen { set, samples, levels } => {
            let diag =
                finely_open_diagnostic(set_of(set), samples, p, w, *levels, &sc.solver, cache)?;
            let path = out_dir.join(format!("{label}.json"));
            write_json(&path, &diag)?;
            summary.artifacts.push(path);
            let thin = diag
                .samples
                .iter()
                .filter(|s| s.verdict == crate::wiener::Thinness::Thin)
                .count();
            Ok(Some(TaskRow {
                task: label.to_string(),
                kind: "fine_open".into(),
                value: Some(thin as f64),
                value2: Some(diag.samples.len() as f64),
                converged: None,
                iterations: None,
                wall_ms: 0,
            }))
        }
        TaskRule::Axioms { trials, seed } => {
            let rep = check_capacity_axioms(
                seed.unwrap_or(sc.seed),
                *trials,
                p,
                w,
                &sc.solver,
                cache,
            )?;
            let path = out_dir.join(format!("{label}.json"));
            write_json(&path, &rep)?;
            summary.artifacts.push(path);
            if !rep.pass {
                summary.failed_properties.push(label.to_string());
            }
            Ok(Some(TaskRow {
                task: label.to_string(),
                kind: "properties".into(),
                value: Some(rep.failures as f64),
                value2: Some(rep.worst_slack),
                converged: Some(rep.pass),
                iterations: Some(rep.trials as u64),
                wall_ms: 0,
            }))
        }
        TaskRule::Spine { dim, resolution } => {
            let sub = spine_scenario(*dim, *resolution)?;
            run_tasks(&sub, out_dir, &format!("{label}_"), summary)?;
            Ok(None)
        }
    }
}

// ── the standard property battery ────────────────────────────────────────

/// Battery size profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Profile> {
        match s {
            "quick" => Some(Profile::Quick),
            "full" => Some(Profile::Full),
            _ => None,
        }
    }
}

/// Report of one battery run: every property check with its profile sizes.
#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub profile: String,
    pub reports: Vec<PropertyReport>,
    pub pass: bool,
}

/// Runs the standard verification battery (capacity axioms on flat and
/// variable fields in 1D and 2D, nested-family limits, both comparability
/// checks, and the Wiener sum/integral agreement cases) at profile-dependent
/// sizes.  Deterministic for a fixed seed and profile.
pub fn property_suite(seed: u64, profile: Profile) -> Result<SuiteReport> {
    let (n2, trials_flat, trials_var, i_max) = match profile {
        Profile::Quick => (129usize, 6u32, 3u32, 4u32),
        Profile::Full => (257usize, 12u32, 6u32, 5u32),
    };
    let mut reports: Vec<PropertyReport> = Vec::new();

    // 1D axioms: cheap, closed-form-friendly
    {
        let g = Grid::<f64>::new(1, &[(-2.0, 2.0)], &[1025])?;
        let p = ExponentField::constant(g, 2.0)?;
        let w = WeightField::constant(g, 1.0)?;
        let cache = CapacityCache::new();
        let mut rep = check_capacity_axioms(
            seed,
            trials_flat,
            &p,
            &w,
            &SolverOptions::default(),
            &cache,
        )?;
        rep.name = "capacity_axioms_1d".into();
        reports.push(rep);
    }

    let g = Grid::<f64>::new(2, &[(-2.0, 2.0), (-2.0, 2.0)], &[n2, n2])?;
    let opts = SolverOptions::default();
    let flat_p = ExponentField::constant(g, 2.0)?;
    let flat_w = WeightField::constant(g, 1.0)?;
    let cache = CapacityCache::new();

    // 2D axioms, flat fields
    {
        let mut rep = check_capacity_axioms(seed, trials_flat, &flat_p, &flat_w, &opts, &cache)?;
        rep.name = "capacity_axioms_2d".into();
        reports.push(rep);
    }

    // 2D axioms, variable exponent and weight
    {
        let p = ExponentField::from_expr(g, "2 + 0.5*sin(x1)")?;
        let w = WeightField::from_expr(g, "1 + rho^2")?;
        let var_cache = CapacityCache::new();
        let mut rep = check_capacity_axioms(seed + 1, trials_var, &p, &w, &opts, &var_cache)?;
        rep.name = "capacity_axioms_2d_variable".into();
        reports.push(rep);
    }

    // nested-family limits: shrinking balls above the unit disk
    {
        let omega = rasterize_ball(&[0.0, 0.0], 1.9, &g)?;
        let family: Vec<GridSet<f64>> = (1..=5)
            .map(|k| rasterize_ball(&[0.0, 0.0], 1.0 + 0.5f64.powi(k), &g))
            .collect::<Result<_>>()?;
        reports.push(check_capacity_limits(
            &family, &omega, &flat_p, &flat_w, &opts, &cache, None,
        )?);
    }

    // comparability in a narrow radius band
    reports.push(check_ball_measure_comparability(
        &[0.0, 0.0],
        &[0.9, 1.0, 1.1],
        &flat_p,
        &flat_w,
        &opts,
        &cache,
    )?);

    // reference-ball enlargement
    {
        let e = rasterize_ball(&[0.0, 0.0], 0.5, &g)?;
        reports.push(check_annulus_comparability(
            &e,
            &[0.0, 0.0],
            0.5,
            &[0.5, 0.75, 1.0],
            &flat_p,
            &flat_w,
            &opts,
            &cache,
        )?);
    }

    // Wiener sum vs integral on the standard case battery
    {
        let origin = vec![0.0, 0.0];
        let cases = vec![
            (GridSet::empty(g), origin.clone()),
            (rasterize_halfspace(1, Sense::Lt, 0.0, &g)?, origin.clone()),
            (rasterize_ball(&[0.0, 0.0], 0.5, &g)?.complement(), origin),
        ];
        reports.push(check_wiener_equivalence(&cases, &flat_p, &flat_w, i_max, &opts, &cache)?);
    }

    let pass = reports.iter().all(|r| r.pass);
    Ok(SuiteReport {
        seed,
        profile: match profile {
            Profile::Quick => "quick".into(),
            Profile::Full => "full".into(),
        },
        reports,
        pass,
    })
}
