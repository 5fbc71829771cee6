//  Copyright 2026 The nigp-cms Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

//! Double exponential quadrature in log space.
//!
//! Finite intervals use the tanh-sinh map y = tanh(π/2 · sinh t) and the half
//! line uses the exp-sinh map x = exp(π/2 · sinh t). The trapezoid rule in t with
//! step h = 2^−level is refined by halving h until two successive levels agree.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use super::special::LogSumExp;
use crate::error::{Error, Result};

/// Truncation of the finite map; the endpoint gap 1 − |y| reaches about 1e−40.
const FINITE_T_MAX: f64 = 4.1;
/// Truncation of the half-line map, about x ∈ [1e−31, 1e137].
const TAIL_T_MIN: f64 = -4.5;
const TAIL_T_MAX: f64 = 6.0;
/// Terms this far below the largest one are treated as negligible when pruning.
const PRUNE_DEPTH: f64 = 80.0;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const MAX_LEVEL: u32 = 12;

/// Integration domain of a canonical rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// [0, 1]
    Unit,
    /// [0, +∞)
    HalfLine,
    /// [−1, 1]
    Symmetric,
}

/// A complete rule at a fixed level with nodes strictly inside the domain.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub domain: Domain,
    pub level: u32,
    pub nodes: Vec<f64>,
    /// 1 − x for the finite domains, computed without cancellation; unused on the half line.
    pub complements: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// Builds the full rule on `domain` with step 2^−level.
pub fn tanh_sinh_rule(domain: Domain, level: u32) -> Result<QuadratureRule> {
    if level > MAX_LEVEL {
        return Err(Error::invalid(format!("quadrature level {level} exceeds {MAX_LEVEL}")));
    }
    let segment = match domain {
        Domain::Unit => Segment::unit(),
        Domain::HalfLine => Segment::half_line(),
        Domain::Symmetric => Segment::Finite { a: -1.0, b: 1.0, b_complement: 0.0 },
    };
    let log_h = -(level as f64) * std::f64::consts::LN_2;
    let mut rule =
        QuadratureRule { domain, level, nodes: Vec::new(), complements: Vec::new(), log_weights: Vec::new() };
    for lvl in 0..=level {
        for node in segment.increments(lvl) {
            let (x, xc, lw) = segment.map(node);
            rule.nodes.push(x);
            rule.complements.push(xc);
            rule.log_weights.push(lw + log_h);
        }
    }
    Ok(rule)
}

/// ln ∫ f over the rule's domain where `f_log(x, 1 − x)` returns ln f(x).
pub fn integrate_log<F: FnMut(f64, f64) -> f64>(mut f_log: F, rule: &QuadratureRule) -> f64 {
    let mut acc = LogSumExp::new();
    for ((&x, &xc), &lw) in rule.nodes.iter().zip(&rule.complements).zip(&rule.log_weights) {
        acc.push(lw + f_log(x, xc));
    }
    acc.value()
}

/// Canonical node of the t-grid before mapping to a segment.
#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    /// tanh-sinh: y. exp-sinh: exp(π/2 sinh t).
    y: f64,
    /// tanh-sinh: 1 − |y|. exp-sinh: unused.
    yc: f64,
    /// Log of the unscaled weight dy/dt.
    log_w: f64,
}

struct NodeTable {
    levels: Vec<Vec<Node>>,
}

fn finite_node(t: f64) -> Node {
    let u = FRAC_PI_2 * t.sinh();
    let au = u.abs();
    let e = (-2.0 * au).exp();
    let yc = 2.0 * e / (1.0 + e);
    let y = (1.0 - yc).copysign(t);
    // ln cosh(u) = |u| + ln(1 + e^{−2|u|}) − ln 2
    let ln_cosh_u = au + e.ln_1p() - std::f64::consts::LN_2;
    let log_w = FRAC_PI_2.ln() + ln_cosh(t) - 2.0 * ln_cosh_u;
    Node { t, y, yc, log_w }
}

fn tail_node(t: f64) -> Node {
    let s = FRAC_PI_2 * t.sinh();
    Node { t, y: s.exp(), yc: 0.0, log_w: FRAC_PI_2.ln() + ln_cosh(t) + s }
}

fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn build_table(t_min: f64, t_max: f64, node: fn(f64) -> Node) -> NodeTable {
    let mut levels = Vec::with_capacity(MAX_LEVEL as usize + 1);
    for level in 0..=MAX_LEVEL {
        let h = (-(level as f64)).exp2();
        let lo = (t_min / h).ceil() as i64;
        let hi = (t_max / h).floor() as i64;
        let nodes: Vec<Node> =
            (lo..=hi).filter(|j| level == 0 || j.rem_euclid(2) == 1).map(|j| node(j as f64 * h)).collect();
        levels.push(nodes);
    }
    NodeTable { levels }
}

fn finite_table() -> &'static NodeTable {
    static TABLE: OnceLock<NodeTable> = OnceLock::new();
    TABLE.get_or_init(|| build_table(-FINITE_T_MAX, FINITE_T_MAX, finite_node))
}

fn tail_table() -> &'static NodeTable {
    static TABLE: OnceLock<NodeTable> = OnceLock::new();
    TABLE.get_or_init(|| build_table(TAIL_T_MIN, TAIL_T_MAX, tail_node))
}

/// A piece of an integration range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// [a, b] with 1 − b supplied exactly so integrands get an accurate 1 − x.
    Finite { a: f64, b: f64, b_complement: f64 },
    /// [start, ∞) mapped as x = start + scale · exp(π/2 sinh t).
    Tail { start: f64, scale: f64 },
}

impl Segment {
    pub fn unit() -> Self {
        Segment::Finite { a: 0.0, b: 1.0, b_complement: 0.0 }
    }

    pub fn half_line() -> Self {
        Segment::Tail { start: 0.0, scale: 1.0 }
    }

    fn table(&self) -> &'static NodeTable {
        match self {
            Segment::Finite { .. } => finite_table(),
            Segment::Tail { .. } => tail_table(),
        }
    }

    fn increments(&self, level: u32) -> &'static [Node] {
        &self.table().levels[level as usize]
    }

    /// (x, 1 − x, log weight without the step size).
    #[inline]
    fn map(&self, node: &Node) -> (f64, f64, f64) {
        match *self {
            Segment::Finite { a, b, b_complement } => {
                let half = 0.5 * (b - a);
                let (lower, upper) = if node.t >= 0.0 {
                    (half * (2.0 - node.yc), half * node.yc)
                } else {
                    (half * node.yc, half * (2.0 - node.yc))
                };
                (a + lower, b_complement + upper, half.ln() + node.log_w)
            }
            Segment::Tail { start, scale } => {
                let x = start + scale * node.y;
                (x, 1.0 - x, scale.ln() + node.log_w)
            }
        }
    }
}

/// Stopping rule for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub tolerance: f64,
    pub start_level: u32,
    pub min_level: u32,
    pub max_level: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { tolerance: DEFAULT_TOLERANCE, start_level: 3, min_level: 4, max_level: MAX_LEVEL }
    }
}

/// ln ∫ f over `segment`, refining until successive levels agree in log space.
pub fn integrate_log_adaptive<F: FnMut(f64, f64) -> f64>(f_log: F, segment: Segment) -> Result<f64> {
    integrate_log_with(f_log, segment, &QuadratureOptions::default())
}

pub fn integrate_log_with<F: FnMut(f64, f64) -> f64>(
    mut f_log: F,
    segment: Segment,
    options: &QuadratureOptions,
) -> Result<f64> {
    let mut out = [0.0];
    integrate_log_many(|x, xc, v: &mut [f64]| v[0] = f_log(x, xc), 1, segment, options, &mut out)?;
    Ok(out[0])
}

/// ln ∫ over a union of segments, each refined independently.
pub fn integrate_log_segments<F: FnMut(f64, f64) -> f64>(mut f_log: F, segments: &[Segment]) -> Result<f64> {
    let options = QuadratureOptions::default();
    let mut acc = LogSumExp::new();
    for &segment in segments {
        acc.push(integrate_log_with(&mut f_log, segment, &options)?);
    }
    Ok(acc.value())
}

/// Integrates `count` integrands that share their nodes. `f_log(x, 1 − x, out)` writes
/// each ln f_i(x) into `out`; results land in `results`.
pub fn integrate_log_many<F: FnMut(f64, f64, &mut [f64])>(
    mut f_log: F,
    count: usize,
    segment: Segment,
    options: &QuadratureOptions,
    results: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(results.len(), count);
    let mut values = vec![0.0; count];
    let mut sums = vec![LogSumExp::new(); count];
    let mut eval = |node: &Node, sums: &mut [LogSumExp], values: &mut [f64]| -> Result<f64> {
        let (x, xc, lw) = segment.map(node);
        f_log(x, xc, values);
        for (s, v) in sums.iter_mut().zip(values.iter_mut()) {
            if v.is_nan() {
                return Err(Error::invalid(format!("integrand returned NaN at x = {x}")));
            }
            *v += lw;
            s.push(*v);
        }
        Ok(lw)
    };

    // Starting level: every node, remembering terms to locate where the mass sits.
    let mut terms: Vec<(f64, usize)> = Vec::new();
    let mut stored: Vec<f64> = Vec::new();
    for level in 0..=options.start_level {
        for node in segment.increments(level) {
            eval(node, &mut sums, &mut values)?;
            terms.push((node.t, stored.len()));
            stored.extend_from_slice(&values);
        }
    }
    let peaks: Vec<f64> = sums.iter().map(|s| s.max()).collect();
    if peaks.iter().any(|p| *p == f64::INFINITY) {
        return Err(Error::invalid("integrand is infinite at a quadrature node"));
    }
    let h_start = (-(options.start_level as f64)).exp2();
    let mut t_lo = f64::INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    for &(t, offset) in &terms {
        let significant = stored[offset..offset + count]
            .iter()
            .zip(&peaks)
            .any(|(v, p)| *p > f64::NEG_INFINITY && *v >= p - PRUNE_DEPTH);
        if significant {
            t_lo = t_lo.min(t);
            t_hi = t_hi.max(t);
        }
    }
    if t_lo > t_hi {
        results.iter_mut().for_each(|r| *r = f64::NEG_INFINITY);
        return Ok(());
    }
    t_lo -= h_start;
    t_hi += h_start;

    let estimate = |sums: &[LogSumExp], level: u32, out: &mut [f64]| {
        let log_h = -(level as f64) * std::f64::consts::LN_2;
        for (o, s) in out.iter_mut().zip(sums) {
            *o = log_h + s.value();
        }
    };
    let mut previous = vec![0.0; count];
    estimate(&sums, options.start_level, &mut previous);
    let mut current = vec![0.0; count];
    for level in options.start_level + 1..=options.max_level {
        let nodes = segment.increments(level);
        let first = nodes.partition_point(|n| n.t < t_lo);
        let last = nodes.partition_point(|n| n.t <= t_hi);
        for node in &nodes[first..last] {
            eval(node, &mut sums, &mut values)?;
        }
        estimate(&sums, level, &mut current);
        let agreed = current.iter().zip(&previous).all(|(c, p)| (c == p) || (c - p).abs() <= options.tolerance);
        if level >= options.min_level && agreed {
            results.copy_from_slice(&current);
            return Ok(());
        }
        if level == options.max_level {
            let worst = current
                .iter()
                .zip(&previous)
                .max_by(|a, b| (a.0 - a.1).abs().total_cmp(&(b.0 - b.1).abs()))
                .map(|(c, p)| (*c, *p))
                .unwrap_or((f64::NAN, f64::NAN));
            return Err(Error::Quadrature { level, last: worst.0, previous: worst.1 });
        }
        std::mem::swap(&mut previous, &mut current);
    }
    unreachable!("the level loop returns at max_level")
}

/// Finds a sign change of `g` on [lo, hi] by bisection; `None` when g has the same
/// sign at both ends.
pub(crate) fn bisect_sign_change<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, iterations: u32) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let ga = g(a);
    let gb = g(b);
    if ga.is_nan() || gb.is_nan() || (ga > 0.0) == (gb > 0.0) {
        return None;
    }
    let rising = gb > 0.0;
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        let gm = g(mid);
        if (gm > 0.0) == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Splits [0, 1] at the logistic point u, giving 1 − x exactly on both sides.
pub(crate) fn unit_split(u: f64) -> [Segment; 2] {
    let s = 1.0 / (1.0 + (-u).exp());
    let sc = 1.0 / (1.0 + u.exp());
    [Segment::Finite { a: 0.0, b: s, b_complement: sc }, Segment::Finite { a: s, b: 1.0, b_complement: 0.0 }]
}

/// Splits [0, ∞) at s > 0.
pub(crate) fn half_line_split(s: f64) -> [Segment; 2] {
    [Segment::Finite { a: 0.0, b: s, b_complement: 1.0 - s }, Segment::Tail { start: s, scale: s }]
}
