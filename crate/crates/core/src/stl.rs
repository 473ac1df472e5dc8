//! Signal temporal logic over discrete-time, real-valued signals.
//!
//! Formulas are monitored two ways: a Boolean semantics and a quantitative
//! (robustness) semantics whose sign carries the Boolean verdict. Robustness
//! additionally lowers to a [`ComputationGraph`] so the same formula can be
//! differentiated for guidance and bounded for verification.
//!
//! Time is unit-step and integer: interval bounds `[a, b]` count signal
//! indices. Until's Boolean semantics uses the half-open inner range
//! `[t, t')` while its robustness uses the closed `[t, t']`; both are kept
//! exactly as defined, and sign soundness is only asserted where robustness
//! is bounded away from zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ComputationGraph, GraphBuilder, NodeId};
use crate::tensor::Tensor;

/// Real-valued expression trees over a single time-step state vector.
///
/// An atomic predicate holds when its expression evaluates strictly above
/// zero; exactly-zero robustness is reported as violating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredicateExpr {
    Constant { value: f64 },
    /// The `dim`-th component of the state.
    StateComponent { dim: usize },
    /// `coefficients · state + offset`.
    AffineCombination { coefficients: Vec<f64>, offset: f64 },
    Negate { child: Box<PredicateExpr> },
    Min2 { lhs: Box<PredicateExpr>, rhs: Box<PredicateExpr> },
    Max2 { lhs: Box<PredicateExpr>, rhs: Box<PredicateExpr> },
    /// `|child|`, as `max(child, -child)`.
    Abs { child: Box<PredicateExpr> },
    /// Scaled ∞-norm clearance from an axis-aligned box:
    /// `max_i (|s_i - center_i| - scale_i)`.
    ///
    /// Positive outside the box, negative inside; per-dimension scales are
    /// half-extents.
    InfNormDistance { center: Vec<f64>, scale: Vec<f64> },
}

impl PredicateExpr {
    pub fn affine(coefficients: Vec<f64>, offset: f64) -> Self {
        PredicateExpr::AffineCombination {
            coefficients,
            offset,
        }
    }

    /// Validate dimension indices and vector lengths against a state size.
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        match self {
            PredicateExpr::Constant { .. } => Ok(()),
            PredicateExpr::StateComponent { dim } => {
                if *dim >= state_dim {
                    Err(Error::InvalidFormula(format!(
                        "state component {dim} out of range for {state_dim}-dim state"
                    )))
                } else {
                    Ok(())
                }
            }
            PredicateExpr::AffineCombination { coefficients, .. } => {
                if coefficients.len() != state_dim {
                    Err(Error::InvalidFormula(format!(
                        "affine coefficients length {} vs state dim {state_dim}",
                        coefficients.len()
                    )))
                } else {
                    Ok(())
                }
            }
            PredicateExpr::Negate { child } | PredicateExpr::Abs { child } => {
                child.validate(state_dim)
            }
            PredicateExpr::Min2 { lhs, rhs } | PredicateExpr::Max2 { lhs, rhs } => {
                lhs.validate(state_dim)?;
                rhs.validate(state_dim)
            }
            PredicateExpr::InfNormDistance { center, scale } => {
                if center.len() != state_dim || scale.len() != state_dim {
                    Err(Error::InvalidFormula(format!(
                        "inf-norm vectors length {}/{} vs state dim {state_dim}",
                        center.len(),
                        scale.len()
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Evaluate at one state vector.
    pub fn eval(&self, state: &[f64]) -> f64 {
        match self {
            PredicateExpr::Constant { value } => *value,
            PredicateExpr::StateComponent { dim } => state[*dim],
            PredicateExpr::AffineCombination {
                coefficients,
                offset,
            } => {
                coefficients
                    .iter()
                    .zip(state)
                    .map(|(c, s)| c * s)
                    .sum::<f64>()
                    + offset
            }
            PredicateExpr::Negate { child } => -child.eval(state),
            PredicateExpr::Min2 { lhs, rhs } => lhs.eval(state).min(rhs.eval(state)),
            PredicateExpr::Max2 { lhs, rhs } => lhs.eval(state).max(rhs.eval(state)),
            PredicateExpr::Abs { child } => child.eval(state).abs(),
            PredicateExpr::InfNormDistance { center, scale } => state
                .iter()
                .zip(center)
                .zip(scale)
                .map(|((s, c), l)| (s - c).abs() - l)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// An STL formula over integer time steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Formula {
    True,
    Atomic { pred: PredicateExpr },
    Not { child: Box<Formula> },
    And { lhs: Box<Formula>, rhs: Box<Formula> },
    Or { lhs: Box<Formula>, rhs: Box<Formula> },
    Until {
        lower: usize,
        upper: usize,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Eventually {
        lower: usize,
        upper: usize,
        child: Box<Formula>,
    },
    Globally {
        lower: usize,
        upper: usize,
        child: Box<Formula>,
    },
}

impl Formula {
    pub fn atomic(pred: PredicateExpr) -> Self {
        Formula::Atomic { pred }
    }

    pub fn not(child: Formula) -> Self {
        Formula::Not {
            child: Box::new(child),
        }
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn until(lower: usize, upper: usize, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until {
            lower,
            upper,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn eventually(lower: usize, upper: usize, child: Formula) -> Self {
        Formula::Eventually {
            lower,
            upper,
            child: Box::new(child),
        }
    }

    pub fn globally(lower: usize, upper: usize, child: Formula) -> Self {
        Formula::Globally {
            lower,
            upper,
            child: Box::new(child),
        }
    }

    /// Conjunction of several formulas (left fold; empty input is `True`).
    pub fn conj(mut parts: Vec<Formula>) -> Self {
        if parts.is_empty() {
            return Formula::True;
        }
        let mut acc = parts.remove(0);
        for p in parts {
            acc = Formula::and(acc, p);
        }
        acc
    }

    /// Check interval order and predicate dimensions.
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        match self {
            Formula::True => Ok(()),
            Formula::Atomic { pred } => pred.validate(state_dim),
            Formula::Not { child } => child.validate(state_dim),
            Formula::And { lhs, rhs } | Formula::Or { lhs, rhs } => {
                lhs.validate(state_dim)?;
                rhs.validate(state_dim)
            }
            Formula::Until {
                lower,
                upper,
                lhs,
                rhs,
            } => {
                if lower > upper {
                    return Err(Error::InvalidFormula(format!(
                        "until interval [{lower}, {upper}] out of order"
                    )));
                }
                lhs.validate(state_dim)?;
                rhs.validate(state_dim)
            }
            Formula::Eventually { lower, upper, child }
            | Formula::Globally { lower, upper, child } => {
                if lower > upper {
                    return Err(Error::InvalidFormula(format!(
                        "interval [{lower}, {upper}] out of order"
                    )));
                }
                child.validate(state_dim)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A fixed-rate, real-valued signal: `T` time steps of `n`-dimensional state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Tensor,
}

impl Signal {
    /// Wrap a `[T, n]` tensor. Requires `T >= 1` and finite entries.
    pub fn new(values: Tensor) -> Result<Self> {
        if values.shape().len() != 2 || values.rows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "signal wants shape [T, n] with T >= 1, got {:?}",
                values.shape()
            )));
        }
        if !values.all_finite() {
            return Err(Error::InvalidFormula(
                "signal has non-finite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = rows.len();
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(t * n);
        for r in &rows {
            if r.len() != n {
                return Err(Error::ShapeMismatch("ragged signal rows".into()));
            }
            data.extend_from_slice(r);
        }
        Signal::new(Tensor::new(vec![t, n], data)?)
    }

    /// Convenience constructor for 1-dimensional signals.
    pub fn scalar_series(values: &[f64]) -> Result<Self> {
        Signal::new(Tensor::new(vec![values.len(), 1], values.to_vec())?)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.values.cols()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }
}

/// Number of future steps a formula inspects beyond the evaluation instant.
pub fn horizon(formula: &Formula) -> usize {
    match formula {
        Formula::True | Formula::Atomic { .. } => 0,
        Formula::Not { child } => horizon(child),
        Formula::And { lhs, rhs } | Formula::Or { lhs, rhs } => horizon(lhs).max(horizon(rhs)),
        Formula::Until { upper, lhs, rhs, .. } => upper + horizon(lhs).max(horizon(rhs)),
        Formula::Eventually { upper, child, .. } | Formula::Globally { upper, child, .. } => {
            upper + horizon(child)
        }
    }
}

fn check_horizon(formula: &Formula, signal: &Signal, t: usize) -> Result<()> {
    let needed = t + horizon(formula);
    if needed >= signal.len() {
        return Err(Error::Horizon {
            t,
            needed,
            len: signal.len(),
        });
    }
    Ok(())
}

/// Boolean satisfaction of `formula` by `signal` at time `t`.
pub fn eval_boolean(formula: &Formula, signal: &Signal, t: usize) -> Result<bool> {
    formula.validate(signal.state_dim())?;
    check_horizon(formula, signal, t)?;
    Ok(bool_rec(formula, signal, t))
}

fn bool_rec(formula: &Formula, signal: &Signal, t: usize) -> bool {
    match formula {
        Formula::True => true,
        Formula::Atomic { pred } => pred.eval(signal.state(t)) > 0.0,
        Formula::Not { child } => !bool_rec(child, signal, t),
        Formula::And { lhs, rhs } => bool_rec(lhs, signal, t) && bool_rec(rhs, signal, t),
        Formula::Or { lhs, rhs } => bool_rec(lhs, signal, t) || bool_rec(rhs, signal, t),
        Formula::Until {
            lower,
            upper,
            lhs,
            rhs,
        } => {
            // exists t' in [t+a, t+b] with rhs at t' and lhs on all of [t, t')
            (t + lower..=t + upper).any(|tp| {
                bool_rec(rhs, signal, tp) && (t..tp).all(|ts| bool_rec(lhs, signal, ts))
            })
        }
        Formula::Eventually { lower, upper, child } => {
            (t + lower..=t + upper).any(|tp| bool_rec(child, signal, tp))
        }
        Formula::Globally { lower, upper, child } => {
            (t + lower..=t + upper).all(|tp| bool_rec(child, signal, tp))
        }
    }
}

/// Robustness of `formula` on `signal` at time `t`.
pub fn eval_robustness(formula: &Formula, signal: &Signal, t: usize) -> Result<f64> {
    formula.validate(signal.state_dim())?;
    check_horizon(formula, signal, t)?;
    Ok(rob_rec(formula, signal, t))
}

fn rob_rec(formula: &Formula, signal: &Signal, t: usize) -> f64 {
    match formula {
        Formula::True => f64::INFINITY,
        Formula::Atomic { pred } => pred.eval(signal.state(t)),
        Formula::Not { child } => -rob_rec(child, signal, t),
        Formula::And { lhs, rhs } => rob_rec(lhs, signal, t).min(rob_rec(rhs, signal, t)),
        Formula::Or { lhs, rhs } => rob_rec(lhs, signal, t).max(rob_rec(rhs, signal, t)),
        Formula::Until {
            lower,
            upper,
            lhs,
            rhs,
        } => {
            // sup over t' of min(rhs at t', inf of lhs over the closed [t, t'])
            let mut best = f64::NEG_INFINITY;
            let mut lhs_min = f64::INFINITY;
            for tp in t..=t + upper {
                lhs_min = lhs_min.min(rob_rec(lhs, signal, tp));
                if tp >= t + lower {
                    best = best.max(rob_rec(rhs, signal, tp).min(lhs_min));
                }
            }
            best
        }
        Formula::Eventually { lower, upper, child } => (t + lower..=t + upper)
            .map(|tp| rob_rec(child, signal, tp))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Globally { lower, upper, child } => (t + lower..=t + upper)
            .map(|tp| rob_rec(child, signal, tp))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Output form of [`lower_to_graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoweringForm {
    /// Window min/max emitted as binary `min2`/`max2` trees.
    MinMax,
    /// `min2`/`max2` rewritten into affine + ReLU identities, as the
    /// backward linear relaxation requires.
    ReluForm,
}

/// Name of the lowered graph's single input (the flattened trajectory).
pub const TRAJECTORY_INPUT: &str = "trajectory";

/// Lower robustness at `t = 0` to a computation graph over the flattened
/// `[trajectory_len, state_dim]` signal.
///
/// The graph's scalar output equals [`eval_robustness`] at time zero for
/// every input trajectory. Temporal windows expand into balanced binary
/// min/max trees; subformula values are shared across overlapping windows.
pub fn lower_to_graph(
    formula: &Formula,
    trajectory_len: usize,
    state_dim: usize,
    form: LoweringForm,
) -> Result<ComputationGraph> {
    formula.validate(state_dim)?;
    let h = horizon(formula);
    if h >= trajectory_len {
        return Err(Error::Horizon {
            t: 0,
            needed: h,
            len: trajectory_len,
        });
    }
    let mut builder = GraphBuilder::new();
    let input = builder.input(TRAJECTORY_INPUT, vec![trajectory_len * state_dim]);
    let mut lowerer = Lowerer {
        builder,
        input,
        input_len: trajectory_len * state_dim,
        state_dim,
        memo: HashMap::new(),
    };
    let out = lowerer.lower(formula, 0)?;
    let out_node = match out {
        Lowered::Node(id) => id,
        Lowered::PosInf => lowerer.builder.constant(Tensor::scalar(f64::INFINITY)),
        Lowered::NegInf => lowerer
            .builder
            .constant(Tensor::scalar(f64::NEG_INFINITY)),
    };
    let graph = lowerer.builder.finish(out_node)?;
    Ok(match form {
        LoweringForm::MinMax => graph,
        LoweringForm::ReluForm => graph.rewrite_minmax_to_relu(),
    })
}

/// Either a concrete node or a symbolic infinity from `true`/`¬true`,
/// folded through min/max so infinities only reach the graph when the
/// whole formula is trivial.
#[derive(Clone, Copy)]
enum Lowered {
    Node(NodeId),
    PosInf,
    NegInf,
}

struct Lowerer {
    builder: GraphBuilder,
    input: NodeId,
    input_len: usize,
    state_dim: usize,
    memo: HashMap<(usize, usize), Lowered>,
}

impl Lowerer {
    fn lower(&mut self, formula: &Formula, t: usize) -> Result<Lowered> {
        let key = (formula as *const Formula as usize, t);
        if let Some(&hit) = self.memo.get(&key) {
            return Ok(hit);
        }
        let out = match formula {
            Formula::True => Lowered::PosInf,
            Formula::Atomic { pred } => Lowered::Node(self.lower_pred(pred, t)?),
            Formula::Not { child } => match self.lower(child, t)? {
                Lowered::Node(id) => Lowered::Node(self.builder.neg(id)),
                Lowered::PosInf => Lowered::NegInf,
                Lowered::NegInf => Lowered::PosInf,
            },
            Formula::And { lhs, rhs } => {
                let a = self.lower(lhs, t)?;
                let b = self.lower(rhs, t)?;
                self.min_fold(a, b)?
            }
            Formula::Or { lhs, rhs } => {
                let a = self.lower(lhs, t)?;
                let b = self.lower(rhs, t)?;
                self.max_fold(a, b)?
            }
            Formula::Eventually { lower, upper, child } => {
                let mut window = Vec::with_capacity(upper - lower + 1);
                for tp in t + lower..=t + upper {
                    window.push(self.lower(child, tp)?);
                }
                self.tree_fold(window, false)?
            }
            Formula::Globally { lower, upper, child } => {
                let mut window = Vec::with_capacity(upper - lower + 1);
                for tp in t + lower..=t + upper {
                    window.push(self.lower(child, tp)?);
                }
                self.tree_fold(window, true)?
            }
            Formula::Until {
                lower,
                upper,
                lhs,
                rhs,
            } => {
                // running closed-interval minimum of lhs, combined with rhs
                let mut lhs_min: Option<Lowered> = None;
                let mut candidates = Vec::with_capacity(upper - lower + 1);
                for tp in t..=t + upper {
                    let l = self.lower(lhs, tp)?;
                    lhs_min = Some(match lhs_min {
                        None => l,
                        Some(acc) => self.min_fold(acc, l)?,
                    });
                    if tp >= t + lower {
                        let r = self.lower(rhs, tp)?;
                        candidates.push(self.min_fold(r, lhs_min.unwrap())?);
                    }
                }
                self.tree_fold(candidates, false)?
            }
        };
        self.memo.insert(key, out);
        Ok(out)
    }

    fn min_fold(&mut self, a: Lowered, b: Lowered) -> Result<Lowered> {
        Ok(match (a, b) {
            (Lowered::NegInf, _) | (_, Lowered::NegInf) => Lowered::NegInf,
            (Lowered::PosInf, x) | (x, Lowered::PosInf) => x,
            (Lowered::Node(x), Lowered::Node(y)) => Lowered::Node(self.builder.min2(x, y)?),
        })
    }

    fn max_fold(&mut self, a: Lowered, b: Lowered) -> Result<Lowered> {
        Ok(match (a, b) {
            (Lowered::PosInf, _) | (_, Lowered::PosInf) => Lowered::PosInf,
            (Lowered::NegInf, x) | (x, Lowered::NegInf) => x,
            (Lowered::Node(x), Lowered::Node(y)) => Lowered::Node(self.builder.max2(x, y)?),
        })
    }

    /// Balanced binary fold of a window; `is_min` selects min2 vs max2.
    fn tree_fold(&mut self, mut items: Vec<Lowered>, is_min: bool) -> Result<Lowered> {
        debug_assert!(!items.is_empty());
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut iter = items.into_iter();
            while let Some(a) = iter.next() {
                match iter.next() {
                    Some(b) => next.push(if is_min {
                        self.min_fold(a, b)?
                    } else {
                        self.max_fold(a, b)?
                    }),
                    None => next.push(a),
                }
            }
            items = next;
        }
        Ok(items.pop().unwrap())
    }

    /// Scalar node for a predicate at time `t`. Linear pieces become one
    /// affine row over the whole flattened trajectory.
    fn lower_pred(&mut self, pred: &PredicateExpr, t: usize) -> Result<NodeId> {
        match pred {
            PredicateExpr::Constant { value } => {
                Ok(self.builder.constant(Tensor::scalar(*value)))
            }
            PredicateExpr::StateComponent { dim } => {
                let d = *dim;
                self.affine_row(t, |row, _| row[d] = 1.0)
            }
            PredicateExpr::AffineCombination {
                coefficients,
                offset,
            } => {
                let coeffs = coefficients.clone();
                let ofs = *offset;
                self.affine_row(t, move |row, off| {
                    row.copy_from_slice(&coeffs);
                    *off = ofs;
                })
            }
            PredicateExpr::Negate { child } => {
                let c = self.lower_pred(child, t)?;
                Ok(self.builder.neg(c))
            }
            PredicateExpr::Min2 { lhs, rhs } => {
                let a = self.lower_pred(lhs, t)?;
                let b = self.lower_pred(rhs, t)?;
                self.builder.min2(a, b)
            }
            PredicateExpr::Max2 { lhs, rhs } => {
                let a = self.lower_pred(lhs, t)?;
                let b = self.lower_pred(rhs, t)?;
                self.builder.max2(a, b)
            }
            PredicateExpr::Abs { child } => {
                let c = self.lower_pred(child, t)?;
                let n = self.builder.neg(c);
                self.builder.max2(c, n)
            }
            PredicateExpr::InfNormDistance { center, scale } => {
                // per dimension: |s_i - c_i| - l_i
                //   = max(s_i - (c_i + l_i), -s_i + (c_i - l_i))
                let mut terms = Vec::with_capacity(center.len());
                for i in 0..center.len() {
                    let (ci, li) = (center[i], scale[i]);
                    let pos = self.affine_row(t, move |row, off| {
                        row[i] = 1.0;
                        *off = -(ci + li);
                    })?;
                    let neg = self.affine_row(t, move |row, off| {
                        row[i] = -1.0;
                        *off = ci - li;
                    })?;
                    terms.push(Lowered::Node(self.builder.max2(pos, neg)?));
                }
                match self.tree_fold(terms, false)? {
                    Lowered::Node(id) => Ok(id),
                    _ => unreachable!("inf-norm folds concrete nodes"),
                }
            }
        }
    }

    /// One affine node selecting time step `t`: the weight row is zero
    /// except over the state slice for `t`.
    fn affine_row(
        &mut self,
        t: usize,
        fill: impl FnOnce(&mut [f64], &mut f64),
    ) -> Result<NodeId> {
        let mut weight = vec![0.0; self.input_len];
        let mut offset = 0.0;
        let base = t * self.state_dim;
        fill(&mut weight[base..base + self.state_dim], &mut offset);
        self.builder.affine(
            self.input,
            Tensor::matrix(1, self.input_len, weight)?,
            Tensor::vector(vec![offset]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn s_gt(threshold: f64) -> Formula {
        // predicate s - threshold > 0 over a 1-dim state
        Formula::atomic(PredicateExpr::affine(vec![1.0], -threshold))
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(horizon(&s_gt(0.0)), 0);
        assert_eq!(horizon(&Formula::globally(0, 24, s_gt(0.0))), 24);
        assert_eq!(
            horizon(&Formula::eventually(
                0,
                5,
                Formula::globally(0, 5, s_gt(0.0))
            )),
            10
        );
    }

    #[test]
    fn boolean_semantics_examples() {
        let sig = Signal::scalar_series(&[1.0, 2.0, 3.0]).unwrap();
        assert!(eval_boolean(&Formula::True, &sig, 0).unwrap());
        assert!(eval_boolean(&Formula::globally(0, 2, s_gt(0.0)), &sig, 0).unwrap());
        assert!(eval_boolean(&Formula::eventually(0, 2, s_gt(2.5)), &sig, 0).unwrap());
        assert!(!eval_boolean(&Formula::eventually(0, 1, s_gt(2.5)), &sig, 0).unwrap());
    }

    #[test]
    fn robustness_semantics_examples() {
        let sig = Signal::scalar_series(&[1.0, 2.0, 3.0]).unwrap();
        let g = Formula::globally(0, 2, s_gt(0.0));
        assert_eq!(eval_robustness(&g, &sig, 0).unwrap(), 1.0);
        let e = Formula::eventually(0, 2, s_gt(2.5));
        assert!((eval_robustness(&e, &sig, 0).unwrap() - 0.5).abs() < 1e-15);
        // negation rule
        let f = Formula::until(0, 2, s_gt(0.0), s_gt(2.5));
        let r = eval_robustness(&f, &sig, 0).unwrap();
        let rn = eval_robustness(&Formula::not(f), &sig, 0).unwrap();
        assert_eq!(r, -rn);
    }

    #[test]
    fn horizon_error_when_signal_too_short() {
        let sig = Signal::scalar_series(&[1.0, 2.0]).unwrap();
        let f = Formula::globally(0, 2, s_gt(0.0));
        assert!(matches!(
            eval_boolean(&f, &sig, 0),
            Err(Error::Horizon { .. })
        ));
        assert!(matches!(
            eval_robustness(&f, &sig, 1),
            Err(Error::Horizon { .. })
        ));
    }

    /// Random formula over `dim`-dimensional states with bounded depth and
    /// window sizes. `with_until` selects whether Until may appear: its
    /// Boolean semantics checks the left operand on the half-open `[t, t')`
    /// while robustness takes the inf over the closed `[t, t']`, so the
    /// two-sided sign-agreement property only holds on the Until-free
    /// fragment (see `until_sign_soundness_one_sided` for the direction
    /// that does hold).
    pub fn random_formula_in(
        rng: &mut rng::Rng,
        dim: usize,
        depth: usize,
        with_until: bool,
    ) -> Formula {
        let top = if with_until { 7 } else { 6 };
        let choice = if depth == 0 { 0 } else { rng.gen_range(0..top) };
        match choice {
            0 => {
                let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                Formula::atomic(PredicateExpr::affine(coeffs, rng.gen_range(-1.0..1.0)))
            }
            1 => Formula::not(random_formula_in(rng, dim, depth - 1, with_until)),
            2 => Formula::and(
                random_formula_in(rng, dim, depth - 1, with_until),
                random_formula_in(rng, dim, depth - 1, with_until),
            ),
            3 => Formula::or(
                random_formula_in(rng, dim, depth - 1, with_until),
                random_formula_in(rng, dim, depth - 1, with_until),
            ),
            4 => {
                let a = rng.gen_range(0..2);
                let b = a + rng.gen_range(0..3);
                Formula::eventually(a, b, random_formula_in(rng, dim, depth - 1, with_until))
            }
            5 => {
                let a = rng.gen_range(0..2);
                let b = a + rng.gen_range(0..3);
                Formula::globally(a, b, random_formula_in(rng, dim, depth - 1, with_until))
            }
            _ => {
                let a = rng.gen_range(0..2);
                let b = a + rng.gen_range(0..3);
                Formula::until(
                    a,
                    b,
                    random_formula_in(rng, dim, depth - 1, with_until),
                    random_formula_in(rng, dim, depth - 1, with_until),
                )
            }
        }
    }

    /// Random formula drawing from the full operator set.
    pub fn random_formula(rng: &mut rng::Rng, dim: usize, depth: usize) -> Formula {
        random_formula_in(rng, dim, depth, true)
    }

    pub fn random_signal(rng: &mut rng::Rng, len: usize, dim: usize) -> Signal {
        let data: Vec<f64> = (0..len * dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        Signal::new(Tensor::new(vec![len, dim], data).unwrap()).unwrap()
    }

    #[test]
    fn soundness_sign_agreement() {
        let mut r = rng::master(42);
        let mut checked = 0;
        while checked < 1000 {
            let dim = r.gen_range(1..3);
            let f = random_formula_in(&mut r, dim, 3, false);
            let extra = r.gen_range(1..4);
            let sig = random_signal(&mut r, horizon(&f) + extra, dim);
            let rob = eval_robustness(&f, &sig, 0).unwrap();
            if rob.abs() <= 1e-9 {
                continue;
            }
            let sat = eval_boolean(&f, &sig, 0).unwrap();
            assert_eq!(rob > 0.0, sat, "formula {f:?} signal {sig:?}");
            checked += 1;
        }
    }

    /// Until's closed robustness interval is pessimistic relative to its
    /// half-open Boolean interval, so positive robustness still implies
    /// Boolean satisfaction (and, dually, Boolean violation implies
    /// non-positive robustness).
    #[test]
    fn until_sign_soundness_one_sided() {
        let mut r = rng::master(43);
        for _ in 0..500 {
            let a = r.gen_range(0..2);
            let b = a + r.gen_range(0..3);
            let f = Formula::until(
                a,
                b,
                random_formula_in(&mut r, 1, 2, false),
                random_formula_in(&mut r, 1, 2, false),
            );
            let extra = r.gen_range(1..3);
            let sig = random_signal(&mut r, horizon(&f) + extra, 1);
            let rob = eval_robustness(&f, &sig, 0).unwrap();
            let sat = eval_boolean(&f, &sig, 0).unwrap();
            if rob > 1e-9 {
                assert!(sat, "positive robustness must imply satisfaction");
            }
            if !sat {
                assert!(rob <= 1e-9, "violation must cap robustness at zero");
            }
        }
    }

    #[test]
    fn derived_operators_match_until_expansions() {
        let mut r = rng::master(7);
        for _ in 0..300 {
            let dim = 1;
            let child = random_formula(&mut r, dim, 2);
            let a = r.gen_range(0..2);
            let b = a + r.gen_range(0..3);
            let ev = Formula::eventually(a, b, child.clone());
            let ev_expanded = Formula::until(a, b, Formula::True, child.clone());
            let gl = Formula::globally(a, b, child.clone());
            let gl_expanded =
                Formula::not(Formula::eventually(a, b, Formula::not(child.clone())));
            let extra = r.gen_range(1..3);
            let sig = random_signal(&mut r, horizon(&ev) + extra, dim);
            assert_eq!(
                eval_boolean(&ev, &sig, 0).unwrap(),
                eval_boolean(&ev_expanded, &sig, 0).unwrap()
            );
            assert_eq!(
                eval_robustness(&ev, &sig, 0).unwrap(),
                eval_robustness(&ev_expanded, &sig, 0).unwrap()
            );
            assert_eq!(
                eval_boolean(&gl, &sig, 0).unwrap(),
                eval_boolean(&gl_expanded, &sig, 0).unwrap()
            );
            assert_eq!(
                eval_robustness(&gl, &sig, 0).unwrap(),
                eval_robustness(&gl_expanded, &sig, 0).unwrap()
            );
        }
    }

    #[test]
    fn double_negation_is_identity() {
        let mut r = rng::master(11);
        for _ in 0..200 {
            let f = random_formula(&mut r, 2, 3);
            let sig = random_signal(&mut r, horizon(&f) + 1, 2);
            let a = eval_robustness(&f, &sig, 0).unwrap();
            let b = eval_robustness(&Formula::not(Formula::not(f)), &sig, 0).unwrap();
            assert_eq!(a, b);
        }
    }

    fn graph_value(g: &ComputationGraph, sig: &Signal) -> f64 {
        let mut inputs = HashMap::new();
        inputs.insert(
            TRAJECTORY_INPUT.to_string(),
            Tensor::vector(sig.values().data().to_vec()),
        );
        g.eval(&inputs).unwrap().item().unwrap()
    }

    #[test]
    fn lowering_forward_equals_monitor() {
        let sig = Signal::scalar_series(&[1.0, 2.0, 3.0]).unwrap();
        let f = Formula::globally(0, 2, s_gt(0.0));
        let g = lower_to_graph(&f, 3, 1, LoweringForm::MinMax).unwrap();
        assert!((graph_value(&g, &sig) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lowering_equivalence_on_random_formulas() {
        let mut r = rng::master(99);
        for _ in 0..200 {
            let dim = r.gen_range(1..3);
            let f = random_formula(&mut r, dim, 3);
            let extra = r.gen_range(1..3);
            let len = horizon(&f) + extra;
            let sig = random_signal(&mut r, len, dim);
            let rob = eval_robustness(&f, &sig, 0).unwrap();
            for form in [LoweringForm::MinMax, LoweringForm::ReluForm] {
                let g = lower_to_graph(&f, len, dim, form).unwrap();
                let gv = graph_value(&g, &sig);
                if rob.is_infinite() {
                    assert_eq!(gv, rob);
                } else {
                    assert!(
                        (gv - rob).abs() <= 1e-12,
                        "form {form:?}: graph {gv} vs monitor {rob}\nformula {f:?}\nsignal {sig:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn relu_form_matches_minmax_form() {
        let mut r = rng::master(5);
        let f = Formula::globally(
            0,
            4,
            Formula::and(
                Formula::atomic(PredicateExpr::InfNormDistance {
                    center: vec![0.5, -0.5],
                    scale: vec![0.25, 0.75],
                }),
                Formula::atomic(PredicateExpr::affine(vec![1.0, 1.0], 0.3)),
            ),
        );
        let g1 = lower_to_graph(&f, 5, 2, LoweringForm::MinMax).unwrap();
        let g2 = lower_to_graph(&f, 5, 2, LoweringForm::ReluForm).unwrap();
        for _ in 0..1000 {
            let sig = random_signal(&mut r, 5, 2);
            let a = graph_value(&g1, &sig);
            let b = graph_value(&g2, &sig);
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn atomic_lowering_is_single_affine_node() {
        let g = lower_to_graph(&s_gt(0.0), 1, 1, LoweringForm::MinMax).unwrap();
        // input + one affine
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(g.node(g.output_id()).kind.name(), "affine");
    }

    #[test]
    fn formula_json_round_trip() {
        let f = Formula::and(
            Formula::globally(
                0,
                24,
                Formula::atomic(PredicateExpr::InfNormDistance {
                    center: vec![25.0, 15.0],
                    scale: vec![5.0, 15.0],
                }),
            ),
            Formula::eventually(0, 20, Formula::globally(0, 3, s_gt(1.0))),
        );
        let text = f.to_json().unwrap();
        let back = Formula::from_json(&text).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn until_boolean_uses_half_open_inner_interval() {
        // lhs fails exactly at t': Boolean Until still holds because the
        // inner check stops before t'; robustness uses the closed interval
        // so the dip at t' counts.
        let sig = Signal::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap();
        let f = Formula::until(1, 1, s_gt(0.0), s_gt(-2.0));
        assert!(eval_boolean(&f, &sig, 0).unwrap());
        let r = eval_robustness(&f, &sig, 0).unwrap();
        assert_eq!(r, -1.0); // min(rhs(1)=1, min lhs over [0,1] = -1)
    }
}
