//! Model representation: variables, linear expressions, constraints.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::MilpError;

/// Handle to a variable declared in a [`Model`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
    /// Free-form label for diagnostics. Never written to LP files.
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// Sparse affine expression `sum(coef * var) + constant`.
///
/// Terms are kept in a `BTreeMap` so iteration order (and therefore any
/// serialization) is stable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: BTreeMap<VarId, f64>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        let mut e = Self::new();
        e.add_term(var, coef);
        e
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let entry = self.terms.entry(var).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.remove(&var);
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.terms.iter().map(|(v, c)| (*v, *c))
    }

    pub fn coef(&self, var: VarId) -> f64 {
        self.terms.get(&var).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the expression at `values` (indexed by `VarId`).
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::new();
        }
        for c in self.terms.values_mut() {
            *c *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn sum<I: IntoIterator<Item = LinExpr>>(iter: I) -> Self {
        iter.into_iter().fold(Self::new(), |acc, e| acc + e)
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        for (v, c) in rhs.terms() {
            self.add_term(v, c);
        }
        self.constant += rhs.constant;
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        *self += &rhs;
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        for (v, c) in rhs.terms() {
            self.add_term(v, -c);
        }
        self.constant -= rhs.constant;
    }
}

impl SubAssign for LinExpr {
    fn sub_assign(&mut self, rhs: LinExpr) {
        *self -= &rhs;
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs.into();
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs.into();
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Mul<f64> for VarId {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        LinExpr::term(self, rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl<T: Into<LinExpr>> Add<T> for VarId {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for VarId {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

/// A linear constraint `expr rel rhs`. The expression carries no constant:
/// [`Model::add_constraint`] folds it into `rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: LinExpr,
    pub rel: Relation,
    pub rhs: f64,
    pub label: String,
}

impl Constraint {
    /// Amount by which `values` violates the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.eval(values);
        match self.rel {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstrId(pub(crate) usize);

impl ConstrId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Minimization model over continuous and binary variables.
#[derive(Clone, Debug, Default)]
pub struct Model {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: LinExpr,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        kind: VarKind,
        lo: f64,
        hi: f64,
        label: impl Into<String>,
    ) -> Result<VarId, MilpError> {
        let label = label.into();
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(MilpError::InvalidBounds { label, lo, hi });
        }
        if kind == VarKind::Binary && (lo < 0.0 || hi > 1.0 || lo.fract() != 0.0 || hi.fract() != 0.0)
        {
            return Err(MilpError::InvalidBounds { label, lo, hi });
        }
        self.vars.push(Variable { kind, lo, hi, label });
        Ok(VarId(self.vars.len() - 1))
    }

    /// Continuous variable. Panics on inconsistent bounds; use [`Model::add_var`]
    /// when bounds come from untrusted input.
    pub fn continuous(&mut self, lo: f64, hi: f64, label: impl Into<String>) -> VarId {
        let label = label.into();
        match self.add_var(VarKind::Continuous, lo, hi, label) {
            Ok(v) => v,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn binary(&mut self, label: impl Into<String>) -> VarId {
        self.vars.push(Variable {
            kind: VarKind::Binary,
            lo: 0.0,
            hi: 1.0,
            label: label.into(),
        });
        VarId(self.vars.len() - 1)
    }

    /// Binary with its upper bound forced to 0 when `allowed` is false.
    pub fn binary_masked(&mut self, allowed: bool, label: impl Into<String>) -> VarId {
        let v = self.binary(label);
        if !allowed {
            self.vars[v.0].hi = 0.0;
        }
        v
    }

    pub fn add_constraint(
        &mut self,
        expr: impl Into<LinExpr>,
        rel: Relation,
        rhs: f64,
        label: impl Into<String>,
    ) -> Result<ConstrId, MilpError> {
        let mut expr = expr.into();
        self.check_vars(&expr)?;
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite(label.into()));
        }
        self.constraints.push(Constraint {
            expr,
            rel,
            rhs,
            label: label.into(),
        });
        Ok(ConstrId(self.constraints.len() - 1))
    }

    pub fn set_objective(&mut self, expr: impl Into<LinExpr>) -> Result<(), MilpError> {
        let expr = expr.into();
        self.check_vars(&expr)?;
        self.objective = expr;
        Ok(())
    }

    fn check_vars(&self, expr: &LinExpr) -> Result<(), MilpError> {
        for (v, c) in expr.terms() {
            if v.0 >= self.vars.len() {
                return Err(MilpError::UnknownVar(v.0));
            }
            if !c.is_finite() {
                return Err(MilpError::NonFinite(format!("coefficient of {v}")));
            }
        }
        Ok(())
    }

    pub fn set_bounds(&mut self, var: VarId, lo: f64, hi: f64) -> Result<(), MilpError> {
        let v = self.vars.get_mut(var.0).ok_or(MilpError::UnknownVar(var.0))?;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(MilpError::InvalidBounds {
                label: v.label.clone(),
                lo,
                hi,
            });
        }
        v.lo = lo;
        v.hi = hi;
        Ok(())
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstrId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// Copy of the model with every binary turned into a continuous variable
    /// over the same bounds.
    pub fn relaxed(&self) -> Model {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    /// Largest bound or constraint violation at `values`, with the index of
    /// the worst constraint if a constraint is the culprit.
    pub fn max_violation(&self, values: &[f64]) -> (f64, Option<usize>) {
        let mut worst = 0.0_f64;
        let mut at = None;
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lo - x).max(x - v.hi);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let viol = c.violation(values);
            if viol > worst {
                worst = viol;
                at = Some(i);
            }
        }
        (worst, at)
    }

    /// Largest distance of a binary from {0, 1}.
    pub fn max_integrality_gap(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .filter(|(v, _)| v.kind == VarKind::Binary)
            .map(|(_, x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_terms_are_dropped() {
        let mut m = Model::new();
        let x = m.continuous(0.0, 1.0, "x");
        let y = m.continuous(0.0, 1.0, "y");
        let e = (x * 2.0 + y) - x * 2.0;
        assert_eq!(e.len(), 1);
        assert_eq!(e.coef(x), 0.0);
        assert_eq!(e.coef(y), 1.0);
    }

    #[test]
    fn constant_moves_to_rhs() {
        let mut m = Model::new();
        let x = m.continuous(0.0, 10.0, "x");
        let c = m.add_constraint(x + 2.0, Relation::Le, 5.0, "c").unwrap();
        assert_eq!(m.constraint(c).rhs, 3.0);
        assert_eq!(m.constraint(c).expr.constant_part(), 0.0);
    }

    #[test]
    fn rejects_foreign_variables_and_bad_bounds() {
        let mut a = Model::new();
        let mut b = Model::new();
        a.continuous(0.0, 1.0, "a0");
        let foreign = a.continuous(0.0, 1.0, "a1");
        b.continuous(0.0, 1.0, "b0");
        assert!(matches!(
            b.add_constraint(foreign, Relation::Le, 1.0, "c"),
            Err(MilpError::UnknownVar(1))
        ));
        assert!(b.add_var(VarKind::Continuous, 2.0, 1.0, "bad").is_err());
        assert!(b.add_var(VarKind::Binary, 0.0, 2.0, "bad").is_err());
    }

    #[test]
    fn violation_measures() {
        let mut m = Model::new();
        let x = m.continuous(0.0, 1.0, "x");
        m.add_constraint(x, Relation::Ge, 0.5, "lo").unwrap();
        let (v, at) = m.max_violation(&[0.2]);
        assert!((v - 0.3).abs() < 1e-12);
        assert_eq!(at, Some(0));
        assert_eq!(m.max_violation(&[0.7]).0, 0.0);
    }
}
