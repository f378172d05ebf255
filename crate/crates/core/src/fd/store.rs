//! Constraint store over nonnegative integer variables.

use std::fmt::Write as _;

use super::domain::Domain;

pub type VarId = usize;

/// Above this many value pairs, binary arithmetic falls back from exact
/// support filtering to bounds reasoning.
const SUPPORT_PAIRS: u64 = 4096;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `x + y = z`
    Add(VarId, VarId, VarId),
    /// `x * y = z`
    Mul(VarId, VarId, VarId),
    /// `x = c`
    EqConst(VarId, i64),
}

impl Constraint {
    fn vars(&self) -> impl Iterator<Item = VarId> {
        let v = match *self {
            Constraint::Add(x, y, z) | Constraint::Mul(x, y, z) => [Some(x), Some(y), Some(z)],
            Constraint::EqConst(x, _) => [Some(x), None, None],
        };
        v.into_iter().flatten()
    }
}

#[derive(Clone, Debug)]
pub struct FdVar {
    pub domain: Domain,
    /// Log-probability per value, indexed by `value - weight_base`. Present iff
    /// the variable is the latent label of a perceived item.
    pub weights: Option<Vec<f64>>,
    pub weight_base: i64,
    /// Created by [`ConstraintStore::constant`]; printed as its value.
    pub constant: bool,
}

impl FdVar {
    pub fn weight(&self, v: i64) -> f64 {
        match &self.weights {
            Some(w) => w[(v - self.weight_base) as usize],
            None => 0.0,
        }
    }

    /// Largest weight over the current domain.
    pub fn max_weight(&self) -> f64 {
        match &self.weights {
            Some(_) => self
                .domain
                .values()
                .map(|v| self.weight(v))
                .fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FdError {
    #[error("weight table does not sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("weight table has {got} entries for a domain of {want} values")]
    WeightLength { got: usize, want: usize },
    #[error("variable {0} does not exist")]
    NoSuchVar(VarId),
    #[error("domains must be nonnegative")]
    Negative,
}

/// Empty domain reached: the constraints have no solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Infeasible;

#[derive(Clone, Debug, Default)]
pub struct ConstraintStore {
    vars: Vec<FdVar>,
    constraints: Vec<Constraint>,
    watches: Vec<Vec<usize>>,
}

impl ConstraintStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vars(&self) -> &[FdVar] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &FdVar {
        &self.vars[id]
    }

    pub fn domain(&self, id: VarId) -> &Domain {
        &self.vars[id].domain
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn weighted_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len()).filter(|&i| self.vars[i].weights.is_some())
    }

    fn push(&mut self, var: FdVar) -> VarId {
        self.vars.push(var);
        self.watches.push(Vec::new());
        self.vars.len() - 1
    }

    /// Unweighted variable over `[lo, hi]`.
    pub fn new_var(&mut self, lo: i64, hi: i64) -> Result<VarId, FdError> {
        if lo < 0 {
            return Err(FdError::Negative);
        }
        Ok(self.push(FdVar {
            domain: Domain::interval(lo, hi),
            weights: None,
            weight_base: lo,
            constant: false,
        }))
    }

    pub fn constant(&mut self, c: i64) -> Result<VarId, FdError> {
        if c < 0 {
            return Err(FdError::Negative);
        }
        Ok(self.push(FdVar {
            domain: Domain::singleton(c),
            weights: None,
            weight_base: c,
            constant: true,
        }))
    }

    /// Label variable over `0..log_probs.len()`. The table must be a
    /// distribution in probability space; values of probability zero are left
    /// out of the domain.
    pub fn new_weighted(&mut self, log_probs: Vec<f64>) -> Result<VarId, FdError> {
        let total: f64 = log_probs.iter().map(|w| w.exp()).sum();
        let normalized = (total - 1.0).abs() <= WEIGHT_TOLERANCE;
        if !normalized || log_probs.iter().any(|w| w.is_nan() || *w > 0.0) {
            return Err(FdError::BadWeights(total));
        }
        let mut domain = Domain::interval(0, log_probs.len() as i64 - 1);
        domain.retain(|v| log_probs[v as usize] > f64::NEG_INFINITY);
        Ok(self.push(FdVar {
            domain,
            weights: Some(log_probs),
            weight_base: 0,
            constant: false,
        }))
    }

    /// Record a constraint and propagate to a fixed point.
    pub fn post(&mut self, c: Constraint) -> Result<Result<(), Infeasible>, FdError> {
        if let Some(bad) = c.vars().find(|&v| v >= self.vars.len()) {
            return Err(FdError::NoSuchVar(bad));
        }
        let idx = self.constraints.len();
        self.constraints.push(c);
        let mut seen = Vec::new();
        for v in c.vars() {
            if !seen.contains(&v) {
                self.watches[v].push(idx);
                seen.push(v);
            }
        }
        Ok(self.propagate_from(vec![idx]))
    }

    /// Fixed point over all constraints.
    pub fn propagate(&mut self) -> Result<(), Infeasible> {
        self.propagate_from((0..self.constraints.len()).collect())
    }

    /// Fix `v` to `value` and propagate.
    pub fn assign(&mut self, v: VarId, value: i64) -> Result<(), Infeasible> {
        let d = &mut self.vars[v].domain;
        if !d.contains(value) {
            return Err(Infeasible);
        }
        if d.is_singleton() {
            return Ok(());
        }
        d.assign(value);
        self.propagate_from(self.watches[v].clone())
    }

    fn propagate_from(&mut self, mut queue: Vec<usize>) -> Result<(), Infeasible> {
        let mut queued = vec![false; self.constraints.len()];
        for &c in &queue {
            queued[c] = true;
        }
        while let Some(ci) = queue.pop() {
            queued[ci] = false;
            let changed = self.revise(self.constraints[ci])?;
            for v in changed {
                for &other in &self.watches[v] {
                    if other != ci && !queued[other] {
                        queued[other] = true;
                        queue.push(other);
                    }
                }
            }
        }
        Ok(())
    }

    /// Narrow the domains of one constraint; returns the variables that changed.
    fn revise(&mut self, c: Constraint) -> Result<Vec<VarId>, Infeasible> {
        let mut changed = Vec::new();
        match c {
            Constraint::EqConst(x, k) => {
                if self.vars[x].domain.assign(k) {
                    changed.push(x);
                }
            }
            Constraint::Add(x, y, z) | Constraint::Mul(x, y, z) => {
                let op = if matches!(c, Constraint::Add(..)) {
                    Op::Add
                } else {
                    Op::Mul
                };
                if (x == y || y == z || x == z) && self.revise_aliased(x, y, z, op, &mut changed) {
                } else {
                    self.revise_binary(x, y, z, op, &mut changed);
                }
            }
        }
        if changed.iter().any(|&v| self.vars[v].domain.is_empty()) {
            return Err(Infeasible);
        }
        Ok(changed)
    }

    /// Exact support for a constraint that repeats a variable, such as
    /// `x + y = y`, by enumerating the distinct variables jointly. Returns
    /// false without narrowing when their domains are too large.
    fn revise_aliased(
        &mut self,
        x: VarId,
        y: VarId,
        z: VarId,
        op: Op,
        changed: &mut Vec<VarId>,
    ) -> bool {
        let mut distinct = vec![x];
        for v in [y, z] {
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        let doms: Vec<Vec<i64>> = distinct
            .iter()
            .map(|&v| self.vars[v].domain.values().collect())
            .collect();
        if doms.iter().map(|d| d.len()).product::<usize>() > SUPPORT_PAIRS as usize {
            return false;
        }
        let slot = |v: VarId| distinct.iter().position(|&d| d == v).unwrap();
        let (ix, iy, iz) = (slot(x), slot(y), slot(z));
        let mut support: Vec<Vec<i64>> = vec![Vec::new(); distinct.len()];
        let mut pick = vec![0usize; distinct.len()];
        'outer: loop {
            if doms.iter().all(|d| !d.is_empty()) {
                let val = |i: usize| doms[i][pick[i]];
                if op.apply(val(ix), val(iy)) == Some(val(iz)) {
                    for (i, s) in support.iter_mut().enumerate() {
                        s.push(val(i));
                    }
                }
            }
            for i in 0..pick.len() {
                pick[i] += 1;
                if pick[i] < doms[i].len() {
                    continue 'outer;
                }
                pick[i] = 0;
            }
            break;
        }
        for (i, mut s) in support.into_iter().enumerate() {
            s.sort_unstable();
            s.dedup();
            self.keep_sorted(distinct[i], &s, changed);
        }
        true
    }

    fn revise_binary(&mut self, x: VarId, y: VarId, z: VarId, op: Op, changed: &mut Vec<VarId>) {
        let (dx, dy, dz) = (
            &self.vars[x].domain,
            &self.vars[y].domain,
            &self.vars[z].domain,
        );
        if dx.is_empty() || dy.is_empty() || dz.is_empty() {
            return;
        }
        if dx.size().saturating_mul(dy.size()) <= SUPPORT_PAIRS {
            // Exact support: keep exactly the values occurring in some
            // satisfying (x, y, z) triple.
            let mut sx = Vec::new();
            let mut sy = Vec::new();
            let mut sz = Vec::new();
            for a in dx.values() {
                for b in dy.values() {
                    if let Some(r) = op.apply(a, b) {
                        if dz.contains(r) {
                            sx.push(a);
                            sy.push(b);
                            sz.push(r);
                        }
                    }
                }
            }
            sx.sort_unstable();
            sy.sort_unstable();
            sz.sort_unstable();
            self.keep_sorted(x, &sx, changed);
            self.keep_sorted(y, &sy, changed);
            self.keep_sorted(z, &sz, changed);
            return;
        }
        // Bounds reasoning, then support filtering of whichever operand is small.
        let (xl, xh, yl, yh) = (dx.min(), dx.max(), dy.min(), dy.max());
        let (zl, zh) = op.image(xl, xh, yl, yh);
        if self.vars[z].domain.restrict(zl, zh) {
            changed.push(z);
        }
        for (a, b) in [(x, y), (y, x)] {
            let db = self.vars[b].domain.clone();
            let dz = self.vars[z].domain.clone();
            if dz.is_empty() || db.is_empty() {
                return;
            }
            let da = &mut self.vars[a].domain;
            let (lo, hi) = op.inverse_bounds(dz.min(), dz.max(), db.min(), db.max());
            let mut moved = da.restrict(lo, hi);
            if da.size() <= SUPPORT_PAIRS {
                moved |= da.retain(|va| op.partner_exists(va, &db, &dz));
            }
            if moved {
                changed.push(a);
            }
        }
    }

    fn keep_sorted(&mut self, v: VarId, support: &[i64], changed: &mut Vec<VarId>) {
        let d = &mut self.vars[v].domain;
        let moved = if support.is_empty() {
            d.assign(-1)
        } else {
            d.retain(|val| support.binary_search(&val).is_ok())
        };
        if moved && !changed.contains(&v) {
            changed.push(v);
        }
    }

    /// Optimistic score: every weighted variable at its best remaining value.
    pub fn upper_bound(&self) -> f64 {
        self.vars
            .iter()
            .filter(|v| v.weights.is_some())
            .map(FdVar::max_weight)
            .sum()
    }

    /// One constraint per line in the usual notation, e.g. `x0+x1#=v2`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            match *c {
                Constraint::Add(x, y, z) => {
                    let _ = writeln!(out, "{}+{}#={}", self.name(x), self.name(y), self.name(z));
                }
                Constraint::Mul(x, y, z) => {
                    let _ = writeln!(out, "{}*{}#={}", self.name(x), self.name(y), self.name(z));
                }
                Constraint::EqConst(x, k) => {
                    let _ = writeln!(out, "{}#={k}", self.name(x));
                }
            }
        }
        out
    }

    pub fn name(&self, v: VarId) -> String {
        let var = &self.vars[v];
        if var.constant {
            var.domain.min().to_string()
        } else if var.weights.is_some() {
            format!("x{v}")
        } else {
            format!("v{v}")
        }
    }
}

#[derive(Copy, Clone)]
enum Op {
    Add,
    Mul,
}

impl Op {
    fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            Op::Add => a.checked_add(b),
            Op::Mul => a.checked_mul(b),
        }
    }

    /// Range of `a op b` for nonnegative operand intervals.
    fn image(self, al: i64, ah: i64, bl: i64, bh: i64) -> (i64, i64) {
        match self {
            Op::Add => (al.saturating_add(bl), ah.saturating_add(bh)),
            Op::Mul => (al.saturating_mul(bl), ah.saturating_mul(bh)),
        }
    }

    /// Bounds on `a` given `a op b = z` with `b ∈ [bl, bh]`, `z ∈ [zl, zh]`.
    fn inverse_bounds(self, zl: i64, zh: i64, bl: i64, bh: i64) -> (i64, i64) {
        match self {
            Op::Add => (zl.saturating_sub(bh).max(0), zh.saturating_sub(bl)),
            Op::Mul => {
                // a*b >= zl needs a >= ceil(zl / bh) (when bh > 0); a*b <= zh
                // needs a <= zh / bl only if bl > 0.
                let lo = if zl > 0 {
                    if bh == 0 {
                        i64::MAX
                    } else {
                        (zl + bh - 1) / bh
                    }
                } else {
                    0
                };
                let hi = if bl > 0 { zh / bl } else { i64::MAX };
                (lo, hi)
            }
        }
    }

    /// Whether some `b ∈ db` gives `a op b ∈ dz`.
    fn partner_exists(self, a: i64, db: &Domain, dz: &Domain) -> bool {
        match self {
            Op::Add => {
                db.meets(dz.min().saturating_sub(a), dz.max().saturating_sub(a)) && {
                    if dz.has_bitset() && db.size() <= SUPPORT_PAIRS {
                        db.values()
                            .any(|b| a.checked_add(b).is_some_and(|r| dz.contains(r)))
                    } else {
                        true
                    }
                }
            }
            Op::Mul => {
                if a == 0 {
                    return dz.contains(0);
                }
                let lo = (dz.min() + a - 1) / a;
                let hi = dz.max() / a;
                if !db.meets(lo, hi) {
                    return false;
                }
                if dz.has_bitset() && db.size() <= SUPPORT_PAIRS {
                    db.values()
                        .any(|b| a.checked_mul(b).is_some_and(|r| dz.contains(r)))
                } else {
                    true
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digits(s: &mut ConstraintStore) -> VarId {
        s.new_var(0, 9).unwrap()
    }

    #[test]
    fn add_narrows_result() {
        let mut s = ConstraintStore::new();
        let (x, y) = (digits(&mut s), digits(&mut s));
        let n = s.new_var(0, 1000).unwrap();
        s.post(Constraint::Add(x, y, n)).unwrap().unwrap();
        assert_eq!((s.domain(n).min(), s.domain(n).max()), (0, 18));
        s.post(Constraint::EqConst(n, 15)).unwrap().unwrap();
        assert_eq!(s.domain(n).value(), Some(15));
        assert_eq!((s.domain(x).min(), s.domain(x).max()), (6, 9));
        assert_eq!((s.domain(y).min(), s.domain(y).max()), (6, 9));
        assert_eq!(
            s.post(Constraint::EqConst(n, 100)).unwrap(),
            Err(Infeasible)
        );
    }

    #[test]
    fn repeated_arguments_are_exact() {
        let mut s = ConstraintStore::new();
        let (x, y) = (digits(&mut s), digits(&mut s));
        s.post(Constraint::Add(x, y, y)).unwrap().unwrap();
        assert_eq!(s.domain(x).value(), Some(0));
        let mut s = ConstraintStore::new();
        let (x, y) = (digits(&mut s), s.new_var(1, 9).unwrap());
        s.post(Constraint::Mul(x, y, y)).unwrap().unwrap();
        assert_eq!(s.domain(x).value(), Some(1));
        let mut s = ConstraintStore::new();
        let (x, y) = (digits(&mut s), digits(&mut s));
        s.post(Constraint::Mul(x, y, x)).unwrap().unwrap();
        s.post(Constraint::EqConst(y, 2)).unwrap().unwrap();
        assert_eq!(s.domain(x).value(), Some(0));
    }

    #[test]
    fn mul_divisor_filtering() {
        let mut s = ConstraintStore::new();
        let x = s.new_var(1, 9).unwrap();
        let y = s.new_var(1, 9).unwrap();
        let z = s.constant(12).unwrap();
        s.post(Constraint::Mul(x, y, z)).unwrap().unwrap();
        assert_eq!(s.domain(x).values().collect::<Vec<_>>(), vec![2, 3, 4, 6]);
        assert_eq!(s.domain(y).values().collect::<Vec<_>>(), vec![2, 3, 4, 6]);
    }

    #[test]
    fn zero_sum_chain() {
        let mut s = ConstraintStore::new();
        let (a, b, c) = (digits(&mut s), digits(&mut s), digits(&mut s));
        let m = s.new_var(0, 18).unwrap();
        let n = s.new_var(0, 27).unwrap();
        s.post(Constraint::Add(a, b, m)).unwrap().unwrap();
        s.post(Constraint::Add(m, c, n)).unwrap().unwrap();
        s.post(Constraint::EqConst(n, 0)).unwrap().unwrap();
        for v in [a, b, c] {
            assert_eq!(s.domain(v).value(), Some(0));
        }
    }

    #[test]
    fn propagate_without_constraints_is_identity() {
        let mut s = ConstraintStore::new();
        digits(&mut s);
        let before = s.domain(0).clone();
        s.propagate().unwrap();
        assert_eq!(s.domain(0), &before);
    }

    #[test]
    fn weight_tables_are_validated() {
        let mut s = ConstraintStore::new();
        assert!(matches!(
            s.new_weighted(vec![0.5f64.ln(), 0.4f64.ln()]),
            Err(FdError::BadWeights(_))
        ));
        let v = s.new_weighted(vec![0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(s.domain(v).value(), Some(0));
    }

    #[test]
    fn large_products_use_bounds() {
        let mut s = ConstraintStore::new();
        let x = s.new_var(0, 59_049).unwrap();
        let y = s.new_var(1, 9).unwrap();
        let z = s.constant(24).unwrap();
        s.post(Constraint::Mul(x, y, z)).unwrap().unwrap();
        assert_eq!(
            s.domain(y).values().collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 6, 8]
        );
        assert_eq!((s.domain(x).min(), s.domain(x).max()), (3, 24));
    }

    #[test]
    fn dump_notation() {
        let mut s = ConstraintStore::new();
        let x0 = s.new_weighted(vec![0.5f64.ln(); 2]).unwrap();
        let x1 = s.new_weighted(vec![0.5f64.ln(); 2]).unwrap();
        let v2 = s.new_var(0, 2).unwrap();
        s.post(Constraint::Add(x0, x1, v2)).unwrap().unwrap();
        s.post(Constraint::EqConst(v2, 1)).unwrap().unwrap();
        assert_eq!(s.dump(), "x0+x1#=v2\nv2#=1\n");
    }
}
