//! Exact finite-size moments through the difference operators `D^k_N`.
//!
//! `E ∏ e_{k_j}(N_j; 𝔯)` equals `D^{k_m}_{N_m} ⋯ D^{k_1}_{N_1} ∏ H(y_i)`, divided
//! by `∏ H(y_i)` and evaluated at `y_i = θ(1 - i)`, where
//! `D^k_N = Σ_{|I|=k} B_I(y) ∏_{i∈I} T_i` and `T_i` shifts `y_i` by `-1`.
//! Since `H(y - 1)/H(y) = h(y) = (y - θα)/(y - θα - Mθ)`, the whole evaluation
//! reduces to sums over integer shift vectors.
//!
//! At rational `θ` individual `B_I` can have vanishing denominators at the
//! shifted base points even though the total is finite. Those queries are
//! re-evaluated at `y_i + ε u_i` with truncated Laurent series in `ε`, and the
//! `ε^0` coefficient is returned.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Error, Result};
use crate::model::{ObservableKind, ObservableSpec};
use crate::params::EnsembleParams;

/// Largest observable degree accepted by the public expectation functions.
pub const MAX_DEGREE: usize = 6;
/// Largest number of observables in one product.
pub const MAX_FACTORS: usize = 4;
/// Largest `N_1` evaluated in exact rational arithmetic under [`ArithmeticMode::Auto`].
pub const AUTO_EXACT_MAX_LEVEL: usize = 12;
pub const DEFAULT_MP_BITS: usize = 256;

type Mp = FBig<HalfEven>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ArithmeticMode {
    Exact,
    Float64,
    MultiPrecision { bits: usize },
    /// Exact up to `N_1 = 12`, 256-bit floating point above.
    Auto,
}

impl Default for ArithmeticMode {
    fn default() -> Self {
        Self::Auto
    }
}

/// Evaluation options for the operator engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    pub mode: ArithmeticMode,
    /// Perturbation direction `u_i` used when a pole is met; `None` means `u_i = i²`.
    pub direction: Option<Vec<i64>>,
    /// Evaluate with the perturbation even when no pole occurs.
    pub force_perturbation: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mode: ArithmeticMode::Auto,
            direction: None,
            force_perturbation: false,
        }
    }
}

impl EvalOptions {
    pub fn with_mode(mode: ArithmeticMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// Value returned by the operator engine.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarValue {
    Rational(BigRational),
    Float(f64),
    MultiPrecision(Mp),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactScalar {
    pub value: ScalarValue,
    /// Whether the value is an `ε → 0` limit.
    pub perturbed: bool,
}

impl ExactScalar {
    pub fn to_f64(&self) -> f64 {
        match &self.value {
            ScalarValue::Rational(r) => rational_to_f64(r),
            ScalarValue::Float(x) => *x,
            ScalarValue::MultiPrecision(x) => x.to_f64().value(),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match &self.value {
            ScalarValue::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.value, ScalarValue::Rational(_))
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            ScalarValue::Rational(r) => write!(f, "{r}"),
            ScalarValue::Float(x) => write!(f, "{x:e}"),
            ScalarValue::MultiPrecision(x) => write!(f, "{x}"),
        }
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 && n.abs() < 1e300 && d < 1e300 {
            return n / d;
        }
    }
    // Scale both parts down to the same bit length before dividing.
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000) as usize;
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Composition `D^{k_m}_{N_m} ⋯ D^{k_1}_{N_1}` with `N_1 ≥ … ≥ N_m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorChain {
    entries: Vec<(usize, usize)>,
}

impl OperatorChain {
    /// `entries[j] = (N_j, k_j)`, innermost (largest level) first.
    pub fn new(entries: Vec<(usize, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return domain("operator chain is empty");
        }
        for (j, &(n, k)) in entries.iter().enumerate() {
            if k == 0 || k > n {
                return domain(format!("operator {j}: degree {k} must be in 1..={n}"));
            }
            if j > 0 && entries[j - 1].0 < n {
                return domain("operator levels must be nonincreasing");
            }
        }
        Ok(Self { entries })
    }

    /// Builds a chain from `(N, k)` pairs in any order.
    pub fn sorted(mut entries: Vec<(usize, usize)>) -> Result<Self> {
        entries.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn top_level(&self) -> usize {
        self.entries[0].0
    }
}

// ---------------------------------------------------------------------------
// Scalars

pub(crate) trait Scalar: Clone + fmt::Debug {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
}

pub(crate) trait ScalarCtx {
    type S: Scalar;
    fn from_ratio(&self, r: &BigRational) -> Self::S;
    fn from_i64(&self, v: i64) -> Self::S;
    fn wrap(&self, v: Self::S) -> ScalarValue;
}

impl Scalar for f64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

struct F64Ctx;

impl ScalarCtx for F64Ctx {
    type S = f64;
    fn from_ratio(&self, r: &BigRational) -> f64 {
        rational_to_f64(r)
    }
    fn from_i64(&self, v: i64) -> f64 {
        v as f64
    }
    fn wrap(&self, v: f64) -> ScalarValue {
        ScalarValue::Float(v)
    }
}

impl Scalar for BigRational {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

struct RationalCtx;

impl ScalarCtx for RationalCtx {
    type S = BigRational;
    fn from_ratio(&self, r: &BigRational) -> BigRational {
        r.clone()
    }
    fn from_i64(&self, v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }
    fn wrap(&self, v: BigRational) -> ScalarValue {
        ScalarValue::Rational(v)
    }
}

impl Scalar for Mp {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        *self == Mp::ZERO
    }
}

struct MpCtx {
    bits: usize,
}

impl MpCtx {
    fn int(&self, v: &BigInt) -> Mp {
        let i: dashu_int::IBig = match v.to_i128() {
            Some(x) => x.into(),
            None => v.to_string().parse().expect("integer literal"),
        };
        Mp::from(i).with_precision(self.bits).value()
    }
}

impl ScalarCtx for MpCtx {
    type S = Mp;
    fn from_ratio(&self, r: &BigRational) -> Mp {
        self.int(r.numer()) / self.int(r.denom())
    }
    fn from_i64(&self, v: i64) -> Mp {
        self.int(&BigInt::from(v))
    }
    fn wrap(&self, v: Mp) -> ScalarValue {
        ScalarValue::MultiPrecision(v)
    }
}

// ---------------------------------------------------------------------------
// Truncated Laurent series in ε

const EXACT_ZERO: i64 = 1 << 40;

/// Coefficients of `ε^val, …, ε^{prec-1}`; everything from `ε^prec` on is unknown.
#[derive(Clone, Debug)]
struct Series<S> {
    val: i64,
    prec: i64,
    c: Vec<S>,
}

impl<S: Scalar> Series<S> {
    fn zero() -> Self {
        Self {
            val: EXACT_ZERO,
            prec: EXACT_ZERO,
            c: vec![],
        }
    }

    fn constant(v: S, window: i64) -> Self {
        if v.is_zero() {
            return Self::zero();
        }
        Self {
            val: 0,
            prec: window,
            c: vec![v],
        }
        .padded()
    }

    /// Pads `c` with zeros up to `prec` (only used for finite polynomials).
    fn padded(mut self) -> Self {
        let len = (self.prec - self.val).max(0) as usize;
        if self.c.len() < len {
            let z = self.c[0].sub(&self.c[0]);
            self.c.resize(len, z);
        }
        self
    }

    fn trim(mut self) -> Self {
        let lead = self.c.iter().take_while(|x| x.is_zero()).count();
        if lead > 0 {
            self.c.drain(..lead);
            self.val += lead as i64;
        }
        if self.c.is_empty() {
            self.val = self.prec;
        }
        self
    }

    fn coeff(&self, e: i64) -> Option<&S> {
        if e < self.val || e >= self.prec {
            None
        } else {
            self.c.get((e - self.val) as usize)
        }
    }

    fn add(&self, o: &Self) -> Self {
        if self.val == EXACT_ZERO {
            return o.clone();
        }
        if o.val == EXACT_ZERO {
            return self.clone();
        }
        let val = self.val.min(o.val);
        let prec = self.prec.min(o.prec);
        let mut c = Vec::with_capacity((prec - val).max(0) as usize);
        for e in val..prec {
            let v = match (self.coeff(e), o.coeff(e)) {
                (Some(a), Some(b)) => a.add(b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => {
                    let any = self.c.first().or(o.c.first()).unwrap();
                    any.sub(any)
                }
            };
            c.push(v);
        }
        Self { val, prec, c }.trim()
    }

    fn mul(&self, o: &Self, window: i64) -> Self {
        if self.val == EXACT_ZERO || o.val == EXACT_ZERO {
            return Self::zero();
        }
        let val = self.val + o.val;
        let prec = (self.prec + o.val).min(o.prec + self.val).min(val + window);
        let n = (prec - val).max(0) as usize;
        let mut c: Vec<S> = Vec::with_capacity(n);
        for e in 0..n {
            let mut acc: Option<S> = None;
            for i in 0..=e {
                if let (Some(a), Some(b)) = (self.c.get(i), o.c.get(e - i)) {
                    let t = a.mul(b);
                    acc = Some(match acc {
                        Some(x) => x.add(&t),
                        None => t,
                    });
                }
            }
            c.push(acc.unwrap_or_else(|| {
                let a = &self.c[0];
                a.sub(a)
            }));
        }
        Self { val, prec, c }.trim()
    }
}

// ---------------------------------------------------------------------------
// Value algebras: plain scalars, or Laurent series

#[derive(Debug)]
struct Pole;

trait Algebra {
    type S: Scalar;
    type V: Clone;
    fn one(&self) -> Self::V;
    fn zero(&self) -> Self::V;
    fn add(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&self, a: &Self::V, b: &Self::V) -> Self::V;
    /// `(a + ε δ) / (b + ε δ)` for integers `a`, `b`, `δ` (`δ ≠ 0`).
    fn ratio_int(&self, a: i64, b: i64, delta: i64) -> std::result::Result<Self::V, Pole>;
    /// `(a + ε u) / (b + ε u)` for exact `a`, `b` with `b ≠ 0`.
    fn ratio_exact(&self, a: &Self::S, b: &Self::S, u: &Self::S) -> Self::V;
    fn perturbed(&self) -> bool;

    /// `∏ (a + ε δ)/(b + ε δ)` over the given triples.
    fn ratio_product(&self, triples: &[(i64, i64, i64)]) -> std::result::Result<Self::V, Pole> {
        let mut acc = self.one();
        for &(a, b, d) in triples {
            acc = self.mul(&acc, &self.ratio_int(a, b, d)?);
        }
        Ok(acc)
    }
}

struct Plain<'c, C: ScalarCtx>(&'c C);

impl<C: ScalarCtx> Algebra for Plain<'_, C> {
    type S = C::S;
    type V = C::S;
    fn one(&self) -> C::S {
        self.0.from_i64(1)
    }
    fn zero(&self) -> C::S {
        self.0.from_i64(0)
    }
    fn add(&self, a: &C::S, b: &C::S) -> C::S {
        a.add(b)
    }
    fn mul(&self, a: &C::S, b: &C::S) -> C::S {
        a.mul(b)
    }
    fn ratio_int(&self, a: i64, b: i64, _delta: i64) -> std::result::Result<C::S, Pole> {
        if b == 0 {
            return Err(Pole);
        }
        Ok(self.0.from_i64(a).div(&self.0.from_i64(b)))
    }
    fn ratio_exact(&self, a: &C::S, b: &C::S, _u: &C::S) -> C::S {
        a.div(b)
    }
    fn perturbed(&self) -> bool {
        false
    }
    fn ratio_product(&self, triples: &[(i64, i64, i64)]) -> std::result::Result<C::S, Pole> {
        // Integer products in i128 blocks, one division at the end.
        const LIMIT: i128 = 1 << 100;
        let ctx = self.0;
        let mut num = ctx.from_i64(1);
        let mut den = ctx.from_i64(1);
        let (mut bn, mut bd): (i128, i128) = (1, 1);
        let flush = |acc: &mut C::S, block: &mut i128| {
            if *block != 1 {
                let v = BigRational::from_integer(BigInt::from(*block));
                *acc = acc.mul(&ctx.from_ratio(&v));
                *block = 1;
            }
        };
        for &(a, b, _) in triples {
            if b == 0 {
                return Err(Pole);
            }
            if bn.abs() > LIMIT / (a.unsigned_abs() as i128 + 1) {
                flush(&mut num, &mut bn);
            }
            if bd.abs() > LIMIT / (b.unsigned_abs() as i128 + 1) {
                flush(&mut den, &mut bd);
            }
            bn *= a as i128;
            bd *= b as i128;
        }
        flush(&mut num, &mut bn);
        flush(&mut den, &mut bd);
        Ok(num.div(&den))
    }
}

struct Laurent<'c, C: ScalarCtx> {
    ctx: &'c C,
    window: i64,
}

impl<C: ScalarCtx> Laurent<'_, C> {
    /// `1 / (b + ε d)` with `b ≠ 0`, to `window` terms.
    fn inv_linear(&self, b: &C::S, d: &C::S) -> Series<C::S> {
        let inv = self.ctx.from_i64(1).div(b);
        let r = self.ctx.from_i64(0).sub(&d.mul(&inv));
        let mut c = Vec::with_capacity(self.window as usize);
        let mut term = inv;
        for _ in 0..self.window {
            c.push(term.clone());
            term = term.mul(&r);
        }
        Series {
            val: 0,
            prec: self.window,
            c,
        }
    }

    fn linear(&self, a: &C::S, d: &C::S) -> Series<C::S> {
        let zero = self.ctx.from_i64(0);
        let s = Series {
            val: 0,
            prec: self.window,
            c: vec![a.clone(), d.clone()],
        };
        let mut s = s.padded();
        s.c.truncate(self.window as usize);
        if s.c.len() > 2 {
            for x in &mut s.c[2..] {
                *x = zero.clone();
            }
        }
        s.trim()
    }
}

impl<C: ScalarCtx> Algebra for Laurent<'_, C> {
    type S = C::S;
    type V = Series<C::S>;
    fn one(&self) -> Series<C::S> {
        Series::constant(self.ctx.from_i64(1), self.window)
    }
    fn zero(&self) -> Series<C::S> {
        Series::zero()
    }
    fn add(&self, a: &Self::V, b: &Self::V) -> Self::V {
        a.add(b)
    }
    fn mul(&self, a: &Self::V, b: &Self::V) -> Self::V {
        a.mul(b, self.window)
    }
    fn ratio_int(&self, a: i64, b: i64, delta: i64) -> std::result::Result<Self::V, Pole> {
        let d = self.ctx.from_i64(delta);
        let num = self.linear(&self.ctx.from_i64(a), &d);
        let den = if b == 0 {
            // 1/(ε δ) exactly
            Series {
                val: -1,
                prec: -1 + self.window,
                c: vec![self.ctx.from_i64(1).div(&d)],
            }
            .padded()
        } else {
            self.inv_linear(&self.ctx.from_i64(b), &d)
        };
        Ok(num.mul(&den, self.window))
    }
    fn ratio_exact(&self, a: &C::S, b: &C::S, u: &C::S) -> Self::V {
        self.linear(a, u).mul(&self.inv_linear(b, u), self.window)
    }
    fn perturbed(&self) -> bool {
        true
    }
    fn ratio_product(&self, triples: &[(i64, i64, i64)]) -> std::result::Result<Self::V, Pole> {
        // ∏ (a + εδ)/(b + εδ) = ε^{#a=0 - #b=0} · C · exp(Σ_m (-ε)^m/m · (Σ (δ/b)^m - Σ (δ/a)^m)),
        // sums over the nonzero a and b.
        let w = self.window as usize;
        let ctx = self.ctx;
        let mut val = 0i64;
        let mut cn = ctx.from_i64(1);
        let mut cd = ctx.from_i64(1);
        let mut sums: Vec<C::S> = vec![ctx.from_i64(0); w];
        let accumulate = |x: i64, d: i64, sign_pos: bool, sums: &mut Vec<C::S>| {
            let r = ctx.from_i64(d).div(&ctx.from_i64(x));
            let mut pw = r.clone();
            for m in 1..w {
                sums[m] = if sign_pos { sums[m].add(&pw) } else { sums[m].sub(&pw) };
                pw = pw.mul(&r);
            }
        };
        for &(a, b, d) in triples {
            if a == 0 {
                val += 1;
                cn = cn.mul(&ctx.from_i64(d));
            } else {
                cn = cn.mul(&ctx.from_i64(a));
                accumulate(a, d, false, &mut sums);
            }
            if b == 0 {
                val -= 1;
                cd = cd.mul(&ctx.from_i64(d));
            } else {
                cd = cd.mul(&ctx.from_i64(b));
                accumulate(b, d, true, &mut sums);
            }
        }
        // log series l_m = (-1)^m / m · sums[m]; exp via n e_n = Σ_k k l_k e_{n-k}
        let mut e: Vec<C::S> = Vec::with_capacity(w);
        e.push(cn.div(&cd));
        for n in 1..w {
            let mut acc = ctx.from_i64(0);
            for k in 1..=n {
                // k l_k = (-1)^k sums[k]
                let t = sums[k].mul(&e[n - k]);
                acc = if k % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
            }
            e.push(acc.div(&ctx.from_i64(n as i64)));
        }
        Ok(Series {
            val,
            prec: val + self.window,
            c: e,
        }
        .trim())
    }
}

// ---------------------------------------------------------------------------
// The recursion

struct Engine<'a, A: Algebra> {
    alg: &'a A,
    ops: Vec<(usize, usize)>,
    subsets: Vec<Vec<Vec<usize>>>,
    theta_p: i64,
    theta_q: i64,
    dir: Vec<i64>,
    /// `hp[i][t] = ∏_{t' < t} h(y⁰_i - t' + ε u_i)`
    hp: Vec<Vec<A::V>>,
    memo: HashMap<(usize, Vec<u8>), A::V>,
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

impl<'a, A: Algebra> Engine<'a, A> {
    fn new<C>(alg: &'a A, ctx: &C, params: &EnsembleParams, chain: &OperatorChain, dir: Vec<i64>) -> Result<Self>
    where
        C: ScalarCtx<S = A::S>,
    {
        // Outermost operator first.
        let ops: Vec<(usize, usize)> = chain.entries().iter().rev().copied().collect();
        let n1 = chain.top_level();
        let theta = params.theta_ratio();
        let big = |r: Rational64| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
        let theta_b = big(theta);
        let alpha_b = big(params.alpha_ratio());
        let m_b = BigRational::from_integer(BigInt::from(params.m_param()));
        let ta = &theta_b * &alpha_b;
        let tm = &theta_b * &m_b;
        let max_shift: Vec<usize> = (0..n1)
            .map(|i| ops.iter().filter(|&&(n, _)| i < n).count())
            .collect();
        let mut hp = Vec::with_capacity(n1);
        for i in 0..n1 {
            let y0 = &theta_b * BigRational::from_integer(BigInt::from(-(i as i64)));
            let u = ctx.from_i64(dir[i]);
            let mut row = vec![alg.one()];
            for t in 0..max_shift[i] {
                let y = &y0 - BigRational::from_integer(BigInt::from(t as i64));
                let num = ctx.from_ratio(&(&y - &ta));
                let den_r = &y - &ta - &tm;
                if Zero::is_zero(&den_r) {
                    return numeric("h(y) met its pole; parameters outside the admissible range");
                }
                let den = ctx.from_ratio(&den_r);
                let f = alg.ratio_exact(&num, &den, &u);
                let next = alg.mul(row.last().unwrap(), &f);
                row.push(next);
            }
            hp.push(row);
        }
        let subsets = ops.iter().map(|&(n, k)| k_subsets(n, k)).collect();
        Ok(Self {
            alg,
            ops,
            subsets,
            theta_p: *theta.numer(),
            theta_q: *theta.denom(),
            dir,
            hp,
            memo: HashMap::new(),
        })
    }

    fn base(&self, s: &[u8]) -> A::V {
        let mut v: Option<A::V> = None;
        for (i, &t) in s.iter().enumerate() {
            if t > 0 {
                let f = &self.hp[i][t as usize];
                v = Some(match v {
                    Some(x) => self.alg.mul(&x, f),
                    None => f.clone(),
                });
            }
        }
        v.unwrap_or_else(|| self.alg.one())
    }

    /// `B_I` at `y⁰ - s` for the operator acting on the first `n` variables.
    fn b_factor(&self, subset: &[usize], n: usize, s: &[u8]) -> std::result::Result<Option<A::V>, Pole> {
        let (p, q) = (self.theta_p, self.theta_q);
        let mut in_set = [false; 256];
        for &i in subset {
            in_set[i] = true;
        }
        let mut triples = Vec::with_capacity(subset.len() * (n - subset.len()));
        let mut vanishes = false;
        for &i in subset {
            for l in 0..n {
                if in_set[l] {
                    continue;
                }
                // q (y_i - y_l) = p (l - i) - q (s_i - s_l)
                let ds = s[i] as i64 - s[l] as i64;
                let den = p * (l as i64 - i as i64) - q * ds;
                let num = den - p;
                if !self.alg.perturbed() {
                    if den == 0 {
                        return Err(Pole);
                    }
                    vanishes |= num == 0;
                }
                triples.push((num, den, q * (self.dir[i] - self.dir[l])));
            }
        }
        if vanishes {
            return Ok(None);
        }
        self.alg.ratio_product(&triples).map(Some)
    }

    fn g(&mut self, j: usize, s: &mut Vec<u8>) -> std::result::Result<A::V, Pole> {
        if j == self.ops.len() {
            return Ok(self.base(s));
        }
        if let Some(v) = self.memo.get(&(j, s.clone())) {
            return Ok(v.clone());
        }
        let (n, _) = self.ops[j];
        let mut total: Option<A::V> = None;
        for idx in 0..self.subsets[j].len() {
            let subset = std::mem::take(&mut self.subsets[j][idx]);
            let b = self.b_factor(&subset, n, s);
            let b = match b {
                Ok(b) => b,
                Err(e) => {
                    self.subsets[j][idx] = subset;
                    return Err(e);
                }
            };
            if let Some(b) = b {
                for &i in &subset {
                    s[i] += 1;
                }
                let inner = self.g(j + 1, s);
                for &i in &subset {
                    s[i] -= 1;
                }
                let inner = match inner {
                    Ok(v) => v,
                    Err(e) => {
                        self.subsets[j][idx] = subset;
                        return Err(e);
                    }
                };
                let term = self.alg.mul(&b, &inner);
                total = Some(match total {
                    Some(t) => self.alg.add(&t, &term),
                    None => term,
                });
            }
            self.subsets[j][idx] = subset;
        }
        let total = total.unwrap_or_else(|| self.alg.zero());
        self.memo.insert((j, s.clone()), total.clone());
        Ok(total)
    }
}

fn default_direction(n: usize) -> Vec<i64> {
    (1..=n as i64).map(|i| i * i).collect()
}

fn eval_chain_ctx<C: ScalarCtx>(
    ctx: &C,
    params: &EnsembleParams,
    chain: &OperatorChain,
    opts: &EvalOptions,
) -> Result<(C::S, bool)> {
    let n1 = chain.top_level();
    if n1 > 255 {
        return domain("operator levels above 255 are not supported");
    }
    let dir = match &opts.direction {
        Some(d) if d.len() >= n1 => d[..n1].to_vec(),
        Some(_) => return domain("perturbation direction shorter than the top level"),
        None => default_direction(n1),
    };
    for a in 0..n1 {
        for b in 0..a {
            if dir[a] == dir[b] {
                return domain("perturbation direction entries must be distinct");
            }
        }
    }
    if !opts.force_perturbation {
        let alg = Plain(ctx);
        let mut eng = Engine::new(&alg, ctx, params, chain, dir.clone())?;
        if let Ok(v) = eng.g(0, &mut vec![0u8; n1]) {
            return Ok((v, false));
        }
    }
    let mut window = 2 * chain.entries().len() as i64 + 2;
    while window <= 256 {
        let alg = Laurent { ctx, window };
        let mut eng = Engine::new(&alg, ctx, params, chain, dir.clone())?;
        let v = eng
            .g(0, &mut vec![0u8; n1])
            .map_err(|_| Error::Numeric("pole in perturbed evaluation".into()))?;
        if v.val == EXACT_ZERO {
            return Ok((ctx.from_i64(0), true));
        }
        if v.prec >= 1 {
            let c0 = v.coeff(0).cloned().unwrap_or_else(|| ctx.from_i64(0));
            return Ok((c0, true));
        }
        window *= 2;
    }
    numeric("perturbed evaluation did not reach the constant term")
}

fn resolve_mode(mode: ArithmeticMode, n1: usize) -> ArithmeticMode {
    match mode {
        ArithmeticMode::Auto if n1 <= AUTO_EXACT_MAX_LEVEL => ArithmeticMode::Exact,
        ArithmeticMode::Auto => ArithmeticMode::MultiPrecision {
            bits: DEFAULT_MP_BITS,
        },
        m => m,
    }
}

/// `h(y) = H(y - 1)/H(y) = (y - θα)/(y - θα - Mθ)`.
pub fn h_ratio(params: &EnsembleParams, y: Rational64) -> Result<Rational64> {
    let ta = params.theta_ratio() * params.alpha_ratio();
    let den = y - ta - params.theta_ratio() * Rational64::from_integer(params.m_param() as i64);
    if den.is_zero() {
        return domain(format!("h has a pole at y = {y}"));
    }
    Ok((y - ta) / den)
}

/// Applies the chain to `∏ H` and evaluates at the base point.
pub fn apply_operator_chain(params: &EnsembleParams, chain: &OperatorChain) -> Result<ExactScalar> {
    apply_operator_chain_with(params, chain, &EvalOptions::default())
}

pub fn apply_operator_chain_with(
    params: &EnsembleParams,
    chain: &OperatorChain,
    opts: &EvalOptions,
) -> Result<ExactScalar> {
    match resolve_mode(opts.mode, chain.top_level()) {
        ArithmeticMode::Exact => wrap(&RationalCtx, eval_chain_ctx(&RationalCtx, params, chain, opts)?),
        ArithmeticMode::Float64 => wrap(&F64Ctx, eval_chain_ctx(&F64Ctx, params, chain, opts)?),
        ArithmeticMode::MultiPrecision { bits } => {
            let ctx = MpCtx { bits };
            wrap(&ctx, eval_chain_ctx(&ctx, params, chain, opts)?)
        }
        ArithmeticMode::Auto => unreachable!(),
    }
}

fn wrap<C: ScalarCtx>(ctx: &C, (v, perturbed): (C::S, bool)) -> Result<ExactScalar> {
    Ok(ExactScalar {
        value: ctx.wrap(v),
        perturbed,
    })
}

// ---------------------------------------------------------------------------
// Expectations of products of observables

/// A partition, parts in nonincreasing order.
pub type Partition = Vec<usize>;

/// Coefficients `PE(k, μ)` with `p_k = Σ_μ PE(k, μ) e_μ`, from Newton's identities.
pub fn pe_coefficients(k: usize) -> BTreeMap<Partition, i64> {
    let mut p: Vec<BTreeMap<Partition, i64>> = vec![BTreeMap::new()];
    for n in 1..=k {
        let mut cur: BTreeMap<Partition, i64> = BTreeMap::new();
        for i in 1..n {
            let sign = if (i - 1) % 2 == 0 { 1 } else { -1 };
            for (mu, c) in &p[n - i] {
                let mut nu = mu.clone();
                nu.push(i);
                nu.sort_unstable_by(|a, b| b.cmp(a));
                *cur.entry(nu).or_insert(0) += sign * c;
            }
        }
        let sign = if (n - 1) % 2 == 0 { 1 } else { -1 };
        *cur.entry(vec![n]).or_insert(0) += sign * n as i64;
        cur.retain(|_, c| *c != 0);
        p.push(cur);
    }
    p.pop().unwrap()
}

/// A linear combination of products of padded `e_k(N)`, with integer coefficients.
type Expansion = Vec<(BigInt, Vec<(usize, usize)>)>;

fn binom(n: i64, k: i64) -> BigInt {
    if k < 0 || n < k {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// Expresses one observable through padded `e_k(N)` (`e_0 = 1` entries dropped).
fn expand_observable(spec: &ObservableSpec, m: usize) -> Result<Expansion> {
    if spec.degree == 0 || spec.level == 0 {
        return domain("observable degree and level must be at least 1");
    }
    let n = spec.level;
    let pad = if spec.pad_ones { 0 } else { n.saturating_sub(m) } as i64;
    // e_k(x) = Σ_i (-1)^i C(pad+i-1, i) e_{k-i}(x ∪ 1^pad); p_k(x) = p_k(padded) - pad.
    let e_unpadded = |k: usize| -> Expansion {
        if pad == 0 {
            return vec![(BigInt::one(), vec![(n, k)])];
        }
        (0..=k)
            .map(|i| {
                let c = binom(pad + i as i64 - 1, i as i64);
                let c = if i % 2 == 0 { c } else { -c };
                let e = if i == k { vec![] } else { vec![(n, k - i)] };
                (c, e)
            })
            .collect()
    };
    let out = match spec.kind {
        ObservableKind::Elementary => {
            if spec.degree > spec.padded_len(m) {
                return domain(format!(
                    "e_{} on a multiset of {} entries",
                    spec.degree,
                    spec.padded_len(m)
                ));
            }
            e_unpadded(spec.degree)
        }
        ObservableKind::Power => {
            let mut terms: Expansion = pe_coefficients(spec.degree)
                .into_iter()
                .map(|(mu, c)| (BigInt::from(c), mu.into_iter().map(|k| (n, k)).collect()))
                .collect();
            if pad > 0 {
                terms.push((BigInt::from(-pad), vec![]));
            }
            terms
        }
    };
    Ok(out)
}

fn multiply(a: &Expansion, b: &Expansion) -> Expansion {
    let mut out: BTreeMap<Vec<(usize, usize)>, BigInt> = BTreeMap::new();
    for (ca, ea) in a {
        for (cb, eb) in b {
            let mut e = ea.clone();
            e.extend_from_slice(eb);
            e.sort_by(|x, y| y.0.cmp(&x.0).then(y.1.cmp(&x.1)));
            *out.entry(e).or_insert_with(BigInt::zero) += ca * cb;
        }
    }
    out.into_iter().filter(|(_, c)| !c.is_zero()).map(|(e, c)| (c, e)).collect()
}

fn expand_product(specs: &[ObservableSpec], m: usize) -> Result<Expansion> {
    let mut acc: Expansion = vec![(BigInt::one(), vec![])];
    for s in specs {
        acc = multiply(&acc, &expand_observable(s, m)?);
    }
    Ok(acc)
}

fn check_specs(specs: &[ObservableSpec]) -> Result<()> {
    if specs.is_empty() {
        return domain("empty observable product");
    }
    if specs.len() > MAX_FACTORS {
        return domain(format!(
            "at most {MAX_FACTORS} observables per product, got {}",
            specs.len()
        ));
    }
    if let Some(s) = specs.iter().find(|s| s.degree > MAX_DEGREE) {
        return domain(format!("degree {} exceeds the supported maximum {MAX_DEGREE}", s.degree));
    }
    Ok(())
}

fn eval_expansion_ctx<C: ScalarCtx>(
    ctx: &C,
    params: &EnsembleParams,
    exp: &Expansion,
    opts: &EvalOptions,
) -> Result<(C::S, bool)> {
    let mut total = ctx.from_i64(0);
    let mut perturbed = false;
    for (c, e) in exp {
        // e_k(N) vanishes for k > N.
        if e.iter().any(|&(n, k)| k > n) {
            continue;
        }
        let v = if e.is_empty() {
            ctx.from_i64(1)
        } else {
            let chain = OperatorChain::new(e.clone())?;
            let (v, p) = eval_chain_ctx(ctx, params, &chain, opts)?;
            perturbed |= p;
            v
        };
        let c = ctx.from_ratio(&BigRational::from_integer(c.clone()));
        total = total.add(&c.mul(&v));
    }
    Ok((total, perturbed))
}

fn top_level(specs: &[ObservableSpec]) -> usize {
    specs.iter().map(|s| s.level).max().unwrap_or(1)
}

macro_rules! with_ctx {
    ($mode:expr, $n1:expr, |$ctx:ident| $body:expr) => {{
        match resolve_mode($mode, $n1) {
            ArithmeticMode::Exact => {
                let $ctx = &RationalCtx;
                wrap($ctx, $body?)
            }
            ArithmeticMode::Float64 => {
                let $ctx = &F64Ctx;
                wrap($ctx, $body?)
            }
            ArithmeticMode::MultiPrecision { bits } => {
                let $ctx = &MpCtx { bits };
                wrap($ctx, $body?)
            }
            ArithmeticMode::Auto => unreachable!(),
        }
    }};
}

/// `E ∏ obs_i` for a product of power-sum or elementary observables.
pub fn expectation(params: &EnsembleParams, specs: &[ObservableSpec], opts: &EvalOptions) -> Result<ExactScalar> {
    check_specs(specs)?;
    let exp = expand_product(specs, params.m_param())?;
    with_ctx!(opts.mode, top_level(specs), |ctx| eval_expansion_ctx(ctx, params, &exp, opts))
}

/// `E ∏ e_{k_i}(N_i; 𝔯)` with padding by ones above level `M`.
pub fn expectation_e(params: &EnsembleParams, specs: &[(usize, usize)]) -> Result<ExactScalar> {
    let specs: Vec<_> = specs.iter().map(|&(n, k)| ObservableSpec::elementary(k, n)).collect();
    expectation(params, &specs, &EvalOptions::default())
}

/// `E ∏ p_{k_i}(N_i; 𝔯)` with padding by ones above level `M`.
pub fn expectation_p(params: &EnsembleParams, specs: &[(usize, usize)]) -> Result<ExactScalar> {
    let specs: Vec<_> = specs.iter().map(|&(n, k)| ObservableSpec::power(k, n)).collect();
    expectation(params, &specs, &EvalOptions::default())
}

/// `E[ab] - E[a] E[b]`, evaluated in one arithmetic mode.
pub fn covariance(
    params: &EnsembleParams,
    a: &ObservableSpec,
    b: &ObservableSpec,
    opts: &EvalOptions,
) -> Result<ExactScalar> {
    let m = params.m_param();
    let joint = expand_product(&[*a, *b], m)?;
    let ea = expand_product(&[*a], m)?;
    let eb = expand_product(&[*b], m)?;
    let n1 = a.level.max(b.level);
    with_ctx!(opts.mode, n1, |ctx| {
        (|| -> Result<_> {
            let (ab, p1) = eval_expansion_ctx(ctx, params, &joint, opts)?;
            let (va, p2) = eval_expansion_ctx(ctx, params, &ea, opts)?;
            let (vb, p3) = eval_expansion_ctx(ctx, params, &eb, opts)?;
            Ok((ab.sub(&va.mul(&vb)), p1 || p2 || p3))
        })()
    })
}

/// `Cov(p_{k1}(N1), p_{k2}(N2))`, requires `N1 ≥ N2`.
pub fn covariance_p(params: &EnsembleParams, a: (usize, usize), b: (usize, usize)) -> Result<ExactScalar> {
    if a.0 < b.0 {
        return domain("covariance_p expects N1 >= N2");
    }
    covariance(
        params,
        &ObservableSpec::power(a.1, a.0),
        &ObservableSpec::power(b.1, b.0),
        &EvalOptions::default(),
    )
}

/// `Cov(e_{k1}(N1), e_{k2}(N2))`, requires `N1 ≥ N2`.
pub fn covariance_e(params: &EnsembleParams, a: (usize, usize), b: (usize, usize)) -> Result<ExactScalar> {
    if a.0 < b.0 {
        return domain("covariance_e expects N1 >= N2");
    }
    covariance(
        params,
        &ObservableSpec::elementary(a.1, a.0),
        &ObservableSpec::elementary(b.1, b.0),
        &EvalOptions::default(),
    )
}

/// Joint cumulant `κ(X_1, …, X_r)` for `r ≤ 4` from exact mixed moments.
pub fn joint_cumulant(params: &EnsembleParams, specs: &[ObservableSpec], opts: &EvalOptions) -> Result<f64> {
    let r = specs.len();
    if !(1..=4).contains(&r) {
        return domain("joint cumulants are available for orders 1 to 4");
    }
    let mut moments: HashMap<u32, f64> = HashMap::new();
    for mask in 1u32..(1 << r) {
        let sub: Vec<ObservableSpec> = (0..r).filter(|i| mask & (1 << i) != 0).map(|i| specs[i]).collect();
        moments.insert(mask, expectation(params, &sub, opts)?.to_f64());
    }
    Ok(crate::stats::cumulant_from_moments(r, |mask| moments[&mask]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: Rational64, alpha: i64, m: usize) -> EnsembleParams {
        EnsembleParams::from_ratios(theta, Rational64::from_integer(alpha), m).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn h_ratio_examples() {
        // θα = 1, Mθ = 2
        let p = params(Rational64::new(1, 2), 2, 4);
        assert_eq!(h_ratio(&p, Rational64::from_integer(0)).unwrap(), Rational64::new(1, 3));
        assert_eq!(h_ratio(&p, Rational64::from_integer(1)).unwrap(), Rational64::from_integer(0));
        assert!(h_ratio(&p, Rational64::from_integer(3)).is_err());
    }

    #[test]
    fn pe_small() {
        assert_eq!(pe_coefficients(1), BTreeMap::from([(vec![1], 1)]));
        assert_eq!(pe_coefficients(2), BTreeMap::from([(vec![1, 1], 1), (vec![2], -2)]));
        // p3 = e1^3 - 3 e1 e2 + 3 e3
        assert_eq!(
            pe_coefficients(3),
            BTreeMap::from([(vec![1, 1, 1], 1), (vec![2, 1], -3), (vec![3], 3)])
        );
    }

    #[test]
    fn beta_mean_and_second_moment() {
        let p = params(Rational64::new(3, 2), 2, 3);
        let c = OperatorChain::new(vec![(1, 1)]).unwrap();
        let v = apply_operator_chain(&p, &c).unwrap();
        assert_eq!(v.as_rational().unwrap(), &r(2, 5));
        // θα(θα+1)/((θα+θM)(θα+θM+1)) with θα = 3, θM = 9/2
        let c = OperatorChain::new(vec![(1, 1), (1, 1)]).unwrap();
        let v = apply_operator_chain(&p, &c).unwrap();
        let (a, b) = (r(3, 1), r(9, 2));
        let expect = &a * (&a + r(1, 1)) / ((&a + &b) * (&a + &b + r(1, 1)));
        assert_eq!(v.as_rational().unwrap(), &expect);
    }

    #[test]
    fn top_elementary_is_selberg_ratio() {
        for (theta, alpha, m, n) in [
            (Rational64::new(1, 1), 2, 3, 3),
            (Rational64::new(1, 2), 1, 4, 3),
            (Rational64::new(2, 3), 3, 2, 2),
        ] {
            let p = params(theta, alpha, m);
            let v = expectation_e(&p, &[(n, n)]).unwrap();
            let mut expect = r(1, 1);
            for j in 0..n as i64 {
                expect = expect * r(alpha + j, alpha + m as i64 + j);
            }
            assert_eq!(v.as_rational().unwrap(), &expect, "θ={theta} α={alpha} M={m} N={n}");
        }
    }

    #[test]
    fn half_theta_uses_perturbation_and_matches() {
        let p = params(Rational64::new(1, 2), 1, 4);
        let c = OperatorChain::new(vec![(3, 1), (3, 1)]).unwrap();
        let plain = apply_operator_chain(&p, &c).unwrap();
        let forced = apply_operator_chain_with(
            &p,
            &c,
            &EvalOptions {
                force_perturbation: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(plain.as_rational(), forced.as_rational());
        assert!(forced.perturbed);
    }

    #[test]
    fn plain_and_perturbed_agree() {
        for theta in [Rational64::new(1, 1), Rational64::new(1, 2), Rational64::new(1, 3), Rational64::new(3, 2), Rational64::new(2, 1)] {
            let p = params(theta, 2, 3);
            for chain in [vec![(4, 2), (3, 1)], vec![(3, 1), (3, 1), (2, 1)], vec![(4, 3), (2, 2)]] {
                let c = OperatorChain::new(chain.clone()).unwrap();
                let plain = apply_operator_chain(&p, &c).unwrap();
                let forced = apply_operator_chain_with(
                    &p,
                    &c,
                    &EvalOptions { force_perturbation: true, ..Default::default() },
                )
                .unwrap();
                let other = apply_operator_chain_with(
                    &p,
                    &c,
                    &EvalOptions { force_perturbation: true, direction: Some(vec![5, -1, 2, 7]), ..Default::default() },
                )
                .unwrap();
                assert_eq!(plain.as_rational(), forced.as_rational(), "θ={theta} {chain:?}");
                assert_eq!(forced.as_rational(), other.as_rational(), "θ={theta} {chain:?}");
            }
        }
    }

    #[test]
    fn variance_level_one() {
        let p = params(Rational64::new(1, 2), 3, 2);
        let v = covariance_p(&p, (1, 1), (1, 1)).unwrap();
        let (a, b) = (r(3, 2), r(1, 1));
        let expect = &a * &b / ((&a + &b) * (&a + &b) * (&a + &b + r(1, 1)));
        assert_eq!(v.as_rational().unwrap(), &expect);
    }

    #[test]
    fn power_two_level_one() {
        let p = params(Rational64::new(2, 1), 1, 3);
        let v = expectation_p(&p, &[(1, 2)]).unwrap();
        let (a, b) = (r(2, 1), r(6, 1));
        let expect = &a * (&a + r(1, 1)) / ((&a + &b) * (&a + &b + r(1, 1)));
        assert_eq!(v.as_rational().unwrap(), &expect);
    }

    #[test]
    fn modes_agree() {
        let p = params(Rational64::new(1, 2), 2, 3);
        let specs = [ObservableSpec::power(2, 5), ObservableSpec::power(1, 3)];
        let exact = expectation(&p, &specs, &EvalOptions::with_mode(ArithmeticMode::Exact)).unwrap();
        let f = expectation(&p, &specs, &EvalOptions::with_mode(ArithmeticMode::Float64)).unwrap();
        let mp = expectation(
            &p,
            &specs,
            &EvalOptions::with_mode(ArithmeticMode::MultiPrecision { bits: 128 }),
        )
        .unwrap();
        let x = exact.to_f64();
        assert!((f.to_f64() - x).abs() < 1e-12 * x.abs());
        assert!((mp.to_f64() - x).abs() < 1e-14 * x.abs());
    }

    #[test]
    fn unpadded_observables_shift() {
        let p = params(Rational64::new(1, 1), 2, 2);
        let padded = expectation(&p, &[ObservableSpec::power(2, 4)], &EvalOptions::default()).unwrap();
        let bare = expectation(
            &p,
            &[ObservableSpec::power(2, 4).without_padding()],
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(
            padded.as_rational().unwrap() - bare.as_rational().unwrap(),
            r(2, 1)
        );
        // e_2 of two points at level 4 versus the padded e_2 = e2 + 2 e1·… relation
        let e2 = expectation(&p, &[ObservableSpec::elementary(2, 4).without_padding()], &EvalOptions::default())
            .unwrap();
        let top = expectation_e(&p, &[(2, 2)]).unwrap();
        // e_2 of level 4 unpadded is the product of its two points; at M = 2
        // level 4 has the same law as a Jacobi ensemble with |M - N| = 2, whose
        // top elementary mean is ∏ θα_j/(...). Check positivity and bound only.
        let v = e2.to_f64();
        assert!(v > 0.0 && v < 1.0 && top.to_f64() > v);
    }

    #[test]
    fn rejects_large_requests() {
        let p = params(Rational64::new(1, 1), 1, 2);
        assert!(expectation_p(&p, &[(3, 7)]).is_err());
        assert!(expectation_p(&p, &[(1, 1); 5]).is_err());
        assert!(OperatorChain::new(vec![(2, 1), (3, 1)]).is_err());
        assert!(OperatorChain::new(vec![(2, 3)]).is_err());
    }
}
