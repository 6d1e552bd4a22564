//! Sparse multivariate polynomials over `f64` and graded-lex monomial bases.
//!
//! Monomials order graded-lexicographically: lower total degree first, then
//! the larger exponent on the earliest differing variable. For two variables
//! the degree-2 basis therefore reads `1, x1, x2, x1^2, x1*x2, x2^2`.
//! Term maps are `BTreeMap`s keyed by that order, so iteration over a
//! polynomial is deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{invalid, Error, Result};

/// Exponent vector `alpha`, standing for `x1^alpha1 * ... * xn^alphan`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// The monomial `x_var`.
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of monomials (exponent-wise sum). Lengths must match.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self / other` when `other` divides `self`.
    pub fn checked_div(&self, other: &Monomial) -> Option<Monomial> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Monomial)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// Writes the monomial using the supplied variable names (`1` for the constant).
    pub fn fmt_with(&self, names: &[String]) -> String {
        let factors: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1));
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if factors.is_empty() {
            "1".to_string()
        } else {
            factors.join("*")
        }
    }
}

fn grlex(a: &[u32], b: &[u32]) -> Ordering {
    let da: u64 = a.iter().map(|&e| e as u64).sum();
    let db: u64 = b.iter().map(|&e| e as u64).sum();
    // Larger exponent on the earliest differing variable comes first.
    da.cmp(&db).then_with(|| b.cmp(a))
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| grlex(&self.0, &other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded-lex comparison of two exponent vectors of equal length.
pub fn grlex_compare(a: &Monomial, b: &Monomial) -> Result<Ordering> {
    if a.nvars() != b.nvars() {
        return invalid(format!(
            "cannot compare monomials in {} and {} variables",
            a.nvars(),
            b.nvars()
        ));
    }
    Ok(grlex(&a.0, &b.0))
}

/// `C(d + n, d)`, the number of monomials in `n` variables of degree at most `d`.
pub fn basis_size(n: usize, d: usize) -> Result<usize> {
    if n == 0 {
        return invalid("basis size needs at least one variable");
    }
    let mut acc: u128 = 1;
    for i in 1..=d as u128 {
        acc = acc
            .checked_mul(n as u128 + i)
            .ok_or_else(|| Error::Overflow(format!("basis_size({n}, {d})")))?
            / i;
    }
    usize::try_from(acc).map_err(|_| Error::Overflow(format!("basis_size({n}, {d})")))
}

/// All monomials of degree at most `degree` in `nvars` variables, in graded-lex order.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    nvars: usize,
    degree: usize,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(nvars: usize, degree: usize) -> Result<Self> {
        let size = basis_size(nvars, degree)?;
        let mut monomials = Vec::with_capacity(size);
        let mut buf = vec![0u32; nvars];
        for t in 0..=degree {
            push_compositions(t as u32, 0, &mut buf, &mut monomials);
        }
        debug_assert_eq!(monomials.len(), size);
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(MonomialBasis {
            nvars,
            degree,
            monomials,
            index,
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }
}

// Compositions of `rest` into the remaining slots, earliest slot largest first.
fn push_compositions(rest: u32, pos: usize, buf: &mut [u32], out: &mut Vec<Monomial>) {
    if pos + 1 == buf.len() {
        buf[pos] = rest;
        out.push(Monomial(buf.to_vec()));
        return;
    }
    for e in (0..=rest).rev() {
        buf[pos] = e;
        push_compositions(rest - e, pos + 1, buf, out);
    }
    buf[pos] = 0;
}

/// Convenience wrapper returning a fresh [`MonomialBasis`].
pub fn monomial_basis(n: usize, d: usize) -> Result<MonomialBasis> {
    MonomialBasis::new(n, d)
}

/// Sparse polynomial: a map from monomials to nonzero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The polynomial `x_var` (zero-based index).
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, var), 1.0);
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return invalid(format!(
                    "exponent vector of length {} in a {}-variable polynomial",
                    e.len(),
                    nvars
                ));
            }
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Adds `c * m` in place, pruning the term if it cancels to zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one(self.nvars))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_same(&self, other: &Polynomial) -> Result<()> {
        if self.nvars != other.nvars {
            return invalid(format!(
                "polynomials in {} and {} variables",
                self.nvars, other.nvars
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, v) in self.terms() {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        self.scale(-1.0)
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..e {
            out = out.mul(self).expect("same nvars");
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return invalid(format!(
                "point of length {} for a {}-variable polynomial",
                x.len(),
                self.nvars
            ));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    /// Partial derivative with respect to variable `var` (zero-based).
    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in self.terms() {
            let e = m.0[var];
            if e > 0 {
                let mut d = m.0.clone();
                d[var] -= 1;
                out.add_term(Monomial(d), c * e as f64);
            }
        }
        out
    }

    /// Substitutes `x_i = center_i + half_i * u_i` and returns the polynomial in `u`.
    pub fn affine_substitute(&self, center: &[f64], half: &[f64]) -> Polynomial {
        let n = self.nvars;
        let lin: Vec<Polynomial> = (0..n)
            .map(|i| {
                let mut p = Polynomial::constant(n, center[i]);
                p.add_term(Monomial::var(n, i), half[i]);
                p
            })
            .collect();
        // powers[i][e] = (center_i + half_i u_i)^e
        let maxdeg = self.degree();
        let powers: Vec<Vec<Polynomial>> = lin
            .iter()
            .map(|l| {
                let mut v = vec![Polynomial::constant(n, 1.0)];
                for e in 1..=maxdeg {
                    let next = v[e - 1].mul(l).expect("same nvars");
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Polynomial::zero(n);
        for (m, c) in self.terms() {
            let mut t = Polynomial::constant(n, c);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&powers[i][e as usize]).expect("same nvars");
                }
            }
            for (tm, tc) in t.terms() {
                out.add_term(tm.clone(), tc);
            }
        }
        out
    }

    /// Renders with the given variable names in graded-lex term order.
    pub fn fmt_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (i, (m, &c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if i == 0 {
                if sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            if m.is_one() {
                s.push_str(&format!("{mag}"));
            } else if mag == 1.0 {
                s.push_str(&m.fmt_with(names));
            } else {
                s.push_str(&format!("{mag}*{}", m.fmt_with(names)));
            }
        }
        s
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("x{i}")).collect();
        f.write_str(&self.fmt_with(&names))
    }
}
