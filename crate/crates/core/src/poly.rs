//! Sparse multivariate polynomials over the complex numbers.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The variables a polynomial lives on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarSpace {
    /// Entries `q_ij`, `i <= j`, of a symmetric `n x n` matrix, row by row.
    SymMatrix { n: usize },
    /// Coordinates `w_{i,l}` of `k` vectors in `C^n`, vector by vector.
    Frames { n: usize, k: usize },
    /// Free-form named variables.
    Named(Vec<String>),
}

impl VarSpace {
    pub fn len(&self) -> usize {
        match self {
            VarSpace::SymMatrix { n } => n * (n + 1) / 2,
            VarSpace::Frames { n, k } => n * k,
            VarSpace::Named(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Variable index of the symmetric entry `(i, j)` (0-based, any order).
    pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row i starts after sum_{r < i} (n - r) entries
        i * n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Variable index of coordinate `l` of vector `i` (0-based).
    pub fn frame_index(n: usize, i: usize, l: usize) -> usize {
        i * n + l
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            VarSpace::SymMatrix { n } => {
                let mut out = Vec::new();
                for i in 0..*n {
                    for j in i..*n {
                        out.push(format!("q{}_{}", i + 1, j + 1));
                    }
                }
                out
            }
            VarSpace::Frames { n, k } => {
                let mut out = Vec::new();
                for i in 0..*k {
                    for l in 0..*n {
                        out.push(format!("w{}_{}", i + 1, l + 1));
                    }
                }
                out
            }
            VarSpace::Named(v) => v.clone(),
        }
    }

    /// Recognise the canonical naming schemes, falling back to `Named`.
    pub fn from_names(names: &[String]) -> Self {
        for n in 1..=8 {
            if (VarSpace::SymMatrix { n }).names() == names {
                return VarSpace::SymMatrix { n };
            }
        }
        if let Some(first) = names.first() {
            if first == "w1_1" {
                for k in 1..=8 {
                    if names.len() % k == 0 {
                        let n = names.len() / k;
                        if (VarSpace::Frames { n, k }).names() == names {
                            return VarSpace::Frames { n, k };
                        }
                    }
                }
            }
        }
        VarSpace::Named(names.to_vec())
    }
}

/// Sparse polynomial: exponent vector -> coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    vars: VarSpace,
    terms: BTreeMap<Vec<u16>, Complex64>,
}

impl MultiPoly {
    pub fn zero(vars: VarSpace) -> Self {
        MultiPoly { vars, terms: BTreeMap::new() }
    }

    pub fn constant(vars: VarSpace, c: Complex64) -> Self {
        let mut p = Self::zero(vars);
        let e = vec![0; p.vars.len()];
        p.add_term(e, c);
        p
    }

    pub fn var(vars: VarSpace, index: usize) -> Self {
        let mut p = Self::zero(vars);
        let mut e = vec![0; p.vars.len()];
        e[index] = 1;
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn vars(&self) -> &VarSpace {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exp: &[u16]) -> Complex64 {
        self.terms.get(exp).copied().unwrap_or(ZERO)
    }

    pub fn add_term(&mut self, exp: Vec<u16>, c: Complex64) {
        debug_assert_eq!(exp.len(), self.vars.len());
        if c == ZERO {
            return;
        }
        let e = self.terms.entry(exp.clone()).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&exp);
        }
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::Invalid("polynomials live on different variables".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.vars.clone());
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = Self::zero(self.vars.clone());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        Ok(out)
    }

    /// Maximum total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.iter().map(|&x| x as usize).sum()).max()
    }

    /// True when every term has total degree `d` (the zero polynomial is homogeneous of every degree).
    pub fn is_homogeneous(&self, d: usize) -> bool {
        self.terms.keys().all(|e| e.iter().map(|&x| x as usize).sum::<usize>() == d)
    }

    /// Degree in the variables `block` for every term, or `None` if terms disagree.
    pub fn block_degree(&self, block: &[usize]) -> Option<usize> {
        let mut it = self.terms.keys().map(|e| block.iter().map(|&i| e[i] as usize).sum::<usize>());
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        assert_eq!(x.len(), self.nvars(), "evaluation point has wrong length");
        let mut acc = ZERO;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (xi, &p) in x.iter().zip(e) {
                if p > 0 {
                    m *= xi.powu(p as u32);
                }
            }
            acc += m;
        }
        acc
    }

    pub fn eval_real(&self, x: &[f64]) -> Complex64 {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.eval(&z)
    }

    /// Substitute polynomial `subs[i]` for variable `i`.
    pub fn compose(&self, subs: &[MultiPoly]) -> Result<MultiPoly> {
        if subs.len() != self.nvars() {
            return Err(Error::DimensionMismatch { expected: self.nvars(), actual: subs.len() });
        }
        let target = subs
            .first()
            .map(|s| s.vars.clone())
            .ok_or(Error::Empty("substitution list"))?;
        let one = MultiPoly::constant(target.clone(), Complex64::new(1.0, 0.0));
        let mut out = MultiPoly::zero(target);
        // cache powers lazily per variable
        let mut powers: Vec<Vec<MultiPoly>> = subs.iter().map(|_| vec![one.clone()]).collect();
        for (e, c) in &self.terms {
            let mut m = one.scale(*c);
            for (i, &p) in e.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                while powers[i].len() <= p as usize {
                    let next = powers[i].last().unwrap().mul(&subs[i])?;
                    powers[i].push(next);
                }
                m = m.mul(&powers[i][p as usize])?;
            }
            out = out.add(&m)?;
        }
        Ok(out)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn pruned(&self, tol: f64) -> Self {
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(e, c)| (e.clone(), *c)).collect(),
        }
    }

    /// Coefficient-wise comparison, tolerance relative to the larger polynomial.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        match self.sub(other) {
            Ok(d) => {
                let scale = self.max_abs_coefficient().max(other.max_abs_coefficient()).max(1.0);
                d.max_abs_coefficient() <= rel_tol * scale
            }
            Err(_) => false,
        }
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = self.vars.names();
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .map(|(i, &p)| if p == 1 { names[i].clone() } else { format!("{}^{}", names[i], p) })
                    .collect();
                let coeff = if c.im == 0.0 { format!("{}", c.re) } else { format!("({}{:+}i)", c.re, c.im) };
                if mono.is_empty() {
                    coeff
                } else {
                    format!("{}*{}", coeff, mono.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyTermJson {
    pub exp: Vec<u16>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `{"vars": [...], "terms": [{"exp": [..], "re": f, "im": f}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyJson {
    pub vars: Vec<String>,
    pub terms: Vec<PolyTermJson>,
}

impl From<&MultiPoly> for PolyJson {
    fn from(p: &MultiPoly) -> Self {
        PolyJson {
            vars: p.vars.names(),
            terms: p.terms.iter().map(|(e, c)| PolyTermJson { exp: e.clone(), re: c.re, im: c.im }).collect(),
        }
    }
}

impl TryFrom<&PolyJson> for MultiPoly {
    type Error = Error;

    fn try_from(j: &PolyJson) -> Result<Self> {
        let vars = VarSpace::from_names(&j.vars);
        let mut p = MultiPoly::zero(vars);
        for t in &j.terms {
            if t.exp.len() != j.vars.len() {
                return Err(Error::Invalid(format!(
                    "exponent vector of length {} for {} variables",
                    t.exp.len(),
                    j.vars.len()
                )));
            }
            p.add_term(t.exp.clone(), Complex64::new(t.re, t.im));
        }
        Ok(p)
    }
}

impl MultiPoly {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&PolyJson::from(self)).expect("polynomial serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: PolyJson = serde_json::from_str(s)?;
        MultiPoly::try_from(&j)
    }
}
