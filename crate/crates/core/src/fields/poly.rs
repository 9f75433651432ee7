use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

/// A real polynomial on the ambient space Rⁿ⁺¹.
///
/// Restricted to Sⁿ, a polynomial of degree L is a band-limited function of
/// degree at most L, and its Riemannian derivatives follow from the ambient
/// ones without charts.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoly {
    nvars: usize,
    /// exponents, `nvars` per term
    exps: Vec<u16>,
    coeffs: Vec<f64>,
}

/// Value, ambient gradient and ambient Hessian of a polynomial at a point.
#[derive(Debug, Clone)]
pub struct AmbientJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl AmbientPoly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, exps: Vec::new(), coeffs: Vec::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, [(vec![0; nvars], c)])
    }

    /// The coordinate function x_i.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::from_terms(nvars, [(e, 1.0)])
    }

    /// Builds from (exponents, coefficient) pairs, merging duplicates.
    pub fn from_terms<I: IntoIterator<Item = (Vec<u16>, f64)>>(nvars: usize, terms: I) -> Self {
        let mut map: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent vector has the wrong length");
            *map.entry(e).or_insert(0.0) += c;
        }
        Self::from_map(nvars, map)
    }

    fn from_map(nvars: usize, map: BTreeMap<Vec<u16>, f64>) -> Self {
        let mut exps = Vec::with_capacity(map.len() * nvars);
        let mut coeffs = Vec::with_capacity(map.len());
        for (e, c) in map {
            if c != 0.0 {
                exps.extend_from_slice(&e);
                coeffs.push(c);
            }
        }
        Self { nvars, exps, coeffs }
    }

    fn to_map(&self) -> BTreeMap<Vec<u16>, f64> {
        self.terms().map(|(e, c)| (e.to_vec(), c)).collect()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u16], f64)> {
        self.exps.chunks(self.nvars.max(1)).zip(self.coeffs.iter().copied())
    }

    pub fn degree(&self) -> usize {
        self.terms().map(|(e, _)| e.iter().map(|&k| k as usize).sum()).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> f64 {
        self.terms().find(|(e, _)| e.iter().all(|&k| k == 0)).map(|(_, c)| c).unwrap_or(0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { nvars: self.nvars, exps: self.exps.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut map = self.to_map();
        for (e, c) in other.terms() {
            *map.entry(e.to_vec()).or_insert(0.0) += c;
        }
        Self::from_map(self.nvars, map)
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.add(&Self::constant(self.nvars, c))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut map: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                let e: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *map.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        Self::from_map(self.nvars, map)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// p(M x): substitutes x_i ↦ Σ_j M_ij x_j.
    pub fn compose_linear(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), self.nvars);
        let n = self.nvars;
        let images: Vec<Self> = (0..n)
            .map(|i| {
                Self::from_terms(
                    n,
                    (0..n).map(|j| {
                        let mut e = vec![0; n];
                        e[j] = 1;
                        (e, m[(i, j)])
                    }),
                )
            })
            .collect();
        let maxdeg = self.degree() as u32;
        // powers[i][k] = (M x)_i^k
        let powers: Vec<Vec<Self>> = images
            .iter()
            .map(|p| {
                let mut v = vec![Self::constant(n, 1.0)];
                for k in 1..=maxdeg as usize {
                    let next = v[k - 1].mul(p);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Self::zero(n);
        for (e, c) in self.terms() {
            let mut t = Self::constant(n, c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&powers[i][k as usize]);
                }
            }
            out = out.add(&t);
        }
        out
    }

    fn power_table(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let deg = self.degree();
        x.iter()
            .map(|&xi| {
                let mut v = Vec::with_capacity(deg + 1);
                let mut p = 1.0;
                for _ in 0..=deg {
                    v.push(p);
                    p *= xi;
                }
                v
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let pw = self.power_table(x);
        let mut s = 0.0;
        for (e, c) in self.terms() {
            let mut m = c;
            for (i, &k) in e.iter().enumerate() {
                m *= pw[i][k as usize];
            }
            s += m;
        }
        s
    }

    /// Value and ambient gradient.
    pub fn eval_grad(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let n = self.nvars;
        let pw = self.power_table(x);
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        for (e, c) in self.terms() {
            let mut m = c;
            for (i, &k) in e.iter().enumerate() {
                m *= pw[i][k as usize];
            }
            value += m;
            for j in 0..n {
                let kj = e[j] as usize;
                if kj == 0 {
                    continue;
                }
                let mut d = c * kj as f64 * pw[j][kj - 1];
                for (i, &k) in e.iter().enumerate() {
                    if i != j {
                        d *= pw[i][k as usize];
                    }
                }
                grad[j] += d;
            }
        }
        (value, grad)
    }

    /// Value, ambient gradient and ambient Hessian.
    pub fn jet(&self, x: &[f64]) -> AmbientJet {
        let n = self.nvars;
        let pw = self.power_table(x);
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        // factor[i] = x_i^{e_i}, dfac = e x^{e-1}, ddfac = e(e-1) x^{e-2}
        let mut fac = vec![0.0; n];
        let mut dfac = vec![0.0; n];
        let mut ddfac = vec![0.0; n];
        for (e, c) in self.terms() {
            for i in 0..n {
                let k = e[i] as usize;
                fac[i] = pw[i][k];
                dfac[i] = if k >= 1 { k as f64 * pw[i][k - 1] } else { 0.0 };
                ddfac[i] = if k >= 2 { (k * (k - 1)) as f64 * pw[i][k - 2] } else { 0.0 };
            }
            value += c * fac.iter().product::<f64>();
            for j in 0..n {
                if e[j] == 0 {
                    continue;
                }
                let mut d = c * dfac[j];
                for i in 0..n {
                    if i != j {
                        d *= fac[i];
                    }
                }
                grad[j] += d;
                for l in j..n {
                    let h = if l == j {
                        if e[j] < 2 {
                            continue;
                        }
                        let mut h = c * ddfac[j];
                        for i in 0..n {
                            if i != j {
                                h *= fac[i];
                            }
                        }
                        h
                    } else {
                        if e[l] == 0 {
                            continue;
                        }
                        let mut h = c * dfac[j] * dfac[l];
                        for i in 0..n {
                            if i != j && i != l {
                                h *= fac[i];
                            }
                        }
                        h
                    };
                    hess[(j, l)] += h;
                    if l != j {
                        hess[(l, j)] += h;
                    }
                }
            }
        }
        AmbientJet { value, grad, hess }
    }
}
