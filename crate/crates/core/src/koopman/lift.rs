use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftKind {
    /// Monomials of the lift arguments.
    Polynomial,
    /// Distances `‖g − q_j‖₂` to fixed centers, then monomials of those distances.
    RbfThenPolynomial,
}

/// Nonlinear lifting `υᵏ = f_lift(g(xᵏ), hᵏ)`.
///
/// Monomials are enumerated in graded lexicographic order: by total degree, then by the
/// non-decreasing variable index sequence `i₁ ≤ i₂ ≤ … ≤ i_d` compared lexicographically.
/// For two variables at degree 2 that is `x₀², x₀x₁, x₁²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    pub kind: LiftKind,
    #[serde(default = "default_degree")]
    pub max_degree: usize,
    #[serde(default)]
    pub include_linear: bool,
    /// Polynomial kind only: lift `[g; h]` instead of `g` alone.
    #[serde(default = "yes")]
    pub use_history: bool,
    /// Append the delay embedding `h` to the lifted features unchanged.
    #[serde(default)]
    pub append_history: bool,
    #[serde(default)]
    pub rbf_centers: Vec<Vec<f64>>,
    #[serde(default = "default_rbf_count")]
    pub rbf_count: usize,
    #[serde(default = "default_cap")]
    pub max_dim: usize,
}

fn default_degree() -> usize {
    4
}
fn yes() -> bool {
    true
}
fn default_rbf_count() -> usize {
    10
}
fn default_cap() -> usize {
    20_000
}

impl LiftSpec {
    pub fn polynomial(max_degree: usize, use_history: bool) -> Self {
        Self {
            kind: LiftKind::Polynomial,
            max_degree,
            include_linear: false,
            use_history,
            append_history: false,
            rbf_centers: Vec::new(),
            rbf_count: 0,
            max_dim: default_cap(),
        }
    }

    pub fn rbf(centers: Vec<Vec<f64>>, max_degree: usize) -> Self {
        Self {
            kind: LiftKind::RbfThenPolynomial,
            max_degree,
            include_linear: false,
            use_history: false,
            append_history: false,
            rbf_count: centers.len(),
            rbf_centers: centers,
            max_dim: default_cap(),
        }
    }

    /// A lift producing no features: the model regresses on `[g; u]` only.
    pub fn none() -> Self {
        Self::polynomial(1, false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree == 0 {
            return Err(Error::InvalidArgument("max_degree must be at least 1".into()));
        }
        if self.kind == LiftKind::RbfThenPolynomial {
            if self.rbf_centers.len() != self.rbf_count {
                return Err(Error::InvalidArgument(format!(
                    "rbf_count is {} but {} centers are set",
                    self.rbf_count,
                    self.rbf_centers.len()
                )));
            }
            if let Some(c) = self.rbf_centers.first() {
                if self.rbf_centers.iter().any(|q| q.len() != c.len()) {
                    return Err(Error::InvalidArgument("rbf centers differ in dimension".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of variables the monomials are formed from.
    pub fn n_variables(&self, n_obs: usize, embed_dim: usize) -> usize {
        match self.kind {
            LiftKind::Polynomial if self.use_history => n_obs + embed_dim,
            LiftKind::Polynomial => n_obs,
            LiftKind::RbfThenPolynomial => self.rbf_count,
        }
    }

    /// Lift dimension `L` in closed form.
    pub fn output_dim(&self, n_obs: usize, embed_dim: usize) -> usize {
        let d = self.n_variables(n_obs, embed_dim);
        let lo = if self.include_linear { 1 } else { 2 };
        let appended = if self.append_history { embed_dim } else { 0 };
        (lo..=self.max_degree).map(|deg| n_monomials(d, deg)).sum::<usize>() + appended
    }

    /// Precomputes the monomial table for observables of size `n_obs` and embeddings of size `embed_dim`.
    pub fn compile(&self, n_obs: usize, embed_dim: usize) -> Result<Lift> {
        self.validate()?;
        if self.kind == LiftKind::RbfThenPolynomial {
            if let Some(c) = self.rbf_centers.first() {
                if c.len() != n_obs {
                    return Err(Error::InvalidArgument(format!(
                        "rbf centers have dimension {}, observables have {n_obs}",
                        c.len()
                    )));
                }
            }
        }
        let dim = self.output_dim(n_obs, embed_dim);
        if dim > self.max_dim {
            return Err(Error::LiftTooLarge { dim, cap: self.max_dim });
        }
        let nvars = self.n_variables(n_obs, embed_dim);
        let mut table = Vec::new();
        // degree 1: the variables themselves
        for j in 0..nvars {
            table.push(Monomial { parent: None, var: j });
        }
        let mut prev = 0..nvars;
        let mut last_var: Vec<usize> = (0..nvars).collect();
        for _deg in 2..=self.max_degree {
            let start = table.len();
            for idx in prev.clone() {
                for j in last_var[idx]..nvars {
                    table.push(Monomial { parent: Some(idx), var: j });
                    last_var.push(j);
                }
            }
            prev = start..table.len();
        }
        let first_out = if self.include_linear { 0 } else { nvars };
        debug_assert_eq!(table.len() - first_out + if self.append_history { embed_dim } else { 0 }, dim);
        Ok(Lift {
            spec: self.clone(),
            n_obs,
            embed_dim,
            nvars,
            table,
            first_out,
        })
    }
}

/// `C(n + d − 1, d)`, the number of degree-`d` monomials in `n` variables.
pub fn n_monomials(n: usize, d: usize) -> usize {
    if d == 0 {
        return 1;
    }
    if n == 0 {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..d as u128 {
        c = c * (n as u128 + i) / (i + 1);
    }
    c as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Monomial {
    parent: Option<usize>,
    var: usize,
}

/// A compiled lift ready for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    spec: LiftSpec,
    n_obs: usize,
    embed_dim: usize,
    nvars: usize,
    table: Vec<Monomial>,
    first_out: usize,
}

impl Lift {
    pub fn spec(&self) -> &LiftSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.n_monomial_features() + if self.spec.append_history { self.embed_dim } else { 0 }
    }

    fn n_monomial_features(&self) -> usize {
        self.table.len() - self.first_out
    }

    /// Exponent vector of monomial feature `i`.
    pub fn exponents(&self, i: usize) -> Vec<u32> {
        let mut e = vec![0u32; self.nvars];
        let mut cur = Some(self.first_out + i);
        while let Some(c) = cur {
            e[self.table[c].var] += 1;
            cur = self.table[c].parent;
        }
        e
    }

    fn variables(&self, g: &[f64], h: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self.spec.kind {
            LiftKind::Polynomial => {
                out.extend_from_slice(g);
                if self.spec.use_history {
                    out.extend_from_slice(h);
                }
            }
            LiftKind::RbfThenPolynomial => {
                for q in &self.spec.rbf_centers {
                    let d2: f64 = g.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    out.push(d2.sqrt());
                }
            }
        }
    }

    /// Writes `υ` into `out` (length [`Lift::dim`]).
    pub fn evaluate_into(&self, g: &[f64], h: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
        if g.len() != self.n_obs || h.len() != self.embed_dim {
            return Err(Error::InvalidArgument(format!(
                "lift expects g of length {} and h of length {}, got {} and {}",
                self.n_obs,
                self.embed_dim,
                g.len(),
                h.len()
            )));
        }
        if out.len() != self.dim() {
            return Err(Error::InvalidArgument("lift output buffer has the wrong length".into()));
        }
        let mut vars = Vec::with_capacity(self.nvars);
        self.variables(g, h, &mut vars);
        scratch.clear();
        scratch.resize(self.table.len(), 0.0);
        for (i, m) in self.table.iter().enumerate() {
            scratch[i] = match m.parent {
                None => vars[m.var],
                Some(p) => scratch[p] * vars[m.var],
            };
        }
        let nm = self.n_monomial_features();
        out[..nm].copy_from_slice(&scratch[self.first_out..]);
        if self.spec.append_history {
            out[nm..].copy_from_slice(h);
        }
        Ok(())
    }

    pub fn evaluate(&self, g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        let mut scratch = Vec::new();
        self.evaluate_into(g, h, &mut scratch, &mut out)?;
        Ok(out)
    }
}

/// One-shot lift evaluation; prefer [`LiftSpec::compile`] in loops.
pub fn evaluate_lift(spec: &LiftSpec, g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    spec.compile(g.len(), h.len())?.evaluate(g, h)
}

/// Draws `count` centers with coordinate `i` uniform on `ranges[i]`.
pub fn rbf_random(count: usize, ranges: &[(f64, f64)], seed: u64) -> Result<Vec<Vec<f64>>> {
    if ranges.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::InvalidArgument("rbf center ranges must be finite with lo ≤ hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            ranges
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..hi) })
                .collect()
        })
        .collect())
}
