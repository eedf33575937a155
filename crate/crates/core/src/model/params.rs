//! Parameter container. Logical matrices (B, A^k, C^k, T_A^k, T_C^k, W) are
//! resolved onto free storages according to the tying scheme, so an update
//! through one role is visible through every aliased role.
//!
//! Adjacent tying stores B, A^1, C^1..C^K and the temporal mirrors; A^{k+1}
//! resolves to the C^k storage and the output map reads column r of C^K as
//! its row r (the transpose view). Layer-wise tying stores one A, one C, one
//! W and one temporal pair.

use rand::Rng;

use super::{ModelConfig, ModelError, Tying};
use crate::corpus::Bag;
use crate::matrix::Matrix;

pub(crate) const INIT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct MemN2NParams {
    tying: Tying,
    hops: usize,
    answer_size: usize,
    pub(crate) b: Matrix,
    pub(crate) a1: Matrix,
    pub(crate) c: Vec<Matrix>,
    pub(crate) w: Option<Matrix>,
    pub(crate) t_a1: Matrix,
    pub(crate) t_c: Vec<Matrix>,
}

impl MemN2NParams {
    pub fn tying(&self) -> Tying {
        self.tying
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn answer_size(&self) -> usize {
        self.answer_size
    }

    pub fn vocab_size(&self) -> usize {
        self.b.cols()
    }

    pub fn d(&self) -> usize {
        self.b.rows()
    }

    pub fn memory_capacity(&self) -> usize {
        self.t_a1.rows()
    }

    /// Question embedding, d x |V|.
    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// Input memory embedding for hop k (1-based).
    pub fn a(&self, k: usize) -> &Matrix {
        debug_assert!(k >= 1 && k <= self.hops);
        match self.tying {
            Tying::Adjacent => {
                if k == 1 {
                    &self.a1
                } else {
                    &self.c[k - 2]
                }
            }
            Tying::Layerwise => &self.a1,
        }
    }

    /// Output memory embedding for hop k (1-based).
    pub fn c(&self, k: usize) -> &Matrix {
        debug_assert!(k >= 1 && k <= self.hops);
        match self.tying {
            Tying::Adjacent => &self.c[k - 1],
            Tying::Layerwise => &self.c[0],
        }
    }

    pub fn a_mut(&mut self, k: usize) -> &mut Matrix {
        match self.tying {
            Tying::Adjacent => {
                if k == 1 {
                    &mut self.a1
                } else {
                    &mut self.c[k - 2]
                }
            }
            Tying::Layerwise => &mut self.a1,
        }
    }

    pub fn c_mut(&mut self, k: usize) -> &mut Matrix {
        match self.tying {
            Tying::Adjacent => &mut self.c[k - 1],
            Tying::Layerwise => &mut self.c[0],
        }
    }

    /// Temporal matrix added to input memories at hop k, M x d.
    pub fn t_a(&self, k: usize) -> &Matrix {
        match self.tying {
            Tying::Adjacent => {
                if k == 1 {
                    &self.t_a1
                } else {
                    &self.t_c[k - 2]
                }
            }
            Tying::Layerwise => &self.t_a1,
        }
    }

    /// Temporal matrix added to output memories at hop k, M x d.
    pub fn t_c(&self, k: usize) -> &Matrix {
        match self.tying {
            Tying::Adjacent => &self.t_c[k - 1],
            Tying::Layerwise => &self.t_c[0],
        }
    }

    /// Entry (r, c) of the answer map W (answer_size x d).
    pub fn w_entry(&self, r: usize, col: usize) -> f64 {
        match self.tying {
            Tying::Adjacent => self.c[self.hops - 1][(col, r)],
            Tying::Layerwise => self.w.as_ref().unwrap()[(r, col)],
        }
    }

    pub fn set_w_entry(&mut self, r: usize, col: usize, value: f64) {
        match self.tying {
            Tying::Adjacent => self.c[self.hops - 1][(col, r)] = value,
            Tying::Layerwise => self.w.as_mut().unwrap()[(r, col)] = value,
        }
    }

    /// logits = W u.
    pub fn answer_logits(&self, u: &[f64]) -> Vec<f64> {
        match self.tying {
            Tying::Adjacent => {
                let ck = &self.c[self.hops - 1];
                (0..self.answer_size)
                    .map(|r| (0..ck.rows()).map(|row| ck[(row, r)] * u[row]).sum())
                    .collect()
            }
            Tying::Layerwise => self.w.as_ref().unwrap().mat_vec(u),
        }
    }

    /// du = W^T dz, the pullback of the answer map.
    pub fn answer_logits_backward(&self, dz: &[f64]) -> Vec<f64> {
        let d = self.d();
        let mut du = vec![0.0; d];
        match self.tying {
            Tying::Adjacent => {
                let ck = &self.c[self.hops - 1];
                for (r, g) in dz.iter().enumerate() {
                    for (row, slot) in du.iter_mut().enumerate() {
                        *slot += ck[(row, r)] * g;
                    }
                }
            }
            Tying::Layerwise => {
                let w = self.w.as_ref().unwrap();
                for (r, g) in dz.iter().enumerate() {
                    for (col, slot) in du.iter_mut().enumerate() {
                        *slot += w[(r, col)] * g;
                    }
                }
            }
        }
        du
    }

    /// Free storages, in the fixed order used for clipping, updates and the
    /// container format.
    pub fn storage_names(&self) -> Vec<String> {
        storage_names(self.tying, self.hops)
    }

    pub fn storages(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = vec![
            ("B".to_string(), &self.b),
            (a1_name(self.tying), &self.a1),
        ];
        for (i, m) in self.c.iter().enumerate() {
            out.push((c_name(self.tying, i), m));
        }
        if let Some(w) = &self.w {
            out.push(("W".to_string(), w));
        }
        out.push((ta1_name(self.tying), &self.t_a1));
        for (i, m) in self.t_c.iter().enumerate() {
            out.push((tc_name(self.tying, i), m));
        }
        out
    }

    pub fn storages_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let tying = self.tying;
        let mut out: Vec<(String, &mut Matrix)> = vec![
            ("B".to_string(), &mut self.b),
            (a1_name(tying), &mut self.a1),
        ];
        for (i, m) in self.c.iter_mut().enumerate() {
            out.push((c_name(tying, i), m));
        }
        if let Some(w) = &mut self.w {
            out.push(("W".to_string(), w));
        }
        out.push((ta1_name(tying), &mut self.t_a1));
        for (i, m) in self.t_c.iter_mut().enumerate() {
            out.push((tc_name(tying, i), m));
        }
        out
    }

    /// Re-zero the padding-token column of every token-indexed storage.
    pub fn zero_null_columns(&mut self) {
        self.b.zero_column(crate::corpus::NULL_INDEX);
        self.a1.zero_column(crate::corpus::NULL_INDEX);
        for c in &mut self.c {
            c.zero_column(crate::corpus::NULL_INDEX);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.storages().iter().all(|(_, m)| m.all_finite())
    }

    pub(crate) fn from_storages(
        tying: Tying,
        hops: usize,
        answer_size: usize,
        mut take: impl FnMut(&str) -> Result<Matrix, ModelError>,
    ) -> Result<MemN2NParams, ModelError> {
        let b = take("B")?;
        let a1 = take(&a1_name(tying))?;
        let n_c = match tying {
            Tying::Adjacent => hops,
            Tying::Layerwise => 1,
        };
        let mut c = Vec::with_capacity(n_c);
        for i in 0..n_c {
            c.push(take(&c_name(tying, i))?);
        }
        let w = match tying {
            Tying::Adjacent => None,
            Tying::Layerwise => Some(take("W")?),
        };
        let t_a1 = take(&ta1_name(tying))?;
        let mut t_c = Vec::with_capacity(n_c);
        for i in 0..n_c {
            t_c.push(take(&tc_name(tying, i))?);
        }
        Ok(MemN2NParams {
            tying,
            hops,
            answer_size,
            b,
            a1,
            c,
            w,
            t_a1,
            t_c,
        })
    }
}

fn a1_name(tying: Tying) -> String {
    match tying {
        Tying::Adjacent => "A1".to_string(),
        Tying::Layerwise => "A".to_string(),
    }
}

fn c_name(tying: Tying, i: usize) -> String {
    match tying {
        Tying::Adjacent => format!("C{}", i + 1),
        Tying::Layerwise => "C".to_string(),
    }
}

fn ta1_name(tying: Tying) -> String {
    match tying {
        Tying::Adjacent => "TA1".to_string(),
        Tying::Layerwise => "TA".to_string(),
    }
}

fn tc_name(tying: Tying, i: usize) -> String {
    match tying {
        Tying::Adjacent => format!("TC{}", i + 1),
        Tying::Layerwise => "TC".to_string(),
    }
}

pub(crate) fn storage_names(tying: Tying, hops: usize) -> Vec<String> {
    let mut names = vec!["B".to_string(), a1_name(tying)];
    let n_c = match tying {
        Tying::Adjacent => hops,
        Tying::Layerwise => 1,
    };
    for i in 0..n_c {
        names.push(c_name(tying, i));
    }
    if tying == Tying::Layerwise {
        names.push("W".to_string());
    }
    names.push(ta1_name(tying));
    for i in 0..n_c {
        names.push(tc_name(tying, i));
    }
    names
}

/// Fresh parameters: every free storage i.i.d. Gaussian(0, 0.1^2) in storage
/// order, optional pretrained columns copied into A^1 and B, padding columns
/// zeroed.
pub fn init_params<R: Rng>(
    config: &ModelConfig,
    rng: &mut R,
    pretrained: Option<&Matrix>,
) -> Result<MemN2NParams, ModelError> {
    config.validate()?;
    let (d, v, m, s) = (
        config.d,
        config.vocab_size,
        config.memory_capacity,
        config.answer_size,
    );
    if let Some(p) = pretrained {
        if p.shape() != (d, v) {
            return Err(ModelError::PretrainedShape {
                got_rows: p.rows(),
                got_cols: p.cols(),
                want_rows: d,
                want_cols: v,
            });
        }
    }

    let n_c = match config.tying {
        Tying::Adjacent => config.hops,
        Tying::Layerwise => 1,
    };
    let b = Matrix::gaussian(d, v, INIT_SIGMA, rng);
    let a1 = Matrix::gaussian(d, v, INIT_SIGMA, rng);
    let c: Vec<Matrix> = (0..n_c).map(|_| Matrix::gaussian(d, v, INIT_SIGMA, rng)).collect();
    let w = match config.tying {
        Tying::Adjacent => None,
        Tying::Layerwise => Some(Matrix::gaussian(s, d, INIT_SIGMA, rng)),
    };
    let t_a1 = Matrix::gaussian(m, d, INIT_SIGMA, rng);
    let t_c: Vec<Matrix> = (0..n_c).map(|_| Matrix::gaussian(m, d, INIT_SIGMA, rng)).collect();

    let mut params = MemN2NParams {
        tying: config.tying,
        hops: config.hops,
        answer_size: s,
        b,
        a1,
        c,
        w,
        t_a1,
        t_c,
    };
    if let Some(p) = pretrained {
        params.a1 = p.clone();
        params.b = p.clone();
    }
    params.zero_null_columns();
    Ok(params)
}

/// Sparse bag times embedding column sum: out += M Φ(bag).
pub(crate) fn embed_bag(matrix: &Matrix, bag: &Bag, out: &mut [f64]) {
    for &(token, count) in bag.entries() {
        for (r, slot) in out.iter_mut().enumerate() {
            *slot += matrix[(r, token)] * count;
        }
    }
}
