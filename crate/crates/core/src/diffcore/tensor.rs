use crate::error::{Error, Result};
use rand::Rng;

/// Dense row-major tensor of `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "tensor",
                format!(
                    "shape {shape:?} needs {expected} values, got {}",
                    data.len()
                ),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().all(|&d| d == 1)
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// FNV-1a over the bit patterns; used to detect parameter changes.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    if n < 8 {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Appends `w x + b` for one input row; `w` is row-major `(b.len(), x.len())`.
#[inline]
pub fn affine_row(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    match x.len() {
        0 => out.extend_from_slice(b),
        1 => out.extend(w.iter().zip(b).map(|(wi, bi)| bi + wi * x[0])),
        n => match sparse_support(x) {
            Some(nz) => out.extend(
                w.chunks_exact(n)
                    .zip(b)
                    .map(|(wr, bi)| bi + nz.iter().map(|&j| wr[j] * x[j]).sum::<f64>()),
            ),
            None => out.extend(w.chunks_exact(n).zip(b).map(|(wr, bi)| bi + dot(wr, x))),
        },
    }
}

/// Indices of the non-zero entries when they are few enough for index
/// loops to beat dense ones (one-hot states, ReLU outputs).
fn sparse_support(x: &[f64]) -> Option<Vec<usize>> {
    if x.len() < 32 {
        return None;
    }
    let limit = x.len() / 8;
    let mut nz = Vec::with_capacity(limit);
    for (j, v) in x.iter().enumerate() {
        if *v != 0.0 {
            if nz.len() == limit {
                return None;
            }
            nz.push(j);
        }
    }
    Some(nz)
}

/// `dw += g x^T` with `dw` row-major `(g.len(), x.len())`.
#[inline]
pub fn outer_acc(g: &[f64], x: &[f64], dw: &mut [f64]) {
    match x.len() {
        0 => {}
        1 => axpy(x[0], g, dw),
        n => match sparse_support(x) {
            Some(nz) => {
                for (row, &go) in dw.chunks_exact_mut(n).zip(g) {
                    if go != 0.0 {
                        for &j in &nz {
                            row[j] += go * x[j];
                        }
                    }
                }
            }
            None => {
                for (row, &go) in dw.chunks_exact_mut(n).zip(g) {
                    if go != 0.0 {
                        axpy(go, x, row);
                    }
                }
            }
        },
    }
}

/// `dx += w^T g` with `w` row-major `(g.len(), dx.len())`.
#[inline]
pub fn transposed_acc(w: &[f64], g: &[f64], dx: &mut [f64]) {
    match dx.len() {
        0 => {}
        1 => dx[0] += dot(w, g),
        n => {
            for (wr, &go) in w.chunks_exact(n).zip(g) {
                if go != 0.0 {
                    axpy(go, wr, dx);
                }
            }
        }
    }
}

/// `y += alpha * x` over the common prefix.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (d, xi) in y.iter_mut().zip(x) {
        *d += alpha * xi;
    }
}
