//! Dense row-major f64 tensors (rank 0, 1, or 2 in practice).

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![], data: vec![v] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self { shape: vec![rows, cols], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar");
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `A (m x n) . B`, where B is a vector (n) or matrix (n x k).
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (m, n) = (self.shape[0], self.shape[1]);
        match other.shape.len() {
            1 => {
                debug_assert_eq!(other.shape[0], n);
                let mut out = vec![0.0; m];
                for r in 0..m {
                    let row = &self.data[r * n..(r + 1) * n];
                    out[r] = row.iter().zip(&other.data).map(|(a, b)| a * b).sum();
                }
                Tensor::vector(out)
            }
            2 => {
                let k = other.shape[1];
                debug_assert_eq!(other.shape[0], n);
                let mut out = vec![0.0; m * k];
                for r in 0..m {
                    for j in 0..n {
                        let a = self.data[r * n + j];
                        if a == 0.0 {
                            continue;
                        }
                        let brow = &other.data[j * k..(j + 1) * k];
                        let orow = &mut out[r * k..(r + 1) * k];
                        for c in 0..k {
                            orow[c] += a * brow[c];
                        }
                    }
                }
                Tensor::matrix(m, k, out)
            }
            _ => panic!("matmul rhs must be rank 1 or 2"),
        }
    }

    pub fn transposed(&self) -> Tensor {
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            for c in 0..n {
                out[c * m + r] = self.data[r * n + c];
            }
        }
        Tensor::matrix(n, m, out)
    }

    /// Outer product of two vectors: (m) x (n) -> (m x n).
    pub fn outer(&self, other: &Tensor) -> Tensor {
        let m = self.shape[0];
        let n = other.shape[0];
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            for c in 0..n {
                out[r * n + c] = self.data[r] * other.data[c];
            }
        }
        Tensor::matrix(m, n, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.shape, other.shape);
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
