use serde::{Deserialize, Serialize};

/// `[channels, height, width]` for feature maps or `[features]` once flattened.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape(pub Vec<usize>);

impl Shape {
    pub fn image(c: usize, h: usize, w: usize) -> Self {
        Shape(vec![c, h, w])
    }

    pub fn flat(n: usize) -> Self {
        Shape(vec![n])
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(c, h, w)` when the shape is a feature map.
    pub fn chw(&self) -> Option<(usize, usize, usize)> {
        match self.0.as_slice() {
            &[c, h, w] => Some((c, h, w)),
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self.0.len(), 1 | 3) && self.0.iter().all(|&d| d > 0)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dims: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", dims.join("×"))
    }
}

/// Row-major tensor of arbitrary elements (integers, slot vectors, ciphertexts).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<E> {
    pub shape: Shape,
    pub data: Vec<E>,
}

impl<E> Tensor<E> {
    pub fn new(shape: Shape, data: Vec<E>) -> Self {
        assert_eq!(shape.len(), data.len(), "tensor data does not match shape {shape}");
        Self { shape, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<F, T>(&self, f: F) -> Tensor<T>
    where
        F: FnMut(&E) -> T,
    {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(f).collect() }
    }
}

/// Transpose per-instance vectors into one slot vector per position: `out[pos][instance]`.
pub fn pack_batch(instances: &[Vec<u64>], shape: &Shape, slots: usize) -> Tensor<Vec<u64>> {
    assert!(instances.len() <= slots, "batch larger than slot count");
    let len = shape.len();
    let data = (0..len)
        .map(|pos| {
            let mut v: Vec<u64> = instances.iter().map(|inst| inst[pos]).collect();
            v.resize(slots, 0);
            v
        })
        .collect();
    Tensor::new(shape.clone(), data)
}

/// Inverse of [`pack_batch`] for the first `count` instances.
pub fn unpack_batch(t: &Tensor<Vec<u64>>, count: usize) -> Vec<Vec<u64>> {
    (0..count).map(|i| t.data.iter().map(|v| v[i]).collect()).collect()
}
