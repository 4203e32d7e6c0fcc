/// Location of one named tensor inside a flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorRef {
    pub offset: usize,
    pub len: usize,
}

impl TensorRef {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector plus the named tensors it is partitioned into, in
/// registration order. Gradients and checkpoints follow the same order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    tensors: Vec<TensorSpec>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a zero-filled tensor.
    pub fn alloc(&mut self, name: impl Into<String>, shape: &[usize]) -> TensorRef {
        let offset = self.values.len();
        let len: usize = shape.iter().product();
        self.values.resize(offset + len, 0.0);
        self.tensors.push(TensorSpec { name: name.into(), shape: shape.to_vec(), offset });
        TensorRef { offset, len }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn slice(&self, t: TensorRef) -> &[f64] {
        &self.values[t.range()]
    }

    pub fn slice_mut(&mut self, t: TensorRef) -> &mut [f64] {
        &mut self.values[t.range()]
    }
}
