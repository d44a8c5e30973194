//! Named tensor storage for every learned parameter of the engine.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ModelFormat(format!(
                "tensor shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(v: f32) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Learned tensors addressed by dotted names, e.g. `radiance.film.3.weight`.
///
/// A `BTreeMap` keeps iteration (and therefore serialization) order stable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetParams {
    tensors: BTreeMap<String, Tensor>,
}

impl NetParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), tensor)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingWeights(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::MissingWeights(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    /// Fetches a tensor and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::ModelFormat(format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> {
        self.tensors
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Merges `other` into `self`, replacing tensors with the same name.
    pub fn extend(&mut self, other: NetParams) {
        self.tensors.extend(other.tensors);
    }
}

/// Weight matrix `(out, in)` and bias `(out)` of a dense layer.
#[derive(Debug, Clone, Copy)]
pub struct DenseRef<'a> {
    pub weight: &'a [f32],
    pub bias: &'a [f32],
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<'a> DenseRef<'a> {
    /// Resolves `{prefix}.weight` / `{prefix}.bias`; the input width is read
    /// from the stored shape unless `in_dim` pins it.
    pub fn load(
        params: &'a NetParams,
        prefix: &str,
        in_dim: Option<usize>,
        out_dim: usize,
    ) -> Result<Self> {
        let w = params.get(&format!("{prefix}.weight"))?;
        if w.shape.len() != 2 || w.shape[0] != out_dim {
            return Err(Error::ModelFormat(format!(
                "`{prefix}.weight` has shape {:?}, expected ({out_dim}, _)",
                w.shape
            )));
        }
        let in_actual = w.shape[1];
        if let Some(expected) = in_dim {
            if expected != in_actual {
                return Err(Error::ModelFormat(format!(
                    "`{prefix}.weight` has input width {in_actual}, expected {expected}"
                )));
            }
        }
        let b = params.expect(&format!("{prefix}.bias"), &[out_dim])?;
        Ok(Self {
            weight: &w.data,
            bias: &b.data,
            in_dim: in_actual,
            out_dim,
        })
    }

    /// `out[b, o] = bias[o] + sum_i input[b, i] * weight[o, i]` for a row-major batch.
    pub fn forward_batch(&self, input: &[f32], batch: usize, out: &mut [f32]) {
        debug_assert_eq!(input.len(), batch * self.in_dim);
        debug_assert_eq!(out.len(), batch * self.out_dim);
        for row in out.chunks_exact_mut(self.out_dim) {
            row.copy_from_slice(self.bias);
        }
        // SAFETY: slice lengths checked above; strides describe row-major
        // (batch, in) x (in, out) with the weight read transposed.
        unsafe {
            matrixmultiply::sgemm(
                batch,
                self.in_dim,
                self.out_dim,
                1.0,
                input.as_ptr(),
                self.in_dim as isize,
                1,
                self.weight.as_ptr(),
                1,
                self.in_dim as isize,
                1.0,
                out.as_mut_ptr(),
                self.out_dim as isize,
                1,
            );
        }
    }

    pub fn forward(&self, input: &[f32]) -> Vec<f32> {
        let batch = input.len() / self.in_dim;
        let mut out = vec![0.0; batch * self.out_dim];
        self.forward_batch(input, batch, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tensor_is_a_missing_weights_error() {
        let p = NetParams::new();
        assert!(matches!(p.get("nope"), Err(Error::MissingWeights(_))));
    }

    #[test]
    fn dense_matches_naive_product() {
        let mut p = NetParams::new();
        p.insert(
            "l.weight",
            Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap(),
        );
        p.insert("l.bias", Tensor::new(vec![2], vec![0.25, -0.25]).unwrap());
        let d = DenseRef::load(&p, "l", Some(3), 2).unwrap();
        let out = d.forward(&[1.0, 1.0, 1.0, 2.0, 0.0, -1.0]);
        assert_eq!(out, vec![6.25, -0.75, -0.75, -2.25]);
    }

    #[test]
    fn prefix_listing_is_sorted_and_bounded() {
        let mut p = NetParams::new();
        for n in ["a.x", "b.1", "b.0", "c"] {
            p.insert(n, Tensor::scalar(0.0));
        }
        let names: Vec<_> = p.names_with_prefix("b.").collect();
        assert_eq!(names, vec!["b.0", "b.1"]);
    }
}
