//! Dense tensors, flattened parameter vectors and labelled batches.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense `f64` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from external data, rejecting NaN/Inf entries.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape {
                context: "Tensor::new".into(),
                expected: shape,
                actual: vec![data.len()],
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {pos}")));
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

    /// Internal constructor for values produced by our own kernels.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
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

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[&Tensor]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot stack zero tensors".into()))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(Error::Shape {
                    context: "Tensor::stack".into(),
                    expected: first.shape.clone(),
                    actual: t.shape.clone(),
                });
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = Vec::with_capacity(first.shape.len() + 1);
        shape.push(items.len());
        shape.extend_from_slice(&first.shape);
        Ok(Tensor { shape, data })
    }
}

/// One named slice of a flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
    /// Whether the l2 penalty applies to this slot. Normalization-layer
    /// scale/shift parameters are excluded.
    pub regularized: bool,
}

impl LayerSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, contiguous, non-overlapping layer slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    slots: Vec<LayerSlot>,
    total: usize,
}

impl Layout {
    /// Builds a layout from `(name, shape, regularized)` triples, assigning
    /// contiguous offsets in order.
    pub fn from_shapes<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<usize>, bool)>,
        S: Into<String>,
    {
        let mut offset = 0;
        let slots = entries
            .into_iter()
            .map(|(name, shape, regularized)| {
                let slot = LayerSlot {
                    name: name.into(),
                    offset,
                    shape,
                    regularized,
                };
                offset += slot.len();
                slot
            })
            .collect();
        Self {
            slots,
            total: offset,
        }
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&LayerSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    /// Checks the offsets are contiguous and sum to the total.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for s in &self.slots {
            if s.offset != expected {
                return Err(Error::LayoutMismatch(format!(
                    "slot `{}` starts at {} but previous slot ends at {}",
                    s.name, s.offset, expected
                )));
            }
            expected += s.len();
        }
        if expected != self.total {
            return Err(Error::LayoutMismatch(format!(
                "slots cover {expected} entries, layout declares {}",
                self.total
            )));
        }
        Ok(())
    }
}

/// Flattened model parameters (or a gradient / direction sharing the same
/// layout).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
    layout: Arc<Layout>,
}

impl ParamVector {
    pub fn new(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.total_len() {
            return Err(Error::LayoutMismatch(format!(
                "data has {} entries, layout expects {}",
                data.len(),
                layout.total_len()
            )));
        }
        Ok(Self { data, layout })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let n = layout.total_len();
        Self {
            data: vec![0.0; n],
            layout,
        }
    }

    /// Unit vector along coordinate `index`.
    pub fn basis(layout: Arc<Layout>, index: usize) -> Self {
        let mut v = Self::zeros(layout);
        v.data[index] = 1.0;
        v
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn slot(&self, name: &str) -> Option<&[f64]> {
        self.layout.slot(name).map(|s| &self.data[s.range()])
    }

    pub fn check_compatible(&self, other: &ParamVector) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{} slots / {} params vs {} slots / {} params",
                self.layout.slots().len(),
                self.len(),
                other.layout.slots().len(),
                other.len()
            )))
        }
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> ParamVector {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `alpha * self + beta * other`
    pub fn lincomb(&self, alpha: f64, other: &ParamVector, beta: f64) -> Result<ParamVector> {
        self.check_compatible(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(ParamVector {
            data,
            layout: Arc::clone(&self.layout),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Sum of squares over the slots the l2 penalty applies to.
    pub fn regularized_sq_norm(&self) -> f64 {
        self.layout
            .slots()
            .iter()
            .filter(|s| s.regularized)
            .map(|s| dot(&self.data[s.range()], &self.data[s.range()]))
            .sum()
    }

    /// Adds `alpha * x` over regularized slots only.
    pub(crate) fn add_regularized(&mut self, alpha: f64, x: &ParamVector) {
        for s in self.layout.clone().slots().iter().filter(|s| s.regularized) {
            for i in s.range() {
                self.data[i] += alpha * x.data[i];
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A labelled example `z = (x, y)` with a stable id into its dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub input: Tensor,
    pub label: usize,
}

/// A stacked minibatch; the leading input dimension is the batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("batch must be nonempty".into()));
        }
        if inputs.shape().first() != Some(&labels.len()) {
            return Err(Error::Shape {
                context: "Batch::new".into(),
                expected: vec![labels.len()],
                actual: inputs.shape().to_vec(),
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let samples: Vec<&Sample> = samples.into_iter().collect();
        let inputs: Vec<&Tensor> = samples.iter().map(|s| &s.input).collect();
        let labels = samples.iter().map(|s| s.label).collect();
        Batch::new(Tensor::stack(&inputs)?, labels)
    }

    pub fn single(sample: &Sample) -> Self {
        let mut shape = vec![1];
        shape.extend_from_slice(sample.input.shape());
        Batch {
            inputs: Tensor::from_parts(shape, sample.input.data().to_vec()),
            labels: vec![sample.label],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Shape of one example (input shape without the batch axis).
    pub fn example_shape(&self) -> &[usize] {
        &self.inputs.shape()[1..]
    }
}
