//! Flat parameter vectors with a layout descriptor.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Weight,
    Bias,
    /// Unstructured coordinates (analytic losses).
    Coordinates,
}

/// One contiguous block of a parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub layer: usize,
    pub kind: BlockKind,
    pub range: Range<usize>,
    /// (rows, cols) of the block, row-major.
    pub shape: (usize, usize),
}

/// Maps (layer, weight/bias) to index ranges of a flat vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    blocks: Vec<Block>,
    len: usize,
}

impl Layout {
    pub fn new() -> Self {
        Self {
            blocks: Vec::new(),
            len: 0,
        }
    }

    /// A single unstructured block of `n` coordinates.
    pub fn flat(n: usize) -> Self {
        let mut l = Self::new();
        l.push(0, BlockKind::Coordinates, (n, 1));
        l
    }

    /// Appends a block and returns its range.
    pub fn push(&mut self, layer: usize, kind: BlockKind, shape: (usize, usize)) -> Range<usize> {
        let range = self.len..self.len + shape.0 * shape.1;
        self.len = range.end;
        self.blocks.push(Block {
            layer,
            kind,
            range: range.clone(),
            shape,
        });
        range
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, layer: usize, kind: BlockKind) -> Option<&Block> {
        self.blocks
            .iter()
            .find(|b| b.layer == layer && b.kind == kind)
    }
}

impl Default for Layout {
    fn default() -> Self {
        Self::new()
    }
}

/// A parameter vector θ together with its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
    layout: Arc<Layout>,
}

impl ParamVector {
    pub fn new(data: Vec<f64>, layout: Arc<Layout>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: data.len(),
            });
        }
        Ok(Self { data, layout })
    }

    /// Unstructured vector with a flat layout.
    pub fn from_vec(data: Vec<f64>) -> Self {
        let layout = Arc::new(Layout::flat(data.len()));
        Self { data, layout }
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        Self {
            data: vec![0.0; layout.len()],
            layout,
        }
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

    /// Same layout, new values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(data, self.layout.clone())
    }

    pub fn block(&self, layer: usize, kind: BlockKind) -> Option<&[f64]> {
        self.layout
            .block(layer, kind)
            .map(|b| &self.data[b.range.clone()])
    }

    pub fn check_layout(&self, other: &ParamVector) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{} vs {} parameters",
                self.len(),
                other.len()
            )))
        }
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_layout(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// `self + a·x`
    pub fn axpy(&self, a: f64, x: &ParamVector) -> Result<ParamVector> {
        self.check_layout(x)?;
        let data = self
            .data
            .iter()
            .zip(&x.data)
            .map(|(s, x)| s + a * x)
            .collect();
        Ok(Self {
            data,
            layout: self.layout.clone(),
        })
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.axpy(-1.0, other)
    }

    pub fn scaled(&self, a: f64) -> ParamVector {
        Self {
            data: self.data.iter().map(|x| a * x).collect(),
            layout: self.layout.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
