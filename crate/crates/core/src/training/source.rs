use crate::error::{D2nnError, Result};
use crate::optics::{ComplexField, GridSpec};

/// One input field and its optional class label.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: ComplexField,
    pub label: Option<usize>,
}

/// Random-access dataset producing encoded input fields.
///
/// Implementations may encode lazily; `sample` must be deterministic.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn grid(&self) -> GridSpec;

    fn sample(&self, index: usize) -> Result<Sample>;
}

/// Pre-encoded fields held in memory.
#[derive(Debug, Clone)]
pub struct FieldSet {
    grid: GridSpec,
    samples: Vec<Sample>,
}

impl FieldSet {
    pub fn new(grid: GridSpec, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            grid.ensure_same(s.input.grid())?;
        }
        Ok(FieldSet { grid, samples })
    }

    pub fn labeled(grid: GridSpec, items: Vec<(ComplexField, usize)>) -> Result<Self> {
        Self::new(
            grid,
            items
                .into_iter()
                .map(|(input, label)| Sample {
                    input,
                    label: Some(label),
                })
                .collect(),
        )
    }

    pub fn unlabeled(grid: GridSpec, fields: Vec<ComplexField>) -> Result<Self> {
        Self::new(
            grid,
            fields
                .into_iter()
                .map(|input| Sample { input, label: None })
                .collect(),
        )
    }
}

impl SampleSource for FieldSet {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        self.samples
            .get(index)
            .cloned()
            .ok_or_else(|| D2nnError::InvalidArgument(format!("sample index {index} out of range")))
    }
}

/// A view of selected indices of another source.
pub struct Subset<'a> {
    source: &'a dyn SampleSource,
    indices: Vec<usize>,
}

impl<'a> Subset<'a> {
    pub fn new(source: &'a dyn SampleSource, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= source.len()) {
            return Err(D2nnError::InvalidArgument(format!(
                "subset index {bad} out of range for {} samples",
                source.len()
            )));
        }
        Ok(Subset { source, indices })
    }

    pub fn range(source: &'a dyn SampleSource, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(source, range.collect())
    }
}

impl SampleSource for Subset<'_> {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn grid(&self) -> GridSpec {
        self.source.grid()
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        let i = *self
            .indices
            .get(index)
            .ok_or_else(|| D2nnError::InvalidArgument(format!("sample index {index} out of range")))?;
        self.source.sample(i)
    }
}
