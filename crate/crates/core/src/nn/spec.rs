use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a feed-forward stack.
///
/// Activations flow between layers as `channels x length` blocks stored
/// channel-major in each batch row. Dense layers read the whole block as a
/// flat vector; Conv1d and MaxPool1d work along `length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Valid padding, stride 1.
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    /// Non-overlapping windows (stride = width); a trailing partial window is dropped.
    MaxPool1d {
        width: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Softmax,
}

impl Layer {
    pub fn is_parametric(&self) -> bool {
        matches!(self, Layer::Dense { .. } | Layer::Conv1d { .. })
    }

    pub(crate) fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv1d { .. } => "conv1d",
            Layer::MaxPool1d { .. } => "max_pool1d",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub length: usize,
}

impl Shape {
    pub const fn flat(width: usize) -> Self {
        Self { channels: 1, length: width }
    }

    pub const fn width(&self) -> usize {
        self.channels * self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: Shape,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(input: Shape, layers: Vec<Layer>) -> Result<Self> {
        let spec = Self { input, layers };
        spec.shapes()?;
        Ok(spec)
    }

    /// Input shape of every layer followed by the output shape. Fails when
    /// adjacent layers do not compose.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        if self.input.width() == 0 {
            return Err(Error::config("input shape has zero width"));
        }
        if self.layers.last() != Some(&Layer::Softmax) {
            return Err(Error::config("final layer must be softmax"));
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut cur = self.input;
        shapes.push(cur);
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match *layer {
                Layer::Dense { inputs, outputs } => {
                    if cur.width() != inputs || outputs == 0 {
                        return Err(Error::config(format!(
                            "layer {i}: dense expects {inputs} inputs, receives {}",
                            cur.width()
                        )));
                    }
                    Shape::flat(outputs)
                }
                Layer::Conv1d { in_channels, out_channels, kernel } => {
                    if cur.channels != in_channels || kernel == 0 || out_channels == 0 {
                        return Err(Error::config(format!(
                            "layer {i}: conv1d expects {in_channels} channels, receives {}",
                            cur.channels
                        )));
                    }
                    if cur.length < kernel {
                        return Err(Error::config(format!(
                            "layer {i}: kernel {kernel} longer than input length {}",
                            cur.length
                        )));
                    }
                    Shape { channels: out_channels, length: cur.length - kernel + 1 }
                }
                Layer::MaxPool1d { width } => {
                    if width == 0 || cur.length < width {
                        return Err(Error::config(format!(
                            "layer {i}: pool width {width} invalid for length {}",
                            cur.length
                        )));
                    }
                    Shape { channels: cur.channels, length: cur.length / width }
                }
                Layer::Relu => cur,
                Layer::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::config(format!("layer {i}: dropout rate {rate} outside [0, 1)")));
                    }
                    if !self.dropout_between_dense(i) {
                        return Err(Error::config(format!("layer {i}: dropout must sit between dense layers")));
                    }
                    cur
                }
                Layer::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(Error::config(format!("layer {i}: softmax only allowed last")));
                    }
                    if cur.width() < 2 {
                        return Err(Error::config("softmax needs at least two classes"));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    fn dropout_between_dense(&self, at: usize) -> bool {
        let skip = |l: &&Layer| matches!(l, Layer::Relu | Layer::Dropout { .. });
        let before = self.layers[..at].iter().rev().find(|l| !skip(l));
        let after = self.layers[at + 1..].iter().find(|l| !skip(l));
        matches!(before, Some(Layer::Dense { .. })) && matches!(after, Some(Layer::Dense { .. }))
    }

    pub fn class_count(&self) -> usize {
        self.shapes().map(|s| s.last().map_or(0, Shape::width)).unwrap_or(0)
    }

    pub fn input_width(&self) -> usize {
        self.input.width()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                Layer::Dense { inputs, outputs } => inputs * outputs + outputs,
                Layer::Conv1d { in_channels, out_channels, kernel } => {
                    out_channels * in_channels * kernel + out_channels
                }
                _ => 0,
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_pool_dense_shapes_compose() {
        let spec = NetworkSpec::new(
            Shape { channels: 1, length: 60 },
            vec![
                Layer::Conv1d { in_channels: 1, out_channels: 4, kernel: 5 },
                Layer::Relu,
                Layer::MaxPool1d { width: 2 },
                Layer::Dense { inputs: 4 * 28, outputs: 2 },
                Layer::Softmax,
            ],
        )
        .unwrap();
        assert_eq!(spec.class_count(), 2);
    }

    #[test]
    fn rejects_mismatched_dense() {
        let err = NetworkSpec::new(Shape::flat(3), vec![Layer::Dense { inputs: 2, outputs: 2 }, Layer::Softmax]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn rejects_missing_softmax_and_misplaced_dropout() {
        assert!(NetworkSpec::new(Shape::flat(2), vec![Layer::Dense { inputs: 2, outputs: 2 }]).is_err());
        let conv_dropout = NetworkSpec::new(
            Shape { channels: 1, length: 8 },
            vec![
                Layer::Conv1d { in_channels: 1, out_channels: 2, kernel: 3 },
                Layer::Dropout { rate: 0.5 },
                Layer::Dense { inputs: 12, outputs: 2 },
                Layer::Softmax,
            ],
        );
        assert!(conv_dropout.is_err());
        let ok = NetworkSpec::new(
            Shape::flat(2),
            vec![
                Layer::Dense { inputs: 2, outputs: 4 },
                Layer::Relu,
                Layer::Dropout { rate: 0.5 },
                Layer::Dense { inputs: 4, outputs: 2 },
                Layer::Softmax,
            ],
        );
        assert!(ok.is_ok());
    }
}
