//! Desk-scale network presets for the experiment families.

use super::spec::{Layer, NetworkSpec, Shape};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 3] = ["gauss-shift", "digits-small", "apnea-synth"];

/// Builds a named preset for the given input shape and class count.
pub fn preset(name: &str, input: Shape, class_count: usize) -> Result<NetworkSpec> {
    match name {
        "gauss-shift" => gauss_shift(input.width(), class_count),
        "digits-small" => digits_small(input.width(), class_count),
        "apnea-synth" => apnea_synth(input, class_count),
        other => Err(Error::config(format!("unknown network preset '{other}'"))),
    }
}

/// Two hidden ReLU layers of 16 units.
pub fn gauss_shift(inputs: usize, classes: usize) -> Result<NetworkSpec> {
    NetworkSpec::new(
        Shape::flat(inputs),
        vec![
            Layer::Dense { inputs, outputs: 16 },
            Layer::Relu,
            Layer::Dense { inputs: 16, outputs: 16 },
            Layer::Relu,
            Layer::Dense { inputs: 16, outputs: classes },
            Layer::Softmax,
        ],
    )
}

/// Fully-connected stand-in for the digit CNN: the 1024/128 head with a
/// narrower first layer, dropout on the hidden dense layers.
pub fn digits_small(inputs: usize, classes: usize) -> Result<NetworkSpec> {
    NetworkSpec::new(
        Shape::flat(inputs),
        vec![
            Layer::Dense { inputs, outputs: 256 },
            Layer::Relu,
            Layer::Dropout { rate: 0.25 },
            Layer::Dense { inputs: 256, outputs: 128 },
            Layer::Relu,
            Layer::Dropout { rate: 0.25 },
            Layer::Dense { inputs: 128, outputs: classes },
            Layer::Softmax,
        ],
    )
}

/// Three kernel-4 conv layers (pooling after the first two), then a
/// 32/16 dense head; half the channel widths of the full apnea network.
pub fn apnea_synth(input: Shape, classes: usize) -> Result<NetworkSpec> {
    let l1 = input.length.checked_sub(3).ok_or_else(|| Error::config("window too short"))? / 2;
    let l2 = l1.checked_sub(3).ok_or_else(|| Error::config("window too short"))? / 2;
    let l3 = l2.checked_sub(3).ok_or_else(|| Error::config("window too short"))?;
    NetworkSpec::new(
        input,
        vec![
            Layer::Conv1d { in_channels: input.channels, out_channels: 8, kernel: 4 },
            Layer::Relu,
            Layer::MaxPool1d { width: 2 },
            Layer::Conv1d { in_channels: 8, out_channels: 16, kernel: 4 },
            Layer::Relu,
            Layer::MaxPool1d { width: 2 },
            Layer::Conv1d { in_channels: 16, out_channels: 16, kernel: 4 },
            Layer::Relu,
            Layer::Dense { inputs: 16 * l3, outputs: 32 },
            Layer::Relu,
            Layer::Dropout { rate: 0.25 },
            Layer::Dense { inputs: 32, outputs: 16 },
            Layer::Relu,
            Layer::Dense { inputs: 16, outputs: classes },
            Layer::Softmax,
        ],
    )
}
