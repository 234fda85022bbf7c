//! Feed-forward classifier training core: dense, 1D conv, max-pool, ReLU,
//! dropout and softmax layers; cross-entropy; Adam; seeded initialization.

mod adam;
pub mod checkpoint;
mod loss;
mod network;
pub mod presets;
mod spec;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::AdamState;
pub use loss::cross_entropy;
pub use network::{init_network, softmax, ForwardCache, LayerParams, Mode, NetworkParams};
pub use spec::{Layer, NetworkSpec, Shape};
pub use train::{train, train_on, train_step, TrainConfig};

/// Independent, reproducible RNG stream `stream` under `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
