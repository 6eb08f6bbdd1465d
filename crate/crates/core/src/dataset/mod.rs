//! Seeded synthesis of paired bandlimited sine-mixture windows, the
//! shared PRNG, and the on-disk dataset format.

mod io;
mod rng;
mod synth;

pub use io::{
    config_text, decode_sig, encode_sig, load_dataset, parse_dataset_config, parse_key_values,
    read_sig, save_dataset, write_sig,
};
pub use rng::SeededRng;
pub(crate) use synth::parse_value;
pub use synth::{
    draw_components, generate_dataset, generate_pair, generate_pairs, synthesize, Component,
    DatasetConfig, SignalDataset, SignalPair,
};
