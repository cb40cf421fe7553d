//! Switch-state identification: state encoding plus the classifiers that
//! recover the encoded class from voltage feature rows.

mod forest;
mod gnb;

pub use forest::{
    load_forest, predict_forest, save_forest, train_forest, train_forest_with_oob, FeatureSplit,
    ForestConfig, TrainedForest, Tree,
};
pub use gnb::{predict_gnb, train_gnb, GnbModel};

use crate::error::{Error, Result};
use crate::model::SwitchBar;

/// Class label of an admissible state vector.
pub fn encode_state(bar: &SwitchBar, state: &[u8]) -> Result<u32> {
    match bar.position_of(state) {
        Some(pos) => Ok(bar.encoding[pos]),
        None => Err(Error::InadmissibleState(state.to_vec())),
    }
}

/// Exact inverse of [`encode_state`].
pub fn decode_state(bar: &SwitchBar, label: u32) -> Result<&[u8]> {
    match bar.encoding.iter().position(|&l| l == label) {
        Some(pos) => Ok(&bar.state_catalog[pos]),
        None => Err(Error::InadmissibleState(vec![])),
    }
}
