//! Motion clustering: a dual-encoder autoencoder aligns motion and tag
//! latents, K-means groups the motion latents, and the elbow method picks
//! the cluster count.

pub mod ae;
pub mod kmeans;
pub mod losses;
pub mod report;

pub use ae::{
    alignment_separation, preprocess_dataset, split_holdout, train_ae, AeConfig, AeModel,
    EncodedClip, EpochLog, AE_WINDOW,
};
pub use kmeans::{adjusted_rand_index, elbow_select, kmeans, normalize_rows, ClusterModel, ElbowResult};
pub use losses::{huber_recon, info_nce, l2_align, loss_cluster, LossBreakdown};
pub use report::{cluster_report, ClusterRow};

use crate::net::NetError;
use std::fmt;

#[derive(Debug)]
pub enum ClusterError {
    DatasetTooSmall(usize),
    Diverged { epoch: usize, last_good: Box<AeModel> },
    Net(NetError),
}

impl fmt::Display for ClusterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DatasetTooSmall(n) => write!(f, "need at least 2 clips, got {n}"),
            Self::Diverged { epoch, .. } => write!(f, "training diverged at epoch {epoch}"),
            Self::Net(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ClusterError {}
