//! Supervised training: dataset container, random slices, flip
//! augmentation, the weighted loss and truncated backpropagation through
//! time.

mod augment;
mod dataset;
mod loss;
mod slices;
mod train;

pub use augment::{augment, mirror_label_lr, mirror_label_ud, AugmentFlags, Flips};
pub use dataset::{DatasetSequence, LabelRow, SequenceSpec, EVENTS_FILE, LABELS_FILE, MANIFEST_FILE};
pub use loss::{loss, tape_loss, ATTITUDE_WEIGHT};
pub use slices::{sample_slices, Slice, SliceRef};
pub use train::{
    check_compatible, evaluate, train_epoch, train_on_slices, window_gradients, EpochMetrics, Evaluation, TrainConfig,
    LOSS_CURVE_HEADER,
};
