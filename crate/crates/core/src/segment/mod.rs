//! Recovery of bright/dark periods from per-ion photon times and slicing
//! into integration windows.

pub mod roi;
pub mod states;
pub mod windows;

pub use roi::{assign_to_roi, assign_to_roi_ticks, pixel_of, RoiMap};
pub use states::{
    label_accuracy, segment_states, Label, LabelAccuracy, SegmenterConfig, StateInterval,
    UncertainPolicy,
};
pub use windows::{count_straddles, slice_windows, CountWindow, WindowConfig};
