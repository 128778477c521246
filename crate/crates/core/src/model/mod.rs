//! Parsing networks: declarative specs, execution with explicit backward,
//! supervision targets, and the two-stage crop/compose machinery.

pub mod boundary;
pub mod crop;
pub mod loss;
pub mod network;
pub mod spec;

pub use boundary::boundary_ground_truth;
pub use crop::{
    apply_crop, component_rect, compose_two_stage, crop_component, crop_from_points, ComponentCrop, ComponentKind,
    CropCalibration, KeyPoints, Rect,
};
pub use loss::{build_targets, total_loss, HeadTarget, LossBreakdown, LossWeights, TargetConfig};
pub use network::{argmax_labels, ForwardPass, Network};
pub use spec::{
    build_stage1, build_stage1_variant, build_stage2, HeadKind, Layer, LayerOp, NetKind, NetworkSpec,
    Variant,
};
