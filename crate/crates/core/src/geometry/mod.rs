//! Mesh conversion for real-time use: measurements, decimation, a surface
//! error metric, random forests and the loop that ties them together.

mod convert;
mod decimate;
mod forest;
mod measure;
mod mesh;
mod quality;
mod synth;

pub use convert::{
    convert, plan_features, quality_features, Action, ConversionReport, ConvertError,
    ConvertParams, FailureReason, Forests, Iteration, Outcome, Plan, GATE_CONVERT, GATE_PASS,
    QUALITY_ACCEPT, QUALITY_ITERATE, QUALITY_LIMIT,
};
pub use decimate::{decimate, DecimateError, MIN_TARGET};
pub use forest::{
    classify, train_forest, Classification, ForestError, ForestParams, LabeledSample, Node,
    RandomForest, Tree,
};
pub use measure::{component_count, compute_measurements, MeasurementVector, DEGENERATE_AREA};
pub use mesh::{MeshError, TriMesh};
pub use quality::quality_error;
pub use synth::{
    best_plan, label_mesh, margin_dataset, synthetic_training_set, training_meshes, PlanTrial,
    SyntheticSet, TRAINING_BUDGETS,
};
