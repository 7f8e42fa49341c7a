//! Time-1 map of the rescaled oscillator in action-angle coordinates, orbit
//! bookkeeping on the lift, rotation numbers and invariant-curve screening.

mod classify;
mod diophantine;
mod map;
mod orbit;
mod rotation;

pub use classify::{
    classify_curve, confinement_check, default_class, poincare_atlas, twist_deviation,
    twist_deviation_sup, Atlas, AtlasRow, AtlasSettings, ConfinementReport, CurveClassification,
    CurveStatus, LambdaCoord, DEFAULT_DRIFT_TOL, DEFAULT_ITERATES, MIN_CLASSIFY_ITERATES,
};
pub use diophantine::{diophantine_check, DiophantineClass, DiophantineVerdict};
pub use map::{
    reflect, reversibility_defect, time_one_map, AnnulusMap, Involution, MapStep, PoincareMap,
    RigidRotation, UnperturbedTwist,
};
pub use orbit::{
    iterate, iterate_with, ActionGauge, NeumaierSum, OrbitRecord, RawAction, Termination,
};
pub use rotation::{
    rotation_number, weighted_birkhoff, RotationEstimate, RotationMethod, MIN_POINTS,
};
