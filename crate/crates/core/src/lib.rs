//! surfweave: compile 3D freeform surface patches into W-code weaving
//! programs, execute them on a virtual loom, and verify the predicted fabric
//! shape against the target surface.
//!
//! Pipeline: mesh -> geodesic field -> isocurves -> stitch mesh -> knitting
//! map -> weaving map -> W-code -> fabric graph -> relaxation -> reports.

pub mod config;
pub mod export;
pub mod geodesic;
pub mod isocurve;
pub mod math;
pub mod mesh;
pub mod pipeline;
pub mod registration;
pub mod relax;
pub mod report;
pub mod source;
pub mod stitch;
pub mod synth;
pub mod vm;
pub mod wcode;
pub mod weave;
