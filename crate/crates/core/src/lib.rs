//! Quantum speed limits for closed systems: distances on state space,
//! uncertainty functionals, Uhlmann amplitudes, evolution and the bounds
//! built from them.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod random;
pub mod states;
pub mod uhlmann;

pub use bounds::{compare_bounds, BoundReport, BoundsOptions};
pub use dynamics::{HamiltonianSchedule, Metric, Trajectory};
pub use error::{QslError, Result};
pub use geometry::{Frame, PrincipalAngleSet, Projector};
pub use linalg::CMatrix;
pub use states::{DensityOperator, Observable};
