//! Decorated càdlàg paths, p-variation and Skorokhod-type metrics, Young
//! and Marcus differential equations, α-stable Lévy sampling and fast-slow
//! chaotic drivers.
pub mod decorated;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fastslow;
pub mod frechet;
pub mod levy;
pub mod par;
pub mod path;
pub mod pvar;
pub mod rng;
pub mod stats;
pub mod warp;
pub mod young;

pub use decorated::{
    alpha_inf, alpha_pvar, collapse, delta_extension, linear_lift, pvar_decorated, trivial_lift,
    AlphaBound, Decoration, DecoratedPath, Extension,
};
pub use dynamics::{
    birkhoff_wn, extract_profiles, return_stats, BilliardTable, PhasePoint, PmMap, ReturnStructure, Series,
};
pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use fastslow::{ensemble_compare, fastslow_run, Driver, DriverSpec, LimitKind, LimitLaw};
pub use frechet::{frechet_dist, j1_dist, J1Bound};
pub use path::{sup_dist, CadlagPath, Mode, TimeChange};
pub use pvar::p_variation;
pub use warp::{sigma_pvar, SigmaBound};
pub use young::{
    solve_decorated_ode, solve_marcus, solve_young_ode, young_integral, Jump, SolveConfig,
    VectorField,
};
