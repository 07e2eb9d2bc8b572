//! Simulation and verification of tail measures and spectral tail processes
//! of regularly varying time series.
//!
//! The crate builds the standard representations of a shift-invariant tail
//! measure from a spectral tail process sampler, simulates stationary
//! regularly varying series from Poisson particle systems, and checks the
//! identities that tie them together by Monte Carlo.

pub mod cone;
pub mod error;
pub mod estimators;
pub mod indices;
pub mod mc;
pub mod particles;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod tail_measure;

pub use cone::{
    infargmax, pseudonorm, q_alpha_norm, seq_distance, shift, tau_eval, ConeElement, ConeSpace, SeqWindow,
    TauFunctional, VectorNorm, WeightSeq,
};
pub use error::{Error, Result};
pub use rng::SimRng;
pub use estimators::{EmpiricalTailLaw, TailKind};
pub use indices::{HMap, IndexEstimate, IndexMethod, NormalizedTau};
pub use particles::{ParticlePool, Path, PathEnsemble, SimulationSpec, TruncationCertificate};
pub use spectral::{ModelSpec, SpectralModel, TcfReport, TestFunction};
pub use tail_measure::{RepKind, RepSampler, ShiftLaw};
