//! Diffusion posterior sampling for separating duet voices.
//!
//! Sources are separated by integrating a probability-flow ODE under a weakly supervised
//! posterior score. Long mixtures are processed in overlapping segments, each conditioned on the
//! previous segment's output through inpainting.

pub mod bench;
pub mod error;
pub mod metrics;
pub mod nmf;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod schedule;
pub mod score;
pub mod signal;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use scalar::Real;
pub use metrics::{evaluate, identity_switch_rate, sdr, si_sdr, EvalReport, SourceMetrics};
pub use pipeline::{
    normalizing_gain, plan_segments, select_best_of_k, separate, separate_normalized, stitch, Mode, SegmentPlan, Selection, SeparationConfig,
    SeparationResult,
};
pub use sampler::{
    apply_inpaint, posterior_score, sample_posterior, sample_prior, ConditionMode, InpaintCondition,
    Integrator, SamplerConfig,
};
pub use schedule::{make_grid, sigma_at, NoiseSchedule, ScheduleKind, TimeGrid};
pub use score::{
    denoiser_to_score, gaussian_score, kde_prior_from_exemplars, mixture_score, ExemplarBank,
    GaussianPrior, MixturePrior, ScoreModel, SpectralKdePrior, SpectralPriorOptions,
};
pub use signal::{mix, MixingKind, MixingModel, MixtureProblem, Waveform};
pub use wav::{read_wav, write_wav, WavFormat};

pub type Waveform64 = Waveform<f64>;
pub type Waveform32 = Waveform<f32>;
pub type GaussianPrior64 = GaussianPrior<f64>;
pub type MixturePrior64 = MixturePrior<f64>;
