//! Speech anonymization toolkit.
//!
//! Two anonymizers and the evaluation machinery around them:
//!
//! * [`mcadams`] — signal-level anonymization: per-frame LPC analysis,
//!   pole-angle warping by a McAdams coefficient, and resynthesis from the
//!   retained residual ([`audio`] and [`lpc`] provide the substrate).
//! * [`embed`] — embedding-level anonymization: a pseudo-speaker vector is
//!   the mean of a randomized subset of the farthest speaker-pool candidates.
//! * [`metrics`] — EER, Cllr / min-Cllr (via PAV calibration) and WER.
//! * [`protocol`] — trial lists, score partitioning, pseudo-speaker
//!   consistency validation and result-table emission.

pub mod audio;
pub mod embed;
pub mod lpc;
pub mod mcadams;
pub mod metrics;
pub mod poly;
pub mod protocol;
