//! Numerical toolkit for impulsive Caputo fractional differential equations of
//! order α ∈ (1,2) with state-dependent delay.
//!
//! The library evaluates mild solutions of
//!
//! ```text
//! D^α u(t) = A u(t) + f(t, u(ρ(t, u_t))),   t ∈ [0,T], t ≠ t_k,
//! u(t) = φ(t), u'(t) = ϕ(t),                t ∈ [-d, 0],
//! Δu(t_k) = I_k(u(t_k⁻)), Δu'(t_k) = Q_k(u(t_k⁻)),
//! ```
//!
//! where A is given by a real spectral decomposition. The mild solution is the
//! fixed point of the operator
//!
//! ```text
//! (Pu)(t) = S_α(t)φ(0) + K_α(t)ϕ(0)
//!         + Σ_{t_i<t} [ S_α(t-t_i) I_i(u(t_i⁻)) + K_α(t-t_i) Q_i(u(t_i⁻)) ]
//!         + ∫_0^t T_α(t-s) f(s, u(ρ(s,u_s))) ds,
//! ```
//!
//! computed by Picard iteration. S_α, K_α, T_α act diagonally on the spectrum
//! through the two-parameter Mittag-Leffler function, with
//! `S: E_{α,1}(μ t^α)`, `K: t E_{α,2}(μ t^α)`, `T: t^{α-1} E_{α,α}(μ t^α)`.
//!
//! Module map:
//! - [`mlfunc`] — Mittag-Leffler function E_{α,β} and the Gamma function.
//! - [`fraccalc`] — discrete Riemann-Liouville integrals and Caputo derivatives
//!   for residual verification.
//! - [`operators`] — spectral operators and the solution-operator families.
//! - [`solver`] — grid construction, the mild-solution operator, Picard iteration.
//! - [`oracle`] — independent direct discretization of the equivalent Volterra
//!   integral equation, for cross-checking the solver.
//! - [`hypotheses`] — computable existence conditions (contraction constant Δ,
//!   Krasnoselskii constant Θ, Leray-Schauder inequality).
//! - [`probfile`] / [`cli`] — problem-file ingestion and the command-line tool.

pub mod cli;
pub mod expr;
pub mod fraccalc;
pub mod hypotheses;
pub mod mlfunc;
pub mod operators;
pub mod oracle;
pub mod probfile;
mod quad;
mod residual;
pub mod solver;

pub use operators::{OperatorFunctionKind, SpectralOperator};
