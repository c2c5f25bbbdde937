//! Frozen constants of the barrier constructions and the inclusion-norm
//! bound. tests/constants.rs reruns the fits that produced them.

/// Deformation of the hexagonal barrier: the maximizer of D(t) over the grid
/// t = 0.05, 0.10, …, 1.00 at hexagon refinement 400.
pub const T0: f64 = 1.0;

/// Half of D(t₀). D(1) = 0.202734 is stable to 1e−6 across refinements
/// 400 to 4000.
pub const EPS0: f64 = 0.101_367;

/// Construction constant: the smallest of {4, 8, 16} for which the
/// spherical sign-barrier at d = 2, ℓ = 600, r = 5/ℓ has D̃_{h;ε₀} > ε₀.
pub const C_CONSTRUCTION: f64 = 4.0;

/// Constant c of ζ = c·rη·|S²|/N(ℓ,η): the largest ratio I²/(rη·|S²|/N)
/// over ℓ = 60, η ∈ {1, 10}, r ∈ {2/ℓ, 1/η, 0.3} with rη ≤ 1 (0.399, at
/// η = 10, r = 2/ℓ), times 1.25.
pub const INCLUSION_C: f64 = 0.5;
