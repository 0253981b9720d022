use super::config::InfectionModelParams;
use super::types::{BiosecurityLevel, Treatment};
use super::world::Farm;

/// Distance decay factor `exp(−d / λ)`.
pub fn transmission_kernel(distance: f64, params: &InfectionModelParams) -> f64 {
    libm::exp(-distance / params.distance_scale)
}

/// Per-pair, per-turn transmission probability given a precomputed kernel value.
pub(crate) fn pair_probability(
    rate: f64,
    kernel: f64,
    level: BiosecurityLevel,
    params: &InfectionModelParams,
) -> f64 {
    (rate * kernel * params.modifier(level)).clamp(0.0, 1.0)
}

/// Probability that `susceptible` becomes infected this turn, combining every
/// infected farm as `1 − Π (1 − p_ij)`.
pub fn infection_probability<'a>(
    susceptible: &Farm,
    infected: impl IntoIterator<Item = &'a Farm>,
    treatment: &Treatment,
    params: &InfectionModelParams,
) -> f64 {
    let rate = params.rate(treatment.contagion_rate);
    let escape: f64 = infected
        .into_iter()
        .map(|j| {
            let d = susceptible.position.distance(&j.position);
            1.0 - pair_probability(rate, transmission_kernel(d, params), susceptible.biosecurity, params)
        })
        .product();
    (1.0 - escape).clamp(0.0, 1.0)
}
