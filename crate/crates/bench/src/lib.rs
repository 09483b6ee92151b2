//! Shared fixtures for the benchmarks: one small family of models and
//! events, built the same way every run so timings stay comparable.

use graphldp_core::graph::{ConnectionSchedule, Event};
use graphldp_core::types::{Kernel, PairMeasure, TypeLaw};

pub fn uniform_model(k: usize) -> (Kernel, TypeLaw) {
    (Kernel::constant(k, 1.0).expect("constant kernel"), TypeLaw::uniform(k))
}

/// A mildly lopsided three-colour model, richer than the uniform one so the
/// functionals do not collapse to symmetric special cases.
pub fn skewed_model() -> (Kernel, TypeLaw) {
    let kernel = Kernel::from_rows(&[
        vec![1.0, 2.0, 0.5],
        vec![2.0, 1.0, 1.5],
        vec![0.5, 1.5, 1.0],
    ])
    .expect("symmetric kernel");
    let law = TypeLaw::new(vec![0.5, 0.3, 0.2]).expect("normalized law");
    (kernel, law)
}

pub fn schedule() -> ConnectionSchedule {
    ConnectionSchedule::NearCritical
}

/// Ball around 1.5 times the reference of the uniform two-colour model.
pub fn overload_ball() -> Event {
    Event::Ball {
        center: PairMeasure::constant(2, 0.375).expect("constant measure"),
        radius: 0.02,
    }
}

/// Half-space rewarding like-colour edges of the uniform two-colour model.
pub fn overload_half_space() -> Event {
    use graphldp_core::types::TestFunction;
    Event::HalfSpace {
        direction: TestFunction::from_rows(&[vec![1.0, -0.4], vec![-0.4, 0.6]])
            .expect("symmetric direction"),
        level: 0.580576,
    }
}

/// Target measure scaling the skewed model's reference by 1.4.
pub fn overload_target() -> PairMeasure {
    let (kernel, law) = skewed_model();
    graphldp_core::measures::product_measure(&kernel, &law)
        .scaled(1.4)
        .expect("positive scaling")
}
