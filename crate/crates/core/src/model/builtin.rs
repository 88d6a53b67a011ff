//! Built-in demonstration models.

use super::FnModel;

pub const BUILTIN_NAMES: &[&str] = &["deflategate", "mug"];

pub fn builtin_model(name: &str) -> Option<FnModel> {
    match name {
        "deflategate" => Some(FnModel::new("deflategate-v1", 3, 2, |x| {
            let (t, c) = deflategate(x[0], x[1], x[2]);
            vec![t, c]
        })),
        "mug" => Some(FnModel::new("mug-v1", 2, 1, |x| vec![mug(x[0], x[1])])),
        _ => None,
    }
}

/// Ball model with inputs `(psi, size, grip)`, psi in [8, 16] and the
/// others in [0, 1]. Returns `(throwability, compliance)`, both in [0, 1].
///
/// Throwability peaks at 10.5 PSI and grows with grip; compliance is a
/// steep logistic centered on the 12.5 PSI rule.
pub fn deflategate(psi: f64, size: f64, grip: f64) -> (f64, f64) {
    let inflation = (-((psi - 10.5) / 2.0).powi(2)).exp();
    let shape = 1.0 - 2.0 * (size - 0.5).abs();
    let throwability = 0.6 * inflation + 0.25 * grip + 0.15 * shape;
    let compliance = 1.0 / (1.0 + (-4.0 * (psi - 12.5)).exp());
    (throwability, compliance)
}

/// Mug suitability in [0, 1] for a `size_ml` in [50, 500] and a beverage
/// code (0 = espresso, 1 = latte). Too small and too large are both bad.
pub fn mug(size_ml: f64, beverage: f64) -> f64 {
    let ideal = if beverage < 0.5 { 80.0 } else { 350.0 };
    (1.0 - (size_ml - ideal).abs() / 200.0).max(0.0)
}
