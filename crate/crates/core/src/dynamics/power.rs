use crate::circuit::{derive_elements, CircuitParams};
use crate::error::Result;

/// Input power (W) carried by a signal-port flux amplitude:
/// `P = C_a phi0^2 gamma_a omega_a^2 |phi_in|^2 / 2`.
pub fn power_from_flux(phi_in: f64, params: &CircuitParams) -> Result<f64> {
    let el = derive_elements(params)?;
    Ok(0.5 * el.c_a * el.phi0 * el.phi0 * params.gamma_a * el.omega_a * el.omega_a * phi_in * phi_in)
}

/// Inverse of [`power_from_flux`].
pub fn flux_from_power(p_watts: f64, params: &CircuitParams) -> Result<f64> {
    Ok((p_watts / power_from_flux(1.0, params)?).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::watts_to_dbm;

    #[test]
    fn examples() {
        let p = CircuitParams::baseline(3.5);
        assert_eq!(power_from_flux(0.0, &p).unwrap(), 0.0);
        let p1 = power_from_flux(0.1, &p).unwrap();
        assert!((p1 / 3.62e-15 - 1.0).abs() < 2e-3, "{p1}");
        assert!((watts_to_dbm(p1) + 114.4).abs() < 0.05);
        let p2 = power_from_flux(0.2, &p).unwrap();
        assert!((watts_to_dbm(p2) - watts_to_dbm(p1) - 6.0206).abs() < 1e-3);
        assert!((flux_from_power(p1, &p).unwrap() - 0.1).abs() < 1e-15);
    }
}
