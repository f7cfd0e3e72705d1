/// `0.3 tanh(r/5)` for negative rewards, `1.5 tanh(r/5)` for positive ones.
pub fn transform_reward(r: f64) -> f64 {
    let t = (r / 5.0).tanh();
    0.3 * t.min(0.0) + 1.5 * t.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert_eq!(transform_reward(0.0), 0.0);
        assert!((transform_reward(5.0) - 1.142_391_234).abs() < 1e-9);
        assert!((transform_reward(-5.0) + 0.228_478_247).abs() < 1e-9);
    }
}
