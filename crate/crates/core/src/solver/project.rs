use super::norm2;

/// Euclidean projection of `v` onto the ball of `radius` around `center`.
pub fn project_ball(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius >= 0.0);
    let diff: Vec<f64> = v.iter().zip(center).map(|(a, c)| a - c).collect();
    let dist = norm2(&diff);
    if dist <= radius {
        return v.to_vec();
    }
    let scale = radius / dist;
    center
        .iter()
        .zip(&diff)
        .map(|(c, d)| c + d * scale)
        .collect()
}

/// Componentwise `max(v, 0)`.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&a| a.max(0.0)).collect()
}
