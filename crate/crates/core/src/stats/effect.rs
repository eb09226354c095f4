/// Cohen's h between two proportions, signed so that it is positive when
/// `p2 > p1`: `2·asin(√p2) − 2·asin(√p1)`.
///
/// Proportions outside `[0, 1]` produce NaN.
pub fn cohens_h(p1: f64, p2: f64) -> f64 {
    2.0 * p2.sqrt().asin() - 2.0 * p1.sqrt().asin()
}
