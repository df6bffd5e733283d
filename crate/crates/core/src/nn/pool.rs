use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Min,
    Max,
}

/// Elementwise min or max. The mask records where the left input was
/// taken; ties go left.
pub fn pool_pair<F: Real>(a: &[F], b: &[F], mode: PoolMode) -> (Vec<F>, Vec<bool>) {
    assert_eq!(a.len(), b.len(), "pool inputs differ in length");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let left = match mode {
                PoolMode::Min => x <= y,
                PoolMode::Max => x >= y,
            };
            (if left { x } else { y }, left)
        })
        .unzip()
}

/// Routes each output gradient to the input that was selected.
pub fn pool_backward<F: Real>(d: &[F], mask: &[bool]) -> (Vec<F>, Vec<F>) {
    d.iter()
        .zip(mask)
        .map(|(&g, &left)| if left { (g, F::zero()) } else { (F::zero(), g) })
        .unzip()
}
