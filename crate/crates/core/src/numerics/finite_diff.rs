use super::Vector;
use crate::Scalar;

/// Central-difference gradient: ((f(x + h eᵢ) − f(x − h eᵢ)) / 2h)ᵢ.
///
/// Used to validate analytic gradients; `h` must be positive.
pub fn finite_diff_gradient<T: Scalar>(
    fun: impl Fn(&Vector<T>) -> T,
    x: &Vector<T>,
    h: T,
) -> Vector<T> {
    assert!(h > T::zero(), "finite_diff_gradient: h must be positive");
    let two_h = T::lit(2.0) * h;
    Vector::from_fn(x.len(), |i| {
        let mut plus = x.clone();
        plus[i] += h;
        let mut minus = x.clone();
        minus[i] -= h;
        (fun(&plus) - fun(&minus)) / two_h
    })
}
