use crate::real::Real;
use crate::tensor::Tensor;

pub fn relu_in_place<T: Real>(t: &mut Tensor<T>) {
    for v in t.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` wherever the rectified `output` is not positive.
pub fn relu_backward_in_place<T: Real>(grad: &mut Tensor<T>, output: &Tensor<T>) {
    for (g, &o) in grad.data_mut().iter_mut().zip(output.data()) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
