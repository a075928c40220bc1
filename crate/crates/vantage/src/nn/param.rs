//! Trainable parameter storage.
//!
//! Layers own typed `Param`s; the optimizer sees them uniformly through the
//! dimension-erased `ParamSlot` trait, collected per model into named lists.

use crate::scalar::Real;
use ndarray::{Array, ArrayViewD, ArrayViewMutD, Dimension};

#[derive(Debug, Clone)]
pub struct Param<R: Real, D: Dimension> {
    pub w: Array<R, D>,
    pub g: Array<R, D>,
}

impl<R: Real, D: Dimension> Param<R, D> {
    pub fn new(w: Array<R, D>) -> Self {
        let g = Array::zeros(w.raw_dim());
        Self { w, g }
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(R::zero());
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Dimension-erased view of a parameter for the optimizer and checkpoints.
pub trait ParamSlot<R: Real> {
    fn value(&self) -> ArrayViewD<'_, R>;
    fn value_mut(&mut self) -> ArrayViewMutD<'_, R>;
    fn grad(&self) -> ArrayViewD<'_, R>;
    fn grad_mut(&mut self) -> ArrayViewMutD<'_, R>;
    fn zero_grad_slot(&mut self);
    fn num_elements(&self) -> usize;
}

impl<R: Real, D: Dimension> ParamSlot<R> for Param<R, D> {
    fn value(&self) -> ArrayViewD<'_, R> {
        self.w.view().into_dyn()
    }

    fn value_mut(&mut self) -> ArrayViewMutD<'_, R> {
        self.w.view_mut().into_dyn()
    }

    fn grad(&self) -> ArrayViewD<'_, R> {
        self.g.view().into_dyn()
    }

    fn grad_mut(&mut self) -> ArrayViewMutD<'_, R> {
        self.g.view_mut().into_dyn()
    }

    fn zero_grad_slot(&mut self) {
        self.zero_grad();
    }

    fn num_elements(&self) -> usize {
        self.len()
    }
}

/// Named mutable parameter references gathered from a model.
pub type NamedSlots<'a, R> = Vec<(String, &'a mut dyn ParamSlot<R>)>;

pub fn zero_grads<R: Real>(slots: &mut NamedSlots<'_, R>) {
    for (_, slot) in slots.iter_mut() {
        slot.zero_grad_slot();
    }
}
