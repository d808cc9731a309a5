/// A bundle of trainable arrays that can be walked in a fixed order.
///
/// Gradient containers reuse the parameter types, so the same traversal
/// order lines up parameters with their gradients.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    /// Overwrites every parameter from `flat`, which must hold `num_params()` values.
    fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |s| {
            let n = s.len();
            s.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |s| s.iter_mut().for_each(|v| *v = value));
    }

    /// `self += scale * other`, element by element in traversal order.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let flat = other.to_flat();
        let mut offset = 0;
        self.visit_mut(&mut |s| {
            for v in s.iter_mut() {
                *v += scale * flat[offset];
                offset += 1;
            }
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |s| ok &= s.iter().all(|v| v.is_finite()));
        ok
    }
}

/// Returns a copy of `p` with every entry set to zero; used to start gradient accumulation.
pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.fill(0.0);
    z
}
