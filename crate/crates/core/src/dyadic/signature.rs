use serde::{Deserialize, Serialize};

/// A Haar signature `ε ∈ {0,1}^d`, stored as a bit mask (bit `i` is `ε_i`).
///
/// `ε_i = 0` selects the oscillating factor along axis `i`, `ε_i = 1` the
/// normalized indicator. The all-ones signature is the only non-cancellative one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature(pub u32);

impl Signature {
    pub fn ones(dim: usize) -> Self {
        Signature((1u32 << dim) - 1)
    }

    pub fn bit(self, axis: usize) -> bool {
        self.0 >> axis & 1 == 1
    }

    pub fn is_cancellative(self, dim: usize) -> bool {
        self != Self::ones(dim)
    }

    /// The `2^d - 1` cancellative signatures, in increasing mask order.
    ///
    /// The position of a signature in this list equals its mask value, which is
    /// what spectra use as the signature index.
    pub fn cancellative(dim: usize) -> impl Iterator<Item = Signature> {
        (0..(1u32 << dim) - 1).map(Signature)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The signature `ψ` with `|I|^{1/2} h_I^ε h_I^{ε'} = h_I^ψ`.
    ///
    /// Along each axis the product of two equal factors is an indicator and of
    /// two different factors is the oscillating one, so `ψ` is the bitwise XNOR.
    pub fn product(self, other: Signature, dim: usize) -> Signature {
        Signature(!(self.0 ^ other.0) & Self::ones(dim).0)
    }

    /// Sign of `h^ε` on the child with index `child` (bit `i` set = upper half on axis `i`).
    pub fn sign_on_child(self, child: u32, dim: usize) -> f64 {
        let flips = child & !self.0 & Self::ones(dim).0;
        if flips.count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn bits_string(self, dim: usize) -> String {
        (0..dim)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }
}
