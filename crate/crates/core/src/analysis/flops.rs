use crate::error::{Error, Result};

/// Per-stage floating-point operation counts of one detector forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsBreakdown {
    /// Input dense layer.
    pub c1: u64,
    /// Input batch normalisation.
    pub c2: u64,
    /// Input ReLU.
    pub c3: u64,
    /// All residual blocks.
    pub c4: u64,
    /// Output dense layer.
    pub c5: u64,
    /// Output sigmoid.
    pub c6: u64,
    /// Closed-form total.
    pub closed_form: u64,
}

impl FlopsBreakdown {
    pub fn component_sum(&self) -> u64 {
        self.c1 + self.c2 + self.c3 + self.c4 + self.c5 + self.c6
    }
}

/// FLOPs of a network with `blocks` residual blocks of width `width`, `k`
/// resources, `n` devices and `antennas` receive antennas (the input length
/// scales with `k * antennas`).
pub fn flops_dnn(blocks: u64, width: u64, k: u64, n: u64, antennas: u64) -> Result<FlopsBreakdown> {
    if blocks == 0 || width == 0 || k == 0 || n == 0 || antennas == 0 {
        return Err(Error::invalid("FLOPs parameters must be positive"));
    }
    let overflow = || Error::invalid("FLOPs count overflows u64");
    let (l, v) = (blocks as u128, width as u128);
    let kx = k as u128 * antennas as u128;
    let n = n as u128;

    let c1 = (4 * kx - 1) * v + v;
    let c2 = 4 * v;
    let c3 = v;
    let c4 = l * (4 * ((2 * v - 1) * v + v) + 4 * (4 * v) + 3 * v + v + v);
    let c5 = (2 * v - 1) * n + n;
    let c6 = 4 * n;
    let closed = 8 * l * v * v + (21 * l + 4 * kx + 2 * n + 5) * v + 4 * n;

    let cast = |x: u128| u64::try_from(x).map_err(|_| overflow());
    Ok(FlopsBreakdown {
        c1: cast(c1)?,
        c2: cast(c2)?,
        c3: cast(c3)?,
        c4: cast(c4)?,
        c5: cast(c5)?,
        c6: cast(c6)?,
        closed_form: cast(closed)?,
    })
}

/// Asymptotic cost of a detector as listed for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityDescriptor {
    pub name: &'static str,
    pub order: &'static str,
    pub parameters: &'static [&'static str],
}

const COMPLEXITY: [ComplexityDescriptor; 6] = [
    ComplexityDescriptor { name: "DNN-MUD", order: "O(Lυ²)", parameters: &["L", "υ"] },
    ComplexityDescriptor { name: "stOMP", order: "O(N log N)", parameters: &["N"] },
    ComplexityDescriptor { name: "LS-BOMP", order: "O(nK²N)", parameters: &["n", "K", "N"] },
    ComplexityDescriptor { name: "C-AMP", order: "O(NKτ)", parameters: &["N", "K", "τ"] },
    ComplexityDescriptor { name: "D-MUD", order: "O(Lυ²)", parameters: &["L", "υ"] },
    ComplexityDescriptor { name: "CNN-MUD", order: "O(XN²)", parameters: &["X", "N"] },
];

/// Look up a detector by name, ignoring ASCII case.
pub fn baseline_complexity(name: &str) -> Result<ComplexityDescriptor> {
    COMPLEXITY
        .iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .copied()
        .ok_or_else(|| Error::invalid(format!("unknown detector {name:?}")))
}
