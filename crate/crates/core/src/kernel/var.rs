use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// What a declared variable stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    /// A state variable `v^α` of the hydrodynamic system.
    State,
    /// A Riemann invariant `R_i`.
    Riemann,
    /// Anything else (test variables, integration parameters).
    Param,
}

/// A variable or one of its jets.
///
/// `order == 0` is the base variable; `order == ℓ > 0` is `∂_x^ℓ` of it.
/// Variables compare by declaration rank first, which fixes the graded
/// lexicographic monomial order used everywhere in the kernel.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    rank: u32,
    order: u32,
    name: Arc<str>,
    kind: VarKind,
}

impl Var {
    pub fn new(name: &str, rank: u32, kind: VarKind) -> Self {
        Var {
            rank,
            order: 0,
            name: Arc::from(name),
            kind,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    /// Jet order; 0 for a base variable.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_jet(&self) -> bool {
        self.order > 0
    }

    /// The base variable this jet belongs to.
    pub fn base(&self) -> Var {
        Var {
            order: 0,
            ..self.clone()
        }
    }

    /// The jet of order `order` over the same base variable.
    pub fn jet(&self, order: u32) -> Var {
        Var {
            order,
            ..self.clone()
        }
    }

    /// `∂_x` of this variable.
    pub fn next(&self) -> Var {
        self.jet(self.order + 1)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.order {
            0 => write!(f, "{}", self.name),
            1 => write!(f, "{}_x", self.name),
            2 => write!(f, "{}_xx", self.name),
            k => write!(f, "{}_{}", self.name, k),
        }
    }
}
