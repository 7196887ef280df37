//! Pragmatic program synthesis for a small grid-layout DSL.
//!
//! Programs describe a box of chickens and pigs on a 7×7 grid. Given a few
//! revealed cells, listeners rank the programs that could have produced
//! them: literally (any consistent program) or pragmatically (programs under
//! which a cooperative speaker would have chosen those reveals).

pub mod distribution;
pub mod dsl;
pub mod error;
pub mod eval;
pub mod factored;
pub mod joint;
pub mod listener;
pub mod neural;
pub mod reduced;
pub mod search;
pub mod space;
pub mod speaker;

pub use distribution::{FactoredDistribution, JointDistribution};
pub use dsl::{Cell, Content, Grid, Nonterminal, Object, Program, Spec, Utterance};
pub use error::{Error, Result};
pub use listener::{Listener, ListenerKind, MatchRule};
pub use space::{ProgramSpace, UttId};
