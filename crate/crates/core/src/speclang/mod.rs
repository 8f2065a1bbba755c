//! The design language: parsing, validation, canonical printing, and
//! conversion between the machine and process views of a robot.

pub mod ast;
pub mod convert;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod validate;

pub use ast::{
    ActionSym, ChannelDecl, DesignStructure, DetectRule, FsmSpec, FsmTransition,
    MetaStatePredicate, ScenarioSpec, StatePattern, SubstrateProfile, SwarmSpec, TimingMatrix,
    TimingParams, TimingRow,
};
pub use convert::{csp_to_fsm, fsm_to_csp, row_paths, ConvertError, RowPath};
pub use lexer::SpecError;
pub use parser::parse_swarm;
pub use printer::print_swarm;
pub use validate::{validate, ValidationError};
