//! Concrete model families with exact block solvers and declared constants.

pub mod block_solve;
pub mod generate;
pub mod io;
pub mod irls;
pub mod least_squares;
pub mod logistic;
pub mod quadratic;
pub mod reduced;
pub mod spec;
pub mod svm;

pub use irls::{build_irls, IrlsData};
pub use least_squares::{build_group_lasso, build_lasso, CompositeStructure};
pub use logistic::build_logistic;
pub use quadratic::build_quadratic;
pub use reduced::{reduced_problem, ReducedTwoBlock};
pub use spec::{build_instance, generate_data, instance_from_data, Instance, ModelSpec};
pub use svm::{build_l2svm, SvmData};
