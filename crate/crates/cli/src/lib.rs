//! Command implementations behind the `idiomshot` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_ensemble, cmd_eval, cmd_predict, cmd_stats, cmd_train, cmd_validate_splits, Summary};
pub use config::RunConfig;

use idiomshot::{Error, ErrorClass};

/// 2 for configuration or data errors, 3 for inference contract errors,
/// 4 for numeric failures.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Data => 2,
        ErrorClass::Inference => 3,
        ErrorClass::Numeric => 4,
    }
}
