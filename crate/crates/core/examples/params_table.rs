//! Print the architecture table: per-layer output shapes and parameter
//! counts for the four-block CNN.
//!
//! ```bash
//! cargo run --example params_table
//! ```

use mcnn::nn::{build_proposed_cnn, trainable_param_count};
use mcnn::runner::params_table;

fn main() -> mcnn::Result<()> {
    for classes in [4, 3] {
        println!("== {classes}-class head ==");
        print!("{}", params_table(classes, mcnn::nn::DEFAULT_LEAKY_SLOPE, mcnn::nn::DEFAULT_DROPOUT)?);
        let spec = build_proposed_cnn((168, 168, 3), classes)?;
        println!("(analytic check: {})\n", trainable_param_count(&spec)?);
    }
    Ok(())
}
