//! A small Monte Carlo study of size and power.

use mtp2::simulate::{mc_study, uniform, violating_2x2, McOptions};

fn main() -> mtp2::Result<()> {
    let opts = McOptions { replications: 100, sample_size: 500, seed: 5, ..McOptions::default() };
    for dgp in [uniform(2, 2)?, violating_2x2(0.05)?] {
        let res = mc_study(&dgp, &opts)?;
        println!("{} (J = {}, mean LR {:.3})", res.dgp, res.j, res.mean_lr_stat);
        for r in &res.rejection {
            println!(
                "  size {:.2}: p-value {:.2}, KP lower {:.2}, KP upper {:.2}",
                r.size, r.pvalue, r.kp_lower, r.kp_upper
            );
        }
    }
    Ok(())
}
