//! Regress log bids on the log estimate and normalize the residuals.

use mtp2::hetero::{fit_kernel, fit_lad, fit_ls, log_design, residuals};
use mtp2::simulate::{affiliated_gaussian, synthetic_auctions, AuctionDesign};

fn main() -> mtp2::Result<()> {
    let dgp = affiliated_gaussian(4, 3, 0.4)?;
    let records = synthetic_auctions(&dgp, &AuctionDesign::default(), 3)?;
    let (x, y) = log_design(&records);
    let ls = fit_ls(&x, &y)?;
    let lad = fit_lad(&x, &y)?;
    let kernel = fit_kernel(&x, &y, None)?;
    println!("LS  intercept {:.4?} slope {:.4?} R2 {:.3?}", ls.intercept, ls.slope, ls.r_squared);
    println!("LAD intercept {:.4?} slope {:.4?}", lad.intercept, lad.slope);
    println!("kernel bandwidth {:.4?}", kernel.bandwidth);
    let res = residuals(&ls, &records)?;
    for (id, u) in res.auction_ids.iter().zip(&res.normalized).take(5) {
        println!("{id}: {u:.3?}");
    }
    Ok(())
}
