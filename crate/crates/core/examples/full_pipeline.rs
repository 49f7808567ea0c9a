//! End to end: synthetic bids, regression, binning and the affiliation test.

use mtp2::cli::{cmd_summary, cmd_test, ingest, write_bids, Config};
use mtp2::simulate::{affiliated_gaussian, synthetic_auctions, AuctionDesign};

fn main() -> mtp2::Result<()> {
    let dir = std::env::temp_dir().join("mtp2-full-pipeline");
    std::fs::create_dir_all(&dir).map_err(|e| mtp2::Error::Config(e.to_string()))?;
    let input = dir.join("bids.csv");
    let records = synthetic_auctions(&affiliated_gaussian(4, 3, 0.5)?, &AuctionDesign::default(), 42)?;
    write_bids(&input, &records)?;

    println!("{}", cmd_summary(&ingest(&input, Some(3))?)?);
    let config = Config {
        input: Some(input),
        k: 2,
        weight_draws: 20_000,
        seed: 42,
        output: dir.join("out"),
        ..Config::default()
    };
    let report = cmd_test(&config)?;
    print!("{}", report.test.summary());
    println!("outputs in {}", config.output.display());
    Ok(())
}
