//! A small resumable benchmark: two methods at two noise levels, with
//! metrics written as CSV to standard output.
//!
//! cargo run --release --example noise_benchmark

use edgeheal::eval::{generate_suite, inject_noise, run_benchmark, write_csv, BenchConfig, NoiseConfig, StageConfig, SuiteConfig};
use edgeheal::model::MockClient;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = BenchConfig {
        noise_levels: vec![0.0, 1.0],
        suite: SuiteConfig { incidents: 3, windows: 60, ..Default::default() },
        ..Default::default()
    };
    let suite = generate_suite(&bench.suite);
    let line = &suite.cases[0].logs[0].line;
    for level in [0.0, 0.4, 1.0] {
        println!("noise {level}: {}", inject_noise(line, &NoiseConfig::new(level, bench.seed, suite.profile)?));
    }

    let dir = std::env::temp_dir().join(format!("edgeheal-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let ckpt = dir.join("checkpoint.jsonl");
    let stages = StageConfig::default();
    let client = MockClient::default();
    let first = run_benchmark(&suite, &bench, &stages, &client, "example", Some(&ckpt), Some(2))?;
    println!("\ninterrupted after {} cells", first.reports.len());
    let done = run_benchmark(&suite, &bench, &stages, &client, "example", Some(&ckpt), None)?;
    println!("resumed {} cells, peak RSS {:.1} MB\n", done.resumed_cells, done.peak_rss_mb);
    write_csv(&done.reports, std::io::stdout())?;
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
