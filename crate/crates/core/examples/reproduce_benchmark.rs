use langevin_core::benchmark::{run_all, write_table, BenchmarkOptions};

fn main() -> langevin_core::Result<()> {
    let rows = run_all(&BenchmarkOptions::default())?;
    write_table(&rows, std::io::stdout())?;
    if rows.iter().any(|r| !r.pass) {
        std::process::exit(1);
    }
    Ok(())
}
