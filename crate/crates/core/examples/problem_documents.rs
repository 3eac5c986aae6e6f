//! Drive the command-line pipeline from code: load a JSON problem document,
//! resolve the sampling plan and run the analysis.

use std::path::PathBuf;

use infinity_kkt::cli::{cmd_analyze, cmd_descent, AnalyzeArgs, CommonFlags, DescentArgs, TrajectoryFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems");

    let args = AnalyzeArgs {
        path: dir.join("worked_example.json"),
        no_cross_validation: false,
        flags: CommonFlags { seed: Some(3), ..Default::default() },
    };
    let out = cmd_analyze(&args)?;
    println!("analyze exit {}: {}", out.code, out.summary);
    println!("report is {} bytes of JSON", out.body.len());

    let args = DescentArgs {
        path: dir.join("polyhedral.json"),
        x0: Some(vec![0.0, 0.0]),
        budget: Some(200),
        format: TrajectoryFormat::Csv,
        flags: CommonFlags::default(),
    };
    let out = cmd_descent(&args)?;
    println!("descent exit {}: {}", out.code, out.summary);
    print!("{}", out.body);
    Ok(())
}
