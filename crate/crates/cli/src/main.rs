use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;

// a closed pipe (e.g. `| head`) is not an error worth a panic
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let spec = match lda_cvb_cli::parse_config(std::env::args_os()) {
        Ok(spec) => spec,
        Err(lda_cvb_cli::CliError::Help(msg)) => {
            emit(&format!("{msg}\n"));
            return ExitCode::SUCCESS;
        }
        Err(lda_cvb_cli::CliError::Usage(msg)) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match lda_cvb_cli::run(&spec) {
        Ok(report) => {
            let mut text = String::from("algorithm,mean_perplexity,std_perplexity\n");
            for r in &report.summary {
                let _ = writeln!(text, "{},{:.4},{:.4}", r.algorithm, r.mean_perplexity, r.std_perplexity);
            }
            for r in &report.recovery {
                let _ = writeln!(
                    text,
                    "recovery {} run {}: mean cosine {:.4}, min {:.4}",
                    r.algorithm, r.run, r.mean_cosine, r.min_cosine
                );
            }
            let _ = writeln!(text, "wrote {} files to {}", report.files.len(), spec.out.display());
            emit(&text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
