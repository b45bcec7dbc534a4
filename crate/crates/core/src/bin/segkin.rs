use clap::Parser;
use segkin_core::cli::{dispatch, parse_and_validate, Cli};

fn main() {
    let cli = Cli::parse();
    let cfg = match parse_and_validate(cli.command) {
        Ok(c) => c,
        Err(violations) => {
            let doc = serde_json::json!({ "error": "invalid configuration", "violations": violations });
            eprintln!("{}", serde_json::to_string_pretty(&doc).unwrap());
            std::process::exit(2);
        }
    };
    if let Err(e) = dispatch(cfg) {
        let doc = serde_json::json!({ "error": e.to_string() });
        eprintln!("{}", serde_json::to_string(&doc).unwrap());
        std::process::exit(1);
    }
}
