mod commands;
mod manifest;
mod plot;

use std::process::ExitCode;

use blurcam::ErrorClass;
use clap::error::ErrorKind;
use clap::Parser;

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Argument => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Argument => "argument",
        ErrorClass::Data => "data",
        ErrorClass::Numeric => "numeric",
    }
}

/// One JSON object on stderr, then the class exit code.
fn fail(kind: &str, class: ErrorClass, message: &str) -> ExitCode {
    let code = exit_code(class);
    let body = serde_json::json!({
        "error": kind,
        "class": class_name(class),
        "exit_code": code,
        "message": message,
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => return fail("argument", ErrorClass::Argument, e.to_string().trim()),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.class(), &e.to_string()),
    }
}
