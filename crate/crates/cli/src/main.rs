use std::path::PathBuf;

fn main() {
    let env = std::env::var_os(fgboltz_cli::CONFIG_ENV).map(PathBuf::from);
    std::process::exit(fgboltz_cli::run(std::env::args_os(), env));
}
