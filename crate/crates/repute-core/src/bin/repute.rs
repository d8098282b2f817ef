use std::process::exit;

fn main() {
    exit(repute_core::cli::run(std::env::args_os()) as i32);
}
