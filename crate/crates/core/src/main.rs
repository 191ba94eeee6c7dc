fn main() {
    if let Err(e) = crowdcount::cli::run(std::env::args_os()) {
        eprintln!("crowdcount: {e}");
        std::process::exit(e.exit_code());
    }
}
