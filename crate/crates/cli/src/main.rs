fn main() {
    std::process::exit(shockfit_cli::run(std::env::args()));
}
