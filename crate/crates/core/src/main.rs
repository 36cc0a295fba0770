fn main() {
    std::process::exit(mess_plus::harness::cli::run(std::env::args_os()));
}
