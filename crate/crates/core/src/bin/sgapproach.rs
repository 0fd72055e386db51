fn main() {
    std::process::exit(sgapproach::cli::main_with_args(std::env::args_os()));
}
