fn main() {
    std::process::exit(cpr_experiment::cli::main_with_args(std::env::args_os()));
}
