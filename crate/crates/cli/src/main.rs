fn main() -> std::process::ExitCode {
    midpred_cli::run(std::env::args_os())
}
