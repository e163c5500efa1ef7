fn main() -> std::process::ExitCode {
    ddsd::cli::run(std::env::args_os())
}
