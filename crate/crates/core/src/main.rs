fn main() -> std::process::ExitCode {
    patternscope::cli::main_with(std::env::args_os())
}
