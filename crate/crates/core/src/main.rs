fn main() -> std::process::ExitCode {
    parablow::cli::main()
}
