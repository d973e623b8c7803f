fn main() -> std::process::ExitCode {
    certainty::cli::main()
}
