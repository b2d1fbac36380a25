fn main() -> std::process::ExitCode {
    subalign::cli::main()
}
