fn main() -> std::process::ExitCode {
    fsimlab::cli::main()
}
