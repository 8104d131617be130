fn main() -> std::process::ExitCode {
    pfe::cli::main()
}
