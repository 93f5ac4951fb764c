fn main() -> std::process::ExitCode {
    cuwalk::cli::main()
}
