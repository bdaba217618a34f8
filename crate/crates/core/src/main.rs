fn main() -> std::process::ExitCode {
    lidegrade::cli::main()
}
