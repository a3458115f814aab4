fn main() -> std::process::ExitCode {
    v2v_core::cli::main()
}
