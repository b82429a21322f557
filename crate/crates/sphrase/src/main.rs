fn main() -> std::process::ExitCode {
    sphrase::cli::main()
}
